//! JSON experiment documents.
//!
//! A document names a diagram family, an action and the numeric knobs of
//! that action:
//!
//! ```json
//! {"diagram": {"family": "tridiagonal", "a": {"kind": "geometric", "c": 2, "rho": 4}},
//!  "action": "extend-vertex", "sub": {"kind": "vertex", "W": "singleton:0"}, "depth": 30}
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::path::Path;
use std::str::FromStr;

use bratteli::diagram::{build_family, Diagram, FamilySpec};
use bratteli::seq::Seq;
use bratteli::Q;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_DEPTH: usize = 12;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_WINDOW: (i64, i64) = (-10, 10);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeqDoc {
    Constant { c: u64 },
    Geometric { c: u64, rho: u64 },
    Polynomial { coeffs: Vec<u64> },
    List { values: Vec<u64>, tail: Box<SeqDoc> },
}

impl From<&SeqDoc> for Seq {
    fn from(d: &SeqDoc) -> Seq {
        match d {
            SeqDoc::Constant { c } => Seq::Constant(*c),
            SeqDoc::Geometric { c, rho } => Seq::Geometric { c: *c, rho: *rho },
            SeqDoc::Polynomial { coeffs } => Seq::Polynomial(coeffs.clone()),
            SeqDoc::List { values, tail } => Seq::List { values: values.clone(), tail: Box::new(Seq::from(&**tail)) },
        }
    }
}

/// Short forms used on the command line: `constant:1`, `geometric:1,2`,
/// `polynomial:2,1` and `list:1,1;geometric:1,2`.
impl FromStr for SeqDoc {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("cannot read sequence '{}'", s));
        let nums = |body: &str| -> Result<Vec<u64>, CliError> {
            body.split(',').filter(|x| !x.is_empty()).map(|x| x.trim().parse().map_err(|_| bad())).collect()
        };
        let (kind, body) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "constant" => match nums(body)?.as_slice() {
                [c] => Ok(SeqDoc::Constant { c: *c }),
                _ => Err(bad()),
            },
            "geometric" => match nums(body)?.as_slice() {
                [c, rho] => Ok(SeqDoc::Geometric { c: *c, rho: *rho }),
                _ => Err(bad()),
            },
            "polynomial" => Ok(SeqDoc::Polynomial { coeffs: nums(body)? }),
            "list" => {
                let (values, tail) = body.split_once(';').ok_or_else(bad)?;
                Ok(SeqDoc::List { values: nums(values)?, tail: Box::new(tail.parse()?) })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagramDoc {
    StationaryFinite { matrix: Vec<Vec<u64>> },
    StationaryInfiniteBanded { symbol: Vec<(i64, u64)> },
    Tridiagonal { a: SeqDoc },
    FatOdometer { a: SeqDoc, t: SeqDoc },
    HalfPlaneFat { a: SeqDoc, t: SeqDoc },
    Bt { t: SeqDoc },
    BtGeneral { t: SeqDoc },
    B2n {},
    Leslie { b: SeqDoc, s: SeqDoc },
    LowerTriangular {},
    Rank2Example {},
    Odometer { a: SeqDoc },
    HalfLine { a: u64 },
    EdgeExample {},
    EdgeExampleSub {},
}

impl DiagramDoc {
    pub fn spec(&self) -> FamilySpec {
        use DiagramDoc as D;
        match self {
            D::StationaryFinite { matrix } => FamilySpec::StationaryFinite { matrix: matrix.clone() },
            D::StationaryInfiniteBanded { symbol } => FamilySpec::StationaryInfiniteBanded { symbol: symbol.clone() },
            D::Tridiagonal { a } => FamilySpec::Tridiagonal { a: a.into() },
            D::FatOdometer { a, t } => FamilySpec::FatOdometer { a: a.into(), t: t.into() },
            D::HalfPlaneFat { a, t } => FamilySpec::HalfPlaneFat { a: a.into(), t: t.into() },
            D::Bt { t } => FamilySpec::Bt { t: t.into() },
            D::BtGeneral { t } => FamilySpec::BtGeneral { t: t.into() },
            D::B2n {} => FamilySpec::B2n,
            D::Leslie { b, s } => FamilySpec::Leslie { b: b.into(), s: s.into() },
            D::LowerTriangular {} => FamilySpec::LowerTriangular,
            D::Rank2Example {} => FamilySpec::Rank2Example,
            D::Odometer { a } => FamilySpec::Odometer { a: a.into() },
            D::HalfLine { a } => FamilySpec::HalfLine { a: *a },
            D::EdgeExample {} => FamilySpec::EdgeExample,
            D::EdgeExampleSub {} => FamilySpec::EdgeExampleSub,
        }
    }

    pub fn build(&self) -> Result<Diagram, CliError> {
        Ok(build_family(&self.spec())?)
    }

    /// The `a` sequence of families that carry an odometer at a vertex.
    pub fn loop_sequence(&self) -> Option<Seq> {
        match self {
            DiagramDoc::Tridiagonal { a }
            | DiagramDoc::FatOdometer { a, .. }
            | DiagramDoc::HalfPlaneFat { a, .. }
            | DiagramDoc::Odometer { a } => Some(a.into()),
            _ => None,
        }
    }

    /// The `t` sequence of the `B(t)` families.
    pub fn bt_sequence(&self) -> Option<Seq> {
        match self {
            DiagramDoc::Bt { t } | DiagramDoc::BtGeneral { t } => Some(t.into()),
            DiagramDoc::B2n {} => Some(Seq::geometric(1, 2)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubDoc {
    /// `W` is `singleton:v`, `full`, `exhaustion:k` or `interval:lo:hi`.
    Vertex {
        #[serde(rename = "W")]
        w: String,
    },
    /// An edge subdiagram: the retained diagram must sit below the parent entrywise.
    Edge { retained: DiagramDoc },
    /// The intermediate diagram between the odometer at 0 and a fat odometer.
    Stepwise {},
}

/// The vertex-set selector of a vertex subdiagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WSpec {
    Singleton(i64),
    Full,
    Exhaustion(u64),
    Interval(i64, i64),
}

impl FromStr for WSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("cannot read vertex selection '{}'", s));
        let parts: Vec<&str> = s.split(':').collect();
        let int = |x: &str| x.trim().parse::<i64>().map_err(|_| bad());
        match parts.as_slice() {
            ["full"] => Ok(WSpec::Full),
            ["singleton", v] => Ok(WSpec::Singleton(int(v)?)),
            ["exhaustion", k] => Ok(WSpec::Exhaustion(k.trim().parse().map_err(|_| bad())?)),
            ["interval", lo, hi] => Ok(WSpec::Interval(int(lo)?, int(hi)?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureDoc {
    /// Odometer measure through `base` with `p_n = 1/(a_0 ⋯ a_{n-1})`.
    Odometer { a: SeqDoc, base: i64 },
    /// Eigen measure of the retained edge-example diagram.
    EdgeExample {
        #[serde(default = "yes")]
        normalized: bool,
    },
    /// Exact constant-parameter Leslie measure.
    Leslie { b: u64, s: u64 },
    /// Eigen measure of a finite stationary diagram at a rational `λ`.
    FiniteEigen { lambda: String },
    /// Lower-triangular family measure with parameter `a ∈ (0,1)`, e.g. `"1/2"`.
    Triangular { a: String },
    /// Extension of the odometer on `{v0}`, truncated at `horizon`.
    Horizon { v0: i64, horizon: usize },
}

fn yes() -> bool {
    true
}

pub fn parse_q(s: &str) -> Result<Q, CliError> {
    Q::from_str(s.trim()).map_err(|_| CliError::Config(format!("cannot read rational '{}'", s)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Heights,
    Measure,
    ExtendVertex,
    ExtendEdge,
    PerronTruncate,
    Leslie,
    DynamicsWander,
    ZeroOne,
    Converge,
    Exhaust,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Heights => "heights",
            Action::Measure => "measure",
            Action::ExtendVertex => "extend-vertex",
            Action::ExtendEdge => "extend-edge",
            Action::PerronTruncate => "perron-truncate",
            Action::Leslie => "leslie",
            Action::DynamicsWander => "dynamics-wander",
            Action::ZeroOne => "zero-one",
            Action::Converge => "converge",
            Action::Exhaust => "exhaust",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub diagram: DiagramDoc,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub: Option<SubDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureDoc>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_window")]
    pub window: (i64, i64),
    /// Truncation sizes for `perron-truncate` and `converge`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<usize>>,
    /// Levels of the 0-1 image, or cylinder length for `converge`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Iterations of the Vershik map per sampled path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// `ε` of the exhaustion search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

fn default_depth() -> usize {
    DEFAULT_DEPTH
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_window() -> (i64, i64) {
    DEFAULT_WINDOW
}

impl ExperimentConfig {
    pub fn new(diagram: DiagramDoc, action: Action) -> Self {
        ExperimentConfig {
            diagram,
            action,
            sub: None,
            measure: None,
            depth: DEFAULT_DEPTH,
            tol: DEFAULT_TOL,
            seed: DEFAULT_SEED,
            window: DEFAULT_WINDOW,
            ks: None,
            levels: None,
            kmax: None,
            samples: None,
            eps: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e)))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.window.0 > self.window.1 {
            return Err(CliError::Config(format!("empty window {}:{}", self.window.0, self.window.1)));
        }
        if let Some(SubDoc::Vertex { w }) = &self.sub {
            w.parse::<WSpec>()?;
        }
        Ok(())
    }
}

/// `LO:HI` as used by `--window`.
pub fn parse_window(s: &str) -> Result<(i64, i64), CliError> {
    let bad = || CliError::Config(format!("window must look like LO:HI, got '{}'", s));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let w = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
    if w.0 > w.1 {
        return Err(bad());
    }
    Ok(w)
}
