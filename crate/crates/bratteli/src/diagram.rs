//! Generalized Bratteli diagrams as lazily evaluated sequences of incidence
//! matrices over (possibly infinite) vertex sets.
//!
//! Level `n` of a diagram is the matrix `F_n = (f_{v,w})` with `v ∈ V_{n+1}`
//! (the range) and `w ∈ V_n` (the source). Rows are always finite and are the
//! primitive access path; columns are derived from band parameters or from
//! family-specific closed forms.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::seq::Seq;
use crate::{Error, Result};

pub type Vertex = i64;
/// Sparse row: `(source vertex, edge count)` sorted by source, counts positive.
pub type Row = Vec<(Vertex, u64)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexSet {
    Finite {
        lo: Vertex,
        hi: Vertex,
    },
    /// `{first, first + 1, ...}`.
    Naturals {
        first: Vertex,
    },
    Integers,
}

impl VertexSet {
    pub fn finite(lo: Vertex, hi: Vertex) -> Self {
        assert!(lo <= hi, "empty finite vertex set");
        VertexSet::Finite { lo, hi }
    }

    pub fn contains(&self, v: Vertex) -> bool {
        match *self {
            VertexSet::Finite { lo, hi } => lo <= v && v <= hi,
            VertexSet::Naturals { first } => v >= first,
            VertexSet::Integers => true,
        }
    }

    /// Intersection with `[lo, hi]`, if nonempty.
    pub fn clip(&self, lo: Vertex, hi: Vertex) -> Option<(Vertex, Vertex)> {
        let (a, b) = match *self {
            VertexSet::Finite { lo: l, hi: h } => (lo.max(l), hi.min(h)),
            VertexSet::Naturals { first } => (lo.max(first), hi),
            VertexSet::Integers => (lo, hi),
        };
        (a <= b).then_some((a, b))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, VertexSet::Finite { .. })
    }

    pub fn first(&self) -> Option<Vertex> {
        match *self {
            VertexSet::Finite { lo, .. } => Some(lo),
            VertexSet::Naturals { first } => Some(first),
            VertexSet::Integers => None,
        }
    }

    pub fn len(&self) -> Option<u64> {
        match *self {
            VertexSet::Finite { lo, hi } => Some((hi - lo + 1) as u64),
            _ => None,
        }
    }

    /// All members, for finite sets.
    pub fn members(&self) -> Option<Vec<Vertex>> {
        match *self {
            VertexSet::Finite { lo, hi } => Some((lo..=hi).collect()),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags {
    pub stationary: bool,
    pub horizontally_stationary: bool,
}

/// Per-level function used for band widths and row-sum bounds.
pub type LevelFn = Arc<dyn Fn(usize) -> u64 + Send + Sync>;

/// Bounded-size data: every row `v` of level `n` is supported in
/// `[v - t_n, v + t_n]`, and (optionally) row sums are at most `L_n`.
#[derive(Clone)]
pub struct BoundedSize {
    pub t: LevelFn,
    pub l: Option<Arc<dyn Fn(usize) -> BigUint + Send + Sync>>,
}

impl BoundedSize {
    pub fn from_seq(t: &Seq) -> Self {
        let t = t.clone();
        BoundedSize { t: Arc::new(move |n| t.at_u64(n).unwrap_or(u64::MAX)), l: None }
    }

    pub fn constant(t: u64) -> Self {
        BoundedSize { t: Arc::new(move |_| t), l: None }
    }

    pub fn with_l(mut self, l: impl Fn(usize) -> BigUint + Send + Sync + 'static) -> Self {
        self.l = Some(Arc::new(l));
        self
    }
}

impl fmt::Debug for BoundedSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ts: Vec<u64> = (0..4).map(|n| (self.t)(n)).collect();
        write!(f, "BoundedSize {{ t: {:?}.. }}", ts)
    }
}

/// Column `w` of a level: explicit entries plus an optional constant tail
/// `f_{v,w} = count` for every `v >= from` not listed explicitly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub entries: Vec<(Vertex, u64)>,
    pub tail: Option<ColumnTail>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColumnTail {
    pub from: Vertex,
    pub count: u64,
}

/// The named families of diagrams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FamilySpec {
    /// Stationary diagram with the given incidence matrix on `{0, ..., k-1}`.
    StationaryFinite { matrix: Vec<Vec<u64>> },
    /// Stationary Toeplitz diagram over ℤ: `f_{v,w} = symbol(w - v)`.
    StationaryInfiniteBanded { symbol: Vec<(i64, u64)> },
    /// `a_n` on the diagonal and `1` next to it, over ℤ.
    Tridiagonal { a: Seq },
    /// `a_n` at `(0,0)`, `1` for `|v - w| <= t_n` elsewhere, over ℤ.
    FatOdometer { a: Seq, t: Seq },
    /// Half-plane variant over ℕ₀ with the loaded vertex at 0.
    HalfPlaneFat { a: Seq, t: Seq },
    /// `f_{v,w} = 1` iff `|v - w| = t_n`, with `t_0 > 0`, `t_n > Σ_{i<n} t_i`.
    Bt { t: Seq },
    /// Same incidence as `Bt` but only `t_n > 0` is required.
    BtGeneral { t: Seq },
    /// `Bt` with `t_n = 2^n`.
    B2n,
    /// Transpose of the infinite Leslie matrix with fertilities `b` and
    /// survival rates `s`, vertices `{1, 2, ...}`.
    Leslie { b: Seq, s: Seq },
    /// `f_{j,i} = 1` for `i <= j`, vertices `{1, 2, ...}`.
    LowerTriangular,
    /// `F = [[2,0],[1,2]]` on `{1, 2}`.
    Rank2Example,
    /// Single vertex per level with `a_n` parallel edges.
    Odometer { a: Seq },
    /// Half-line stationary diagram: row 0 is `(a, 1)`, row `j >= 1` has ones at `j, j+1`.
    HalfLine { a: u64 },
    /// Stationary diagram over ℤ whose transpose has weights `2^k` off the
    /// diagonal; the ambient diagram of the edge-subdiagram example.
    EdgeExample,
    /// The retained part of `EdgeExample`.
    EdgeExampleSub,
}

type RowFn = dyn Fn(usize, Vertex) -> Result<Row> + Send + Sync;
type SetFn = dyn Fn(usize) -> VertexSet + Send + Sync;
type ColFn = dyn Fn(usize, Vertex) -> Result<Column> + Send + Sync;

/// A generalized Bratteli diagram. Cheap to clone; immutable.
#[derive(Clone)]
pub struct Diagram {
    name: String,
    sets: Arc<SetFn>,
    rows: Arc<RowFn>,
    cols: Option<Arc<ColFn>>,
    flags: Flags,
    bounded: Option<BoundedSize>,
    depth: Option<usize>,
    family: Option<FamilySpec>,
}

impl fmt::Debug for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diagram")
            .field("name", &self.name)
            .field("flags", &self.flags)
            .field("depth", &self.depth)
            .field("bounded", &self.bounded)
            .finish()
    }
}

fn push(row: &mut Row, w: Vertex, c: u64) {
    if c > 0 {
        row.push((w, c));
    }
}

fn normalize(mut row: Row) -> Row {
    row.sort_by_key(|&(w, _)| w);
    let mut out: Row = Vec::with_capacity(row.len());
    for (w, c) in row {
        match out.last_mut() {
            Some((lw, lc)) if *lw == w => *lc += c,
            _ => push(&mut out, w, c),
        }
    }
    out
}

impl Diagram {
    /// A diagram given by a row closure.
    pub fn from_rows(
        name: impl Into<String>,
        sets: impl Fn(usize) -> VertexSet + Send + Sync + 'static,
        rows: impl Fn(usize, Vertex) -> Result<Row> + Send + Sync + 'static,
    ) -> Self {
        Diagram {
            name: name.into(),
            sets: Arc::new(sets),
            rows: Arc::new(rows),
            cols: None,
            flags: Flags::default(),
            bounded: None,
            depth: None,
            family: None,
        }
    }

    /// A diagram with finitely many levels given by explicit matrices over
    /// `{0, ..., k_n - 1}`; `matrices[n]` has `|V_{n+1}|` rows and `|V_n|` columns.
    pub fn from_matrices(name: impl Into<String>, matrices: Vec<Vec<Vec<u64>>>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidFamilyParams("no matrices".into()));
        }
        let mut sizes = vec![matrices[0].first().map_or(0, |r| r.len())];
        for (n, m) in matrices.iter().enumerate() {
            if m.is_empty() || m.iter().any(|r| r.len() != sizes[n]) {
                return Err(Error::InvalidFamilyParams(format!("ragged matrix at level {}", n)));
            }
            sizes.push(m.len());
        }
        let depth = matrices.len();
        let mats = Arc::new(matrices);
        let sizes2 = sizes.clone();
        let mut d = Diagram::from_rows(
            name,
            move |n| VertexSet::finite(0, sizes2[n.min(sizes2.len() - 1)] as i64 - 1),
            move |n, v| {
                let mut row = Row::new();
                for (w, &c) in mats[n][v as usize].iter().enumerate() {
                    push(&mut row, w as Vertex, c);
                }
                Ok(row)
            },
        );
        d.depth = Some(depth);
        Ok(d)
    }

    pub fn with_flags(mut self, flags: Flags) -> Self {
        self.flags = flags;
        self
    }

    pub fn with_bounded_size(mut self, b: BoundedSize) -> Self {
        self.bounded = Some(b);
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn with_columns(mut self, cols: impl Fn(usize, Vertex) -> Result<Column> + Send + Sync + 'static) -> Self {
        self.cols = Some(Arc::new(cols));
        self
    }

    fn with_family(mut self, f: FamilySpec) -> Self {
        self.family = Some(f);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    pub fn family(&self) -> Option<&FamilySpec> {
        self.family.as_ref()
    }

    pub fn bounded_size(&self) -> Option<&BoundedSize> {
        self.bounded.as_ref()
    }

    /// Number of incidence levels, `None` when infinite.
    pub fn depth(&self) -> Option<usize> {
        self.depth
    }

    pub fn vertex_set(&self, n: usize) -> VertexSet {
        (self.sets)(n)
    }

    /// Band width `t_n`, if declared.
    pub fn band(&self, n: usize) -> Option<u64> {
        self.bounded.as_ref().map(|b| (b.t)(n))
    }

    fn check_level(&self, n: usize) -> Result<()> {
        match self.depth {
            Some(d) if n >= d => Err(Error::LevelOutOfRange(n)),
            _ => Ok(()),
        }
    }

    /// Complete support of row `v ∈ V_{n+1}` of `F_n`.
    pub fn row(&self, n: usize, v: Vertex) -> Result<Row> {
        self.check_level(n)?;
        if !self.vertex_set(n + 1).contains(v) {
            return Err(Error::VertexOutOfSet { level: n + 1, vertex: v });
        }
        Ok(normalize((self.rows)(n, v)?))
    }

    /// `f^{(n)}_{v,w}`: the number of edges from `w ∈ V_n` to `v ∈ V_{n+1}`.
    pub fn entry(&self, n: usize, v: Vertex, w: Vertex) -> Result<u64> {
        if !self.vertex_set(n).contains(w) {
            return Err(Error::VertexOutOfSet { level: n, vertex: w });
        }
        Ok(self.row(n, v)?.iter().find(|&&(x, _)| x == w).map_or(0, |&(_, c)| c))
    }

    pub fn row_sum(&self, n: usize, v: Vertex) -> Result<u64> {
        self.row(n, v)?
            .iter()
            .try_fold(0u64, |acc, &(_, c)| acc.checked_add(c))
            .ok_or_else(|| Error::Overflow("row sum".into()))
    }

    /// Column `w ∈ V_n` of `F_n`.
    pub fn column(&self, n: usize, w: Vertex) -> Result<Column> {
        self.check_level(n)?;
        if !self.vertex_set(n).contains(w) {
            return Err(Error::VertexOutOfSet { level: n, vertex: w });
        }
        if let Some(c) = &self.cols {
            return c(n, w);
        }
        let range = self.vertex_set(n + 1);
        let (lo, hi) = if let Some(t) = self.band(n) {
            let t = t as i64;
            match range.clip(w - t, w + t) {
                Some(x) => x,
                None => return Ok(Column { entries: Vec::new(), tail: None }),
            }
        } else if let VertexSet::Finite { lo, hi } = range {
            (lo, hi)
        } else {
            return Err(Error::MissingTailDescriptor { level: n, vertex: w });
        };
        let mut entries = Vec::new();
        for v in lo..=hi {
            let c = self.entry(n, v, w)?;
            if c > 0 {
                entries.push((v, c));
            }
        }
        Ok(Column { entries, tail: None })
    }

    /// Common row sum of `F_n` over range vertices in `[lo, hi]`, if constant.
    pub fn check_row_sums(&self, n: usize, window: (Vertex, Vertex)) -> Result<Option<u64>> {
        let Some((lo, hi)) = self.vertex_set(n + 1).clip(window.0, window.1) else {
            return Ok(None);
        };
        let mut common = None;
        for v in lo..=hi {
            let s = self.row_sum(n, v)?;
            match common {
                None => common = Some(s),
                Some(c) if c != s => return Ok(None),
                _ => {}
            }
        }
        Ok(common)
    }

    /// Common column sum of `F_n` over source vertices in `[lo, hi]`, if
    /// constant and finite.
    pub fn check_col_sums(&self, n: usize, window: (Vertex, Vertex)) -> Result<Option<u64>> {
        let Some((lo, hi)) = self.vertex_set(n).clip(window.0, window.1) else {
            return Ok(None);
        };
        let mut common = None;
        for w in lo..=hi {
            let col = match self.column(n, w) {
                Ok(c) => c,
                Err(Error::MissingTailDescriptor { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            if col.tail.is_some() {
                return Ok(None);
            }
            let s: u64 = col.entries.iter().map(|&(_, c)| c).sum();
            match common {
                None => common = Some(s),
                Some(c) if c != s => return Ok(None),
                _ => {}
            }
        }
        Ok(common)
    }

    /// Sources at level `m` of finite paths ending at `v ∈ V_{n+1}` lie in
    /// `[v - Σ_{i=m}^{n} t_i, v + Σ_{i=m}^{n} t_i]`.
    pub fn upper_cone(&self, n: usize, v: Vertex, m: usize) -> Result<(Vertex, Vertex)> {
        let b = self.bounded.as_ref().ok_or(Error::MissingBoundedSizeParams)?;
        if m > n {
            return Err(Error::InvalidFamilyParams(format!("m = {} > n = {}", m, n)));
        }
        let mut s: i64 = 0;
        for i in m..=n {
            s = s.checked_add((b.t)(i) as i64).ok_or_else(|| Error::Overflow("upper cone width".into()))?;
        }
        Ok((v - s, v + s))
    }

    /// Row of the product `F_{b-1} ⋯ F_a` for `v ∈ V_b`.
    pub fn product_row(&self, a: usize, b: usize, v: Vertex) -> Result<Row> {
        let mut cur: BTreeMap<Vertex, u64> = BTreeMap::new();
        cur.insert(v, 1);
        for j in (a..b).rev() {
            let mut next: BTreeMap<Vertex, u64> = BTreeMap::new();
            for (&u, &cu) in &cur {
                for (w, c) in self.row(j, u)? {
                    let add = cu.checked_mul(c).ok_or_else(|| Error::Overflow("telescoped entry".into()))?;
                    let e = next.entry(w).or_insert(0);
                    *e = e.checked_add(add).ok_or_else(|| Error::Overflow("telescoped entry".into()))?;
                }
            }
            cur = next;
        }
        Ok(cur.into_iter().collect())
    }

    /// Checks `f_{i,j} = f_{i+1,j+1}` on sampled pairs within `[lo, hi]`;
    /// returns a violating `(n, i, j)` if one exists.
    pub fn toeplitz_violation(
        &self,
        levels: usize,
        window: (Vertex, Vertex),
    ) -> Result<Option<(usize, Vertex, Vertex)>> {
        for n in 0..levels {
            let rset = self.vertex_set(n + 1);
            let sset = self.vertex_set(n);
            for i in window.0..=window.1 {
                if !rset.contains(i) || !rset.contains(i + 1) {
                    continue;
                }
                let t = self.band(n).unwrap_or(4) as i64;
                for j in (i - t - 1)..=(i + t + 1) {
                    if !sset.contains(j) || !sset.contains(j + 1) {
                        continue;
                    }
                    if self.entry(n, i, j)? != self.entry(n, i + 1, j + 1)? {
                        return Ok(Some((n, i, j)));
                    }
                }
            }
        }
        Ok(None)
    }
}

/// Telescoping cut rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cuts {
    /// Explicit levels `c_0 = 0 < c_1 < ...`; the result has `len - 1` levels.
    Explicit(Vec<usize>),
    /// `c_k = k * step`.
    Every(usize),
}

impl Cuts {
    fn cut(&self, k: usize) -> usize {
        match self {
            Cuts::Explicit(c) => c[k],
            Cuts::Every(s) => k * s,
        }
    }

    fn count(&self) -> Option<usize> {
        match self {
            Cuts::Explicit(c) => Some(c.len() - 1),
            Cuts::Every(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Cuts::Explicit(c) => {
                if c.len() < 2 || c[0] != 0 || c.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::EmptyCuts);
                }
            }
            Cuts::Every(s) => {
                if *s == 0 {
                    return Err(Error::EmptyCuts);
                }
            }
        }
        Ok(())
    }

    /// Cuts of the composition: telescoping by `self`, then by `outer`.
    pub fn compose(&self, outer: &Cuts) -> Cuts {
        match (self, outer) {
            (Cuts::Every(a), Cuts::Every(b)) => Cuts::Every(a * b),
            _ => {
                let k = outer.count().unwrap_or_else(|| self.count().unwrap_or(0));
                Cuts::Explicit((0..=k).map(|i| self.cut(outer.cut(i))).collect())
            }
        }
    }
}

/// Telescoping: level `k` of the result is `F_{c_{k+1}-1} ⋯ F_{c_k}`.
pub fn telescope(d: &Diagram, cuts: &Cuts) -> Result<Diagram> {
    cuts.validate()?;
    if let (Some(depth), Some(k)) = (d.depth(), cuts.count()) {
        if cuts.cut(k) > depth {
            return Err(Error::LevelOutOfRange(cuts.cut(k)));
        }
    }
    let base = d.clone();
    let c1 = cuts.clone();
    let c2 = cuts.clone();
    let base2 = d.clone();
    let mut out = Diagram::from_rows(
        format!("{} telescoped", d.name()),
        move |k| base.vertex_set(c1.cut(k)),
        move |k, v| base2.product_row(c2.cut(k), c2.cut(k + 1), v),
    );
    let regular = match cuts {
        Cuts::Every(_) => true,
        Cuts::Explicit(c) => c.windows(2).all(|w| w[1] - w[0] == c[1] - c[0]),
    };
    out.flags =
        Flags { stationary: d.flags.stationary && regular, horizontally_stationary: d.flags.horizontally_stationary };
    out.depth = match (cuts.count(), d.depth()) {
        (Some(k), _) => Some(k),
        (None, Some(dd)) => Some(dd / cuts.cut(1)),
        (None, None) => None,
    };
    if let Some(b) = &d.bounded {
        let t = b.t.clone();
        let c3 = cuts.clone();
        let mut nb = BoundedSize { t: Arc::new(move |k| (c3.cut(k)..c3.cut(k + 1)).map(|i| t(i)).sum()), l: None };
        if let Some(l) = &b.l {
            let l = l.clone();
            let c4 = cuts.clone();
            nb.l = Some(Arc::new(move |k| (c4.cut(k)..c4.cut(k + 1)).map(|i| l(i)).product()));
        }
        out.bounded = Some(nb);
    }
    Ok(out)
}

fn seq_u64(s: &Seq, n: usize) -> Result<u64> {
    s.at_u64(n)
}

fn check_bt(t: &Seq) -> Result<()> {
    t.validate_positive()?;
    let mut sum = BigUint::zero();
    for n in 0..64 {
        let tn = t.at(n);
        if n > 0 && tn <= sum {
            return Err(Error::InvalidFamilyParams(format!(
                "t_{} = {} must exceed the sum {} of the previous terms",
                n, tn, sum
            )));
        }
        sum += tn;
    }
    Ok(())
}

/// Column sums of `A = F^T` in the edge example (row sums of `F`).
fn edge_example_row(v: Vertex) -> Row {
    // F row v is column v of A.
    let mut row = Row::new();
    let p = |k: i64| 1u64 << k;
    match v {
        0 => {
            push(&mut row, -1, 1);
            push(&mut row, 0, 1);
            push(&mut row, 1, 2);
        }
        -1 => {
            push(&mut row, -2, 2);
            push(&mut row, -1, 1);
            push(&mut row, 0, 1);
        }
        v if v >= 1 => {
            push(&mut row, v - 1, p(v));
            push(&mut row, v + 1, p(v + 1));
        }
        v => {
            let k = -v;
            push(&mut row, v - 1, p(k));
            push(&mut row, v + 1, p(k - 1));
        }
    }
    row
}

fn edge_example_sub_row(v: Vertex) -> Row {
    let mut row = Row::new();
    match v {
        0 => {
            push(&mut row, -1, 1);
            push(&mut row, 0, 1);
            push(&mut row, 1, 1);
        }
        -1 => {
            push(&mut row, -2, 1);
            push(&mut row, -1, 1);
            push(&mut row, 0, 1);
        }
        v if v >= 1 => {
            push(&mut row, v - 1, 2);
            push(&mut row, v + 1, 1);
        }
        v => {
            push(&mut row, v - 1, 1);
            push(&mut row, v + 1, 2);
        }
    }
    row
}

/// Builds one of the named families.
pub fn build_family(spec: &FamilySpec) -> Result<Diagram> {
    let stationary = Flags { stationary: true, horizontally_stationary: false };
    let both = Flags { stationary: true, horizontally_stationary: true };
    let d = match spec {
        FamilySpec::StationaryFinite { matrix } => {
            let k = matrix.len();
            if k == 0 || matrix.iter().any(|r| r.len() != k) {
                return Err(Error::InvalidFamilyParams("matrix must be square and nonempty".into()));
            }
            for w in 0..k {
                if (0..k).all(|v| matrix[v][w] == 0) {
                    return Err(Error::NonPositiveEntry(format!("vertex {} has no outgoing edge", w)));
                }
            }
            for (v, r) in matrix.iter().enumerate() {
                if r.iter().all(|&c| c == 0) {
                    return Err(Error::NonPositiveEntry(format!("vertex {} has no incoming edge", v)));
                }
            }
            let m = Arc::new(matrix.clone());
            Diagram::from_rows(
                "stationary finite",
                move |_| VertexSet::finite(0, k as i64 - 1),
                move |_, v| {
                    let mut row = Row::new();
                    for (w, &c) in m[v as usize].iter().enumerate() {
                        push(&mut row, w as Vertex, c);
                    }
                    Ok(row)
                },
            )
            .with_flags(stationary)
        }
        FamilySpec::StationaryInfiniteBanded { symbol } => {
            if symbol.iter().all(|&(_, c)| c == 0) {
                return Err(Error::NonPositiveEntry("empty symbol".into()));
            }
            let t = symbol.iter().map(|&(o, _)| o.unsigned_abs()).max().unwrap_or(0);
            let l: u64 = symbol.iter().map(|&(_, c)| c).sum();
            let sym = Arc::new(symbol.clone());
            Diagram::from_rows(
                "stationary banded",
                |_| VertexSet::Integers,
                move |_, v| {
                    let mut row = Row::new();
                    for &(o, c) in sym.iter() {
                        push(&mut row, v + o, c);
                    }
                    Ok(row)
                },
            )
            .with_flags(both)
            .with_bounded_size(BoundedSize::constant(t).with_l(move |_| BigUint::from(l)))
        }
        FamilySpec::Tridiagonal { a } => {
            a.validate_positive()?;
            let a1 = a.clone();
            let a2 = a.clone();
            Diagram::from_rows(
                "tridiagonal",
                |_| VertexSet::Integers,
                move |n, v| Ok(vec![(v - 1, 1), (v, seq_u64(&a1, n)?), (v + 1, 1)]),
            )
            .with_flags(Flags {
                stationary: a.is_bounded() && matches!(a, Seq::Constant(_)),
                horizontally_stationary: true,
            })
            .with_bounded_size(BoundedSize::constant(1).with_l(move |n| a2.at(n) + 2u32))
        }
        FamilySpec::FatOdometer { a, t } => {
            a.validate_positive()?;
            t.validate_positive()?;
            let (a1, t1) = (a.clone(), t.clone());
            let (a2, t2) = (a.clone(), t.clone());
            Diagram::from_rows(
                "fat odometer",
                |_| VertexSet::Integers,
                move |n, v| {
                    let tn = seq_u64(&t1, n)? as i64;
                    let an = seq_u64(&a1, n)?;
                    let mut row = Row::new();
                    for w in (v - tn)..=(v + tn) {
                        push(&mut row, w, if v == 0 && w == 0 { an } else { 1 });
                    }
                    Ok(row)
                },
            )
            .with_flags(Flags {
                stationary: matches!((a, t), (Seq::Constant(_), Seq::Constant(_))),
                horizontally_stationary: false,
            })
            .with_bounded_size(BoundedSize::from_seq(t).with_l(move |n| a2.at(n) + t2.at(n) * 2u32))
        }
        FamilySpec::HalfPlaneFat { a, t } => {
            a.validate_positive()?;
            t.validate_positive()?;
            let (a1, t1) = (a.clone(), t.clone());
            let (a2, t2) = (a.clone(), t.clone());
            Diagram::from_rows(
                "half-plane fat odometer",
                |_| VertexSet::Naturals { first: 0 },
                move |n, v| {
                    let tn = seq_u64(&t1, n)? as i64;
                    let mut row = Row::new();
                    if v == 0 {
                        push(&mut row, 0, seq_u64(&a1, n)?);
                        for w in 1..=tn {
                            push(&mut row, w, 1);
                        }
                    } else {
                        for w in (v - tn).max(0)..=(v + tn) {
                            push(&mut row, w, 1);
                        }
                    }
                    Ok(row)
                },
            )
            .with_flags(Flags {
                stationary: matches!((a, t), (Seq::Constant(_), Seq::Constant(_))),
                horizontally_stationary: false,
            })
            .with_bounded_size(BoundedSize::from_seq(t).with_l(move |n| a2.at(n) + t2.at(n) * 2u32 + 1u32))
        }
        FamilySpec::Bt { t } | FamilySpec::BtGeneral { t } => {
            if matches!(spec, FamilySpec::Bt { .. }) {
                check_bt(t)?;
            } else {
                t.validate_positive()?;
            }
            let t1 = t.clone();
            let t3 = t.clone();
            Diagram::from_rows(
                "B(t)",
                |_| VertexSet::Integers,
                move |n, v| {
                    let tn = seq_u64(&t1, n)? as i64;
                    Ok(vec![(v - tn, 1), (v + tn, 1)])
                },
            )
            .with_columns(move |n, w| {
                let tn = seq_u64(&t3, n)? as i64;
                Ok(Column { entries: vec![(w - tn, 1), (w + tn, 1)], tail: None })
            })
            .with_flags(Flags { stationary: matches!(t, Seq::Constant(_)), horizontally_stationary: true })
            .with_bounded_size(BoundedSize::from_seq(t).with_l(|_| BigUint::from(2u32)))
        }
        FamilySpec::B2n => {
            let mut d = build_family(&FamilySpec::Bt { t: Seq::geometric(1, 2) })?;
            d.name = "B(2^n)".to_string();
            d
        }
        FamilySpec::Leslie { b, s } => {
            b.validate_positive()?;
            s.validate_positive()?;
            let (b1, s1) = (b.clone(), s.clone());
            let (b2, s2) = (b.clone(), s.clone());
            Diagram::from_rows(
                "Leslie",
                |_| VertexSet::Naturals { first: 1 },
                move |_, v| {
                    let i = (v - 1) as usize;
                    Ok(vec![(1, seq_u64(&b1, i)?), (v + 1, seq_u64(&s1, i)?)])
                },
            )
            .with_flags(stationary)
            .with_columns(move |_, w| {
                if w >= 2 {
                    let i = (w - 2) as usize;
                    return Ok(Column { entries: vec![(w - 1, seq_u64(&s2, i)?)], tail: None });
                }
                match &b2 {
                    Seq::Constant(c) => {
                        Ok(Column { entries: Vec::new(), tail: Some(ColumnTail { from: 1, count: *c }) })
                    }
                    Seq::List { values, tail } if matches!(**tail, Seq::Constant(_)) => {
                        let Seq::Constant(c) = **tail else { unreachable!() };
                        let entries = values.iter().enumerate().map(|(i, &x)| (i as Vertex + 1, x)).collect();
                        Ok(Column { entries, tail: Some(ColumnTail { from: values.len() as Vertex + 1, count: c }) })
                    }
                    _ => Err(Error::MissingTailDescriptor { level: 0, vertex: 1 }),
                }
            })
        }
        FamilySpec::LowerTriangular => Diagram::from_rows(
            "lower triangular",
            |_| VertexSet::Naturals { first: 1 },
            |_, v| Ok((1..=v).map(|w| (w, 1)).collect()),
        )
        .with_flags(both)
        .with_columns(|_, w| Ok(Column { entries: Vec::new(), tail: Some(ColumnTail { from: w, count: 1 }) })),
        FamilySpec::Rank2Example => Diagram::from_rows(
            "rank-2 example",
            |_| VertexSet::finite(1, 2),
            |_, v| Ok(if v == 1 { vec![(1, 2)] } else { vec![(1, 1), (2, 2)] }),
        )
        .with_flags(stationary),
        FamilySpec::Odometer { a } => {
            a.validate_positive()?;
            let a1 = a.clone();
            Diagram::from_rows("odometer", |_| VertexSet::finite(0, 0), move |n, _| Ok(vec![(0, seq_u64(&a1, n)?)]))
                .with_flags(Flags { stationary: matches!(a, Seq::Constant(_)), horizontally_stationary: false })
        }
        FamilySpec::HalfLine { a } => {
            if *a == 0 {
                return Err(Error::InvalidFamilyParams("a must be positive".into()));
            }
            let a = *a;
            Diagram::from_rows(
                "half-line",
                |_| VertexSet::Naturals { first: 0 },
                move |_, v| Ok(if v == 0 { vec![(0, a), (1, 1)] } else { vec![(v, 1), (v + 1, 1)] }),
            )
            .with_flags(stationary)
            .with_bounded_size(BoundedSize::constant(1).with_l(move |_| BigUint::from(a.max(1) + 1)))
        }
        FamilySpec::EdgeExample => Diagram::from_rows(
            "edge example",
            |_| VertexSet::Integers,
            |_, v| {
                if v.unsigned_abs() > 62 {
                    return Err(Error::Overflow("edge example weights beyond 2^63".into()));
                }
                Ok(edge_example_row(v))
            },
        )
        .with_flags(stationary)
        .with_bounded_size(BoundedSize::constant(1)),
        FamilySpec::EdgeExampleSub => {
            Diagram::from_rows("edge example sub", |_| VertexSet::Integers, |_, v| Ok(edge_example_sub_row(v)))
                .with_flags(stationary)
                .with_bounded_size(BoundedSize::constant(1).with_l(|_| BigUint::from(3u32)))
        }
    };
    Ok(d.with_family(spec.clone()))
}

/// Dense `|hi - lo + 1|`-square corner of `F_n` (rows and columns indexed by
/// `lo..=hi`).
pub fn dense_window(d: &Diagram, n: usize, lo: Vertex, hi: Vertex) -> Result<Vec<Vec<u64>>> {
    let mut out = Vec::new();
    for v in lo..=hi {
        let row = d.row(n, v)?;
        out.push((lo..=hi).map(|w| row.iter().find(|&&(x, _)| x == w).map_or(0, |&(_, c)| c)).collect());
    }
    Ok(out)
}

/// Row sums as exact integers (used by ERS checks when entries are large).
pub fn row_sum_big(d: &Diagram, n: usize, v: Vertex) -> Result<BigUint> {
    Ok(d.row(n, v)?.iter().fold(BigUint::zero(), |acc, &(_, c)| acc + BigUint::from(c)))
}

/// `true` when every sampled source vertex in the window has an outgoing edge.
pub fn sources_have_outgoing(d: &Diagram, n: usize, window: (Vertex, Vertex)) -> Result<bool> {
    let Some((lo, hi)) = d.vertex_set(n).clip(window.0, window.1) else {
        return Ok(true);
    };
    for w in lo..=hi {
        let col = d.column(n, w)?;
        if col.entries.is_empty() && col.tail.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn f<T: Send + Sync>() {}
    f::<Diagram>();
    let _ = Box::new(0u8);
    let _ = BigUint::one().to_u64();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_examples() {
        let b2n = build_family(&FamilySpec::B2n).unwrap();
        assert_eq!(b2n.entry(0, 1, 0).unwrap(), 1);
        assert_eq!(b2n.entry(0, 0, 0).unwrap(), 0);
        assert_eq!(b2n.row(1, 0).unwrap(), vec![(-2, 1), (2, 1)]);
        let r2 = build_family(&FamilySpec::Rank2Example).unwrap();
        assert_eq!(r2.entry(5, 2, 1).unwrap(), 1);
        assert_eq!(r2.check_row_sums(0, (1, 2)).unwrap(), None);
        let fat = build_family(&FamilySpec::FatOdometer { a: Seq::constant(3), t: Seq::constant(1) }).unwrap();
        assert_eq!(fat.row(4, 0).unwrap(), vec![(-1, 1), (0, 3), (1, 1)]);
        let fat2 = build_family(&FamilySpec::FatOdometer { a: Seq::constant(2), t: Seq::constant(1) }).unwrap();
        assert_eq!(fat2.row_sum(0, 0).unwrap(), 4);
        let lt = build_family(&FamilySpec::LowerTriangular).unwrap();
        assert_eq!(lt.row(0, 3).unwrap(), vec![(1, 1), (2, 1), (3, 1)]);
    }

    #[test]
    fn bt_rejects_non_superincreasing() {
        let bad = FamilySpec::Bt { t: Seq::constant(1) };
        assert!(matches!(build_family(&bad), Err(Error::InvalidFamilyParams(_))));
        assert!(build_family(&FamilySpec::BtGeneral { t: Seq::constant(1) }).is_ok());
    }

    #[test]
    fn cones_and_sums() {
        let b2n = build_family(&FamilySpec::B2n).unwrap();
        assert_eq!(b2n.upper_cone(2, 0, 0).unwrap(), (-7, 7));
        assert_eq!(b2n.check_row_sums(3, (-20, 20)).unwrap(), Some(2));
        assert_eq!(b2n.check_col_sums(3, (-20, 20)).unwrap(), Some(2));
        let fat = build_family(&FamilySpec::FatOdometer { a: Seq::constant(3), t: Seq::constant(1) }).unwrap();
        assert_eq!(fat.upper_cone(1, 5, 0).unwrap(), (3, 7));
        assert_eq!(fat.upper_cone(4, 5, 4).unwrap(), (4, 6));
        let tri = build_family(&FamilySpec::Tridiagonal { a: Seq::geometric(2, 4) }).unwrap();
        assert_eq!(tri.check_row_sums(2, (-5, 5)).unwrap(), Some(34));
        let r2 = build_family(&FamilySpec::Rank2Example).unwrap();
        assert!(matches!(r2.upper_cone(1, 1, 0), Err(Error::MissingBoundedSizeParams)));
    }

    #[test]
    fn telescoping_examples() {
        let r2 = build_family(&FamilySpec::Rank2Example).unwrap();
        let t = telescope(&r2, &Cuts::Explicit(vec![0, 2, 4])).unwrap();
        assert_eq!(t.depth(), Some(2));
        assert!(t.flags().stationary);
        for k in 0..2 {
            assert_eq!(t.row(k, 1).unwrap(), vec![(1, 4)]);
            assert_eq!(t.row(k, 2).unwrap(), vec![(1, 4), (2, 4)]);
        }
        let odo = build_family(&FamilySpec::Odometer { a: Seq::constant(2) }).unwrap();
        let t = telescope(&odo, &Cuts::Explicit(vec![0, 3])).unwrap();
        assert_eq!(t.row(0, 0).unwrap(), vec![(0, 8)]);
        assert!(matches!(telescope(&odo, &Cuts::Explicit(vec![1, 2])), Err(Error::EmptyCuts)));
    }

    #[test]
    fn edge_example_sub_is_dominated() {
        let a = build_family(&FamilySpec::EdgeExample).unwrap();
        let s = build_family(&FamilySpec::EdgeExampleSub).unwrap();
        for v in -20..=20 {
            for (w, c) in s.row(0, v).unwrap() {
                assert!(c <= a.entry(0, v, w).unwrap());
            }
            assert_eq!(s.row_sum(0, v).unwrap(), 3);
        }
    }
}
