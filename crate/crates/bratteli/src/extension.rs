//! Extension of tail-invariant measures from subdiagrams to their saturations.
//!
//! For a vertex subdiagram supported by `(W_n)` with a probability measure
//! `p̄`, the extended measure of the saturation is
//!
//! `1 + Σ_n Σ_{v ∈ W_{n+1}} Σ_{w ∉ W_n} f_{v,w}^{(n)} H_w^{(n)} p̄_v^{(n+1)}`,
//!
//! and the edge case replaces the outer vertices by the removed edges
//! `F_n - F̄_n`. Every series below is summed exactly; a verdict is only
//! `Finite` with an analytic tail bound and only `Infinite` with a
//! certificate.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::combinatorics::{HeightTable, RowSource};
use crate::diagram::{Diagram, FamilySpec, Row, Vertex};
use crate::measure::{EigenSpec, MeasureSpec, PVectors, Scalar};
use crate::seq::{Monomial, Seq};
use crate::series::{Certificate, CertificateKind, Verdict};
use crate::{Error, Result, Q};

/// Number of levels on which structural hypotheses are sampled.
pub const SAMPLE_LEVELS: usize = 8;
/// Half-width of the vertex window on which row data is sampled.
pub const SAMPLE_RADIUS: i64 = 16;
/// Largest depth the series evaluators extend to on their own.
pub const AUTO_DEPTH_CAP: usize = 512;

fn qi(x: u64) -> Q {
    Q::from_integer(BigInt::from(x))
}

fn qb(x: &BigUint) -> Q {
    Q::from_integer(BigInt::from(x.clone()))
}

fn up(x: f64) -> f64 {
    x.next_up()
}

type WFn = Arc<dyn Fn(usize) -> Vec<Vertex> + Send + Sync>;

/// How the vertex sets `W_n` were described.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WKind {
    Singleton(Vertex),
    /// `W_n = V_n` for a parent with finite levels.
    Full,
    Intervals,
    Custom,
}

/// A vertex subdiagram `B̄ = B(W_n)`.
#[derive(Clone)]
pub struct VertexSubdiagram {
    parent: Diagram,
    w: WFn,
    kind: WKind,
    label: String,
    stationary: bool,
}

impl core::fmt::Debug for VertexSubdiagram {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "VertexSubdiagram({} in {}, {:?})", self.label, self.parent.name(), self.kind)
    }
}

impl VertexSubdiagram {
    /// `W_n` is returned sorted by `w`. Admissibility is checked on the
    /// first `SAMPLE_LEVELS` levels (or all levels of a finite diagram).
    pub fn new(
        parent: Diagram,
        label: impl Into<String>,
        w: impl Fn(usize) -> Vec<Vertex> + Send + Sync + 'static,
        stationary: bool,
    ) -> Result<Self> {
        Self::build(parent, label.into(), Arc::new(w), WKind::Custom, stationary)
    }

    fn build(parent: Diagram, label: String, w: WFn, kind: WKind, stationary: bool) -> Result<Self> {
        let s = VertexSubdiagram { parent, w, kind, label, stationary };
        s.check_admissible()?;
        Ok(s)
    }

    /// The vertical odometer through `v`.
    pub fn singleton(parent: Diagram, v: Vertex) -> Result<Self> {
        Self::build(parent, format!("{{{}}}", v), Arc::new(move |_| vec![v]), WKind::Singleton(v), true)
    }

    /// `W_n = [lo_n, hi_n]`.
    pub fn intervals(
        parent: Diagram,
        label: impl Into<String>,
        f: impl Fn(usize) -> (Vertex, Vertex) + Send + Sync + 'static,
    ) -> Result<Self> {
        let w: WFn = Arc::new(move |n| {
            let (lo, hi) = f(n);
            (lo..=hi).collect()
        });
        Self::build(parent, label.into(), w, WKind::Intervals, false)
    }

    /// The whole of a diagram with finite levels.
    pub fn full(parent: Diagram) -> Result<Self> {
        let p = parent.clone();
        for n in 0..SAMPLE_LEVELS {
            if !p.vertex_set(n).is_finite() {
                return Err(Error::InvalidFamilyParams("full subdiagram needs finite levels".into()));
            }
        }
        let w: WFn = Arc::new(move |n| p.vertex_set(n).members().unwrap_or_default());
        Self::build(parent, "full".into(), w, WKind::Full, true)
    }

    /// `W_n(k) = [-k - Σ_{i<n} t_i, k + Σ_{i<n} t_i]` for a bounded-size parent.
    pub fn exhaustion(parent: Diagram, k: u64) -> Result<Self> {
        let b = parent.bounded_size().ok_or(Error::MissingBoundedSizeParams)?.clone();
        let p = parent.clone();
        let w: WFn = Arc::new(move |n| {
            let s: i64 = (0..n).map(|i| (b.t)(i) as i64).sum::<i64>() + k as i64;
            match p.vertex_set(n).clip(-s, s) {
                Some((lo, hi)) => (lo..=hi).collect(),
                None => Vec::new(),
            }
        });
        Self::build(parent, format!("W(k={})", k), w, WKind::Intervals, false)
    }

    fn check_admissible(&self) -> Result<()> {
        let levels = self.parent.depth().unwrap_or(SAMPLE_LEVELS).min(SAMPLE_LEVELS);
        for n in 0..=levels {
            let wn = self.w(n);
            if wn.is_empty() {
                return Err(Error::InvalidFamilyParams(format!("W_{} is empty", n)));
            }
            for &v in &wn {
                if !self.parent.vertex_set(n).contains(v) {
                    return Err(Error::VertexOutOfSet { level: n, vertex: v });
                }
            }
        }
        for n in 0..levels {
            let wn = self.w(n);
            let set: BTreeSet<Vertex> = wn.iter().copied().collect();
            let mut hit = BTreeSet::new();
            for v in self.w(n + 1) {
                for (w, _) in self.parent.row(n, v)? {
                    if set.contains(&w) {
                        hit.insert(w);
                    }
                }
            }
            if let Some(&w) = wn.iter().find(|w| !hit.contains(w)) {
                return Err(Error::NotAdmissible { level: n, vertex: w });
            }
        }
        Ok(())
    }

    pub fn parent(&self) -> &Diagram {
        &self.parent
    }

    pub fn kind(&self) -> &WKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    pub fn w(&self, n: usize) -> Vec<Vertex> {
        (self.w)(n)
    }

    pub fn contains(&self, n: usize, v: Vertex) -> bool {
        self.w(n).binary_search(&v).is_ok()
    }

    /// The finite set `{w ∉ W_n : f_{v,w}^{(n)} > 0 for some v ∈ W_{n+1}}`.
    pub fn reachable_complement(&self, n: usize) -> Result<BTreeSet<Vertex>> {
        let wn: BTreeSet<Vertex> = self.w(n).into_iter().collect();
        let mut out = BTreeSet::new();
        for v in self.w(n + 1) {
            for (w, _) in self.parent.row(n, v)? {
                if !wn.contains(&w) {
                    out.insert(w);
                }
            }
        }
        Ok(out)
    }
}

impl RowSource for VertexSubdiagram {
    fn source_row(&self, n: usize, v: Vertex) -> Result<Row> {
        let wn = self.w(n);
        Ok(self.parent.row(n, v)?.into_iter().filter(|(w, _)| wn.binary_search(w).is_ok()).collect())
    }
}

/// An edge subdiagram: the same vertices with `F̄_n <= F_n` entrywise.
#[derive(Clone)]
pub struct EdgeSubdiagram {
    parent: Diagram,
    sub: Diagram,
    trivial: bool,
}

impl core::fmt::Debug for EdgeSubdiagram {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "EdgeSubdiagram({} in {})", self.sub.name(), self.parent.name())
    }
}

impl EdgeSubdiagram {
    /// Checks `f̄ <= f` and that every vertex keeps an incoming edge, on a
    /// sampled window.
    pub fn new(parent: Diagram, sub: Diagram) -> Result<Self> {
        let mut trivial = true;
        for n in 0..SAMPLE_LEVELS.min(parent.depth().unwrap_or(SAMPLE_LEVELS)) {
            let Some((lo, hi)) = parent.vertex_set(n + 1).clip(-SAMPLE_RADIUS, SAMPLE_RADIUS) else {
                continue;
            };
            for v in lo..=hi {
                let full = parent.row(n, v)?;
                let kept = sub.row(n, v)?;
                if kept.is_empty() {
                    return Err(Error::InvalidFamilyParams(format!("vertex {} at level {} keeps no edges", v, n + 1)));
                }
                for &(w, c) in &kept {
                    let f = full.iter().find(|e| e.0 == w).map_or(0, |e| e.1);
                    if c > f {
                        return Err(Error::EntryExceedsParent { level: n, v, w });
                    }
                }
                if kept != full {
                    trivial = false;
                }
            }
        }
        Ok(EdgeSubdiagram { parent, sub, trivial })
    }

    pub fn parent(&self) -> &Diagram {
        &self.parent
    }

    pub fn sub(&self) -> &Diagram {
        &self.sub
    }

    /// Whether no removed edge was seen on the sampled window.
    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    /// Row `v` of `F'_n = F_n - F̄_n`.
    pub fn removed_row(&self, n: usize, v: Vertex) -> Result<Row> {
        let kept = self.sub.row(n, v)?;
        let mut out = Row::new();
        for (w, c) in self.parent.row(n, v)? {
            let k = kept.iter().find(|e| e.0 == w).map_or(0, |e| e.1);
            if c > k {
                out.push((w, c - k));
            }
        }
        Ok(out)
    }
}

impl RowSource for EdgeSubdiagram {
    fn source_row(&self, n: usize, v: Vertex) -> Result<Row> {
        self.sub.row(n, v)
    }
}

/// Per-level increments of an extension series together with its verdict.
#[derive(Clone, Debug)]
pub struct ExtensionReport {
    /// `R_{n+1} - R_n` for `n = 0, 1, ...` from the direct formula.
    pub increments: Vec<Q>,
    /// The same increments from the telescoping form, when available.
    pub telescoped: Option<Vec<Q>>,
    /// `1 + Σ_{j <= n}` increments.
    pub partial_sums: Vec<Q>,
    pub verdict: Verdict,
    /// Which criteria fired.
    pub criteria: Vec<String>,
    /// Per-vertex terms on a window, for levels whose sum is infinite.
    pub window_terms: Option<(usize, Vec<(Vertex, Q)>)>,
}

impl ExtensionReport {
    /// Whether both forms of the increments agree exactly.
    pub fn forms_agree(&self) -> bool {
        self.telescoped.as_ref().is_none_or(|t| *t == self.increments)
    }

    pub fn partial(&self) -> Q {
        self.partial_sums.last().cloned().unwrap_or_else(Q::one)
    }
}

fn cumulative(increments: &[Q]) -> Vec<Q> {
    crate::series::partial_sums(&Q::one(), increments)
}

type TailFn = Box<dyn Fn(usize) -> Option<f64>>;

/// Analytic knowledge about a series `Σ_n u_n`.
#[derive(Default)]
struct Analysis {
    /// Bound on `Σ_{n >= D} u_n` as a function of `D`.
    tail: Option<TailFn>,
    infinite: Option<Certificate>,
    tags: Vec<String>,
}

impl Analysis {
    fn finite_depth(depth: usize) -> Self {
        Analysis {
            tail: Some(Box::new(move |d| (d >= depth).then_some(0.0))),
            infinite: None,
            tags: vec![format!("finite diagram with {} levels", depth)],
        }
    }
}

/// Smallest `D` in `[depth, AUTO_DEPTH_CAP]` with a tail bound below `tol`.
fn resolve_depth(depth: usize, tol: f64, tail: &TailFn) -> Option<(usize, f64)> {
    (depth..=AUTO_DEPTH_CAP.max(depth)).find_map(|d| tail(d).filter(|b| *b < tol).map(|b| (d, b)))
}

fn product_excess(excess: &Monomial, d: usize) -> f64 {
    let mut p = 1.0f64;
    for i in 0..d {
        p = up(p * up(1.0 + excess.value(i).to_f64().unwrap_or(f64::INFINITY)));
    }
    p
}

/// Series with `u_n = e_n Π_{i<n} (1 + e_i)` or dominated by it:
/// `Σ_{n>=D} u_n <= Π_{i<D}(1 + e_i) · exp(T_D) · T_D` with `T_D >= Σ_{n>=D} e_n`.
fn excess_product_analysis(excess: Monomial, lower: Option<(Monomial, String)>, tag: &str) -> Analysis {
    let mut a = Analysis::default();
    a.tags.push(String::from(tag));
    if let Some((l, what)) = lower {
        if !l.summable() {
            a.infinite = Some(Certificate {
                kind: CertificateKind::Comparison,
                level: l.first_index(),
                detail: format!("increments are bounded below by {}, whose series diverges", what),
            });
            return a;
        }
    }
    if excess.summable() {
        a.tail = Some(Box::new(move |d| {
            let t = excess.tail_bound(d)?;
            Some(up(up(product_excess(&excess, d) * up(libm::exp(t))) * t))
        }));
    }
    a
}

fn odometer_base_seq(m: &MeasureSpec) -> Option<&Seq> {
    match m {
        MeasureSpec::OdometerProduct(o) if o.base == 0 => Some(&o.a),
        _ => None,
    }
}

fn analyze_vertex(sub: &VertexSubdiagram, m: &MeasureSpec) -> Analysis {
    if sub.kind == WKind::Full {
        let mut a = Analysis::finite_depth(0);
        a.tags = vec![String::from("trivial subdiagram: no vertex outside W")];
        return a;
    }
    if let Some(d) = sub.parent.depth() {
        return Analysis::finite_depth(d);
    }
    let single0 = sub.kind == WKind::Singleton(0);
    match (sub.parent.family(), odometer_base_seq(m)) {
        (Some(FamilySpec::Tridiagonal { a }), Some(oa)) if single0 && a == oa => {
            let e = Monomial::new(qi(2)).times(a, 0, -1);
            excess_product_analysis(e.clone(), Some((e, String::from("2/a_n"))), "tridiagonal odometer")
        }
        (Some(FamilySpec::FatOdometer { a, t }), Some(oa)) if single0 && a == oa => {
            let e = Monomial::new(qi(2)).times(t, 0, 1).times(a, 0, -1);
            let lower = t.is_nondecreasing().then(|| {
                (
                    Monomial::new(qi(2)).times(t, -1, 1).times(a, -1, -1).times(a, 0, -1),
                    String::from("2 t_{n-1}/(a_{n-1} a_n)"),
                )
            });
            excess_product_analysis(e, lower, "fat odometer, row sums a_n + 2 t_n")
        }
        (Some(FamilySpec::HalfLine { a }), Some(Seq::Constant(oa))) if single0 && a == oa => half_line_analysis(*a),
        _ => Analysis::default(),
    }
}

/// Increments `2^n / a^{n+1}` of the half-line example.
fn half_line_analysis(a: u64) -> Analysis {
    let mut an = Analysis::default();
    an.tags.push(String::from("half-line: increments 2^n / a^(n+1)"));
    if a >= 3 {
        let (af, r) = (a as f64, 2.0 / a as f64);
        an.tail = Some(Box::new(move |d| Some(up(libm::pow(r, d as f64) / af / (1.0 - r) * (1.0 + 1e-12)))));
    } else {
        an.infinite = Some(Certificate {
            kind: CertificateKind::TermsBoundedBelow,
            level: 0,
            detail: format!("increments 2^n/{}^(n+1) do not tend to zero", a),
        });
    }
    an
}

fn verdict_from(
    increments: &[Q],
    analysis: &Analysis,
    tail: Option<(usize, f64)>,
    depth: usize,
) -> (Verdict, Vec<String>) {
    let mut tags = analysis.tags.clone();
    if let Some(c) = &analysis.infinite {
        tags.push(String::from(c.kind.name()));
        return (Verdict::Infinite(c.clone()), tags);
    }
    let partial = Q::one() + increments.iter().sum::<Q>();
    match tail {
        Some((d, b)) => {
            tags.push(String::from("geometric tail bound"));
            (Verdict::Finite { partial, tail_bound: b, depth: d }, tags)
        }
        None => {
            (Verdict::Inconclusive { depth, note: String::from("no analytic tail bound below the tolerance") }, tags)
        }
    }
}

fn require_exact(m: &MeasureSpec) -> Result<()> {
    if m.is_exact() {
        Ok(())
    } else {
        Err(Error::ParamOutOfRange("extension series need an exact measure".into()))
    }
}

fn p_bar(m: &MeasureSpec, n: usize, v: Vertex) -> Q {
    m.p_exact(n, v).unwrap_or_else(Q::zero)
}

/// Increments from both the direct formula and the telescoping form.
pub fn vertex_increments(sub: &VertexSubdiagram, m: &MeasureSpec, depth: usize) -> Result<(Vec<Q>, Vec<Q>)> {
    require_exact(m)?;
    let ws: Vec<Vec<Vertex>> = (0..=depth).map(|n| sub.w(n)).collect();
    let mut outer: Vec<Vec<(Vertex, Vec<(Vertex, u64)>)>> = Vec::with_capacity(depth);
    let mut targets: Vec<BTreeSet<Vertex>> = ws.iter().map(|w| w.iter().copied().collect()).collect();
    for n in 0..depth {
        let mut lvl = Vec::new();
        for &v in &ws[n + 1] {
            let out: Vec<(Vertex, u64)> =
                sub.parent.row(n, v)?.into_iter().filter(|(w, _)| ws[n].binary_search(w).is_err()).collect();
            targets[n].extend(out.iter().map(|e| e.0));
            lvl.push((v, out));
        }
        outer.push(lvl);
    }
    let table = HeightTable::build(&sub.parent, &targets)?;
    let mut direct = Vec::with_capacity(depth);
    let mut tele = Vec::with_capacity(depth);
    let mut mass_prev: Q = ws[0].iter().map(|&w| p_bar(m, 0, w)).sum();
    for n in 0..depth {
        let mut s = Q::zero();
        for (v, out) in &outer[n] {
            let mut h = BigUint::zero();
            for &(w, c) in out {
                h += table.require(n, w)? * BigUint::from(c);
            }
            if !h.is_zero() {
                s += qb(&h) * p_bar(m, n + 1, *v);
            }
        }
        direct.push(s);
        let mut mass = Q::zero();
        for &v in &ws[n + 1] {
            mass += qb(table.require(n + 1, v)?) * p_bar(m, n + 1, v);
        }
        tele.push(&mass - &mass_prev);
        mass_prev = mass;
    }
    Ok((direct, tele))
}

/// `1 + Σ_n Σ_{v ∈ W_{n+1}} Σ_{w ∉ W_n} f_{v,w} H_w^{(n)} p̄_v^{(n+1)}` with
/// a verdict. The depth grows up to `AUTO_DEPTH_CAP` when an analytic tail
/// bound below `tol` is available further out.
pub fn vertex_extension_series(
    sub: &VertexSubdiagram,
    m: &MeasureSpec,
    depth: usize,
    tol: f64,
) -> Result<ExtensionReport> {
    require_exact(m)?;
    let analysis = analyze_vertex(sub, m);
    let tail = match (&analysis.infinite, &analysis.tail) {
        (None, Some(t)) => resolve_depth(depth, tol, t),
        _ => None,
    };
    let mut d = tail.map_or(depth, |t| t.0);
    if let Some(pd) = sub.parent.depth() {
        d = d.min(pd);
    }
    let (increments, telescoped) = vertex_increments(sub, m, d)?;
    let (verdict, criteria) = verdict_from(&increments, &analysis, tail, d);
    Ok(ExtensionReport {
        partial_sums: cumulative(&increments),
        increments,
        telescoped: Some(telescoped),
        verdict,
        criteria,
        window_terms: None,
    })
}

/// Whether `b_i = a_i` for all `i >= E`, with the smallest such `E` that is
/// visible from the descriptors.
fn eventually_equal(b: &Seq, a: &Seq) -> Option<usize> {
    if b == a {
        return Some(0);
    }
    match (b, a) {
        (Seq::List { values, tail }, other) | (other, Seq::List { values, tail })
            if matches!(other, Seq::Constant(_)) && **tail == *other =>
        {
            Some(values.len())
        }
        (Seq::List { values: v1, tail: t1 }, Seq::List { values: v2, tail: t2 })
            if v1.len() == v2.len() && t1 == t2 =>
        {
            Some(v1.len())
        }
        _ => None,
    }
}

/// `b - a` as a descriptor for descriptors of the same shape.
fn seq_excess(b: &Seq, a: &Seq) -> Option<Seq> {
    match (b, a) {
        (Seq::Constant(x), Seq::Constant(y)) if x > y => Some(Seq::Constant(x - y)),
        (Seq::Geometric { c: c1, rho: r1 }, Seq::Geometric { c: c2, rho: r2 }) if r1 == r2 && c1 > c2 => {
            Some(Seq::Geometric { c: c1 - c2, rho: *r1 })
        }
        _ => None,
    }
}

fn analyze_edge(sub: &EdgeSubdiagram, m: &MeasureSpec) -> Analysis {
    if let Some(d) = sub.parent.depth() {
        return Analysis::finite_depth(d);
    }
    match (sub.parent.family(), sub.sub.family(), odometer_base_seq(m)) {
        (Some(FamilySpec::Odometer { a: b }), Some(FamilySpec::Odometer { a }), Some(oa)) if a == oa => {
            if let Some(e) = eventually_equal(b, a) {
                let mut an = Analysis::finite_depth(e);
                an.tags = vec![format!("odometer pair: b_n = a_n for n >= {}", e)];
                return an;
            }
            match seq_excess(b, a) {
                Some(d) => {
                    let e = Monomial::new(Q::one()).times(&d, 0, 1).times(a, 0, -1);
                    excess_product_analysis(
                        e.clone(),
                        Some((e, String::from("(b_n - a_n)/a_n"))),
                        "odometer pair: increments Π(b/a)_{<=n} - Π(b/a)_{<n}",
                    )
                }
                None => Analysis::default(),
            }
        }
        _ => Analysis::default(),
    }
}

/// `(r_v - r̄_v) ξ_v / (σ λ)` at level 0 of the edge example: for `v >= 1`
/// this is `(1 - 2^{-v}) / σ`, bounded below by `1/(2σ)`.
fn edge_example_certificate(sub: &EdgeSubdiagram, m: &MeasureSpec) -> Option<Certificate> {
    let (Some(FamilySpec::EdgeExample), Some(FamilySpec::EdgeExampleSub)) = (sub.parent.family(), sub.sub.family())
    else {
        return None;
    };
    let MeasureSpec::StationaryEigen(e) = m else { return None };
    let reference = crate::perron::edge_example_eigen();
    if e.lambda.exact() != reference.lambda.exact() {
        return None;
    }
    for v in -SAMPLE_RADIUS..=SAMPLE_RADIUS {
        if e.xi_exact(v) != reference.xi_exact(v) {
            return None;
        }
    }
    let sigma = e.sigma.as_ref()?.exact()?.clone();
    let bound = if e.probability { Q::new(1.into(), 2.into()) / sigma } else { Q::new(1.into(), 2.into()) };
    Some(Certificate {
        kind: CertificateKind::LevelDivergence,
        level: 0,
        detail: format!("every term with v >= 1 of the level-0 sum is at least {}", bound),
    })
}

/// Terms `Σ_w f'_{v,w} H_w^{(n)} p̄_v^{(n+1)}` for `v` in a window of `V_{n+1}`.
pub fn edge_level_terms(
    sub: &EdgeSubdiagram,
    m: &MeasureSpec,
    n: usize,
    window: (Vertex, Vertex),
) -> Result<Vec<(Vertex, Q)>> {
    require_exact(m)?;
    let Some((lo, hi)) = sub.parent.vertex_set(n + 1).clip(window.0, window.1) else {
        return Ok(Vec::new());
    };
    let mut rows = Vec::new();
    let mut targets = vec![BTreeSet::new(); n + 1];
    for v in lo..=hi {
        let r = sub.removed_row(n, v)?;
        targets[n].extend(r.iter().map(|e| e.0));
        rows.push((v, r));
    }
    let table = HeightTable::build(&sub.parent, &targets)?;
    let mut out = Vec::new();
    for (v, r) in rows {
        let mut h = BigUint::zero();
        for (w, c) in r {
            h += table.require(n, w)? * BigUint::from(c);
        }
        out.push((v, qb(&h) * p_bar(m, n + 1, v)));
    }
    Ok(out)
}

/// Terms `H_v^{(n)} p_v^{(n)}` (tower measures) on a window of `V_n`.
pub fn tower_terms<R: RowSource + ?Sized>(
    r: &R,
    sets: &Diagram,
    m: &MeasureSpec,
    n: usize,
    window: (Vertex, Vertex),
) -> Result<Vec<(Vertex, Q)>> {
    require_exact(m)?;
    let Some((lo, hi)) = sets.vertex_set(n).clip(window.0, window.1) else {
        return Ok(Vec::new());
    };
    let vs: Vec<Vertex> = (lo..=hi).collect();
    let table = HeightTable::for_level(r, n, &vs)?;
    vs.iter().map(|&v| Ok((v, qb(table.require(n, v)?) * p_bar(m, n, v)))).collect()
}

/// `1 + Σ_n Σ_v Σ_w f'_{v,w} H_w^{(n)} p̄_v^{(n+1)}` for an edge subdiagram.
///
/// Levels with infinitely many vertices are summed only when a certificate
/// settles them; otherwise their terms are reported on a window.
pub fn edge_extension_series(sub: &EdgeSubdiagram, m: &MeasureSpec, depth: usize, tol: f64) -> Result<ExtensionReport> {
    require_exact(m)?;
    if let Some(c) = edge_example_certificate(sub, m) {
        let terms = edge_level_terms(sub, m, 0, (-SAMPLE_RADIUS, SAMPLE_RADIUS))?;
        return Ok(ExtensionReport {
            increments: Vec::new(),
            telescoped: None,
            partial_sums: vec![Q::one()],
            criteria: vec![String::from("edge example"), String::from(c.kind.name())],
            verdict: Verdict::Infinite(c),
            window_terms: Some((0, terms)),
        });
    }
    let finite_levels = (0..=depth.min(SAMPLE_LEVELS)).all(|n| sub.parent.vertex_set(n).is_finite());
    if !finite_levels {
        let terms = edge_level_terms(sub, m, 0, (-SAMPLE_RADIUS, SAMPLE_RADIUS))?;
        return Ok(ExtensionReport {
            increments: Vec::new(),
            telescoped: None,
            partial_sums: vec![Q::one()],
            criteria: vec![String::from("unknown tail of a level sum")],
            verdict: Verdict::Inconclusive {
                depth: 0,
                note: String::from("a level sum runs over infinitely many vertices without a closed form"),
            },
            window_terms: Some((0, terms)),
        });
    }
    let analysis = analyze_edge(sub, m);
    let tail = match (&analysis.infinite, &analysis.tail) {
        (None, Some(t)) => resolve_depth(depth, tol, t),
        _ => None,
    };
    let mut d = tail.map_or(depth, |t| t.0);
    if let Some(pd) = sub.parent.depth() {
        d = d.min(pd);
    }
    let (increments, telescoped) = edge_increments(sub, m, d)?;
    let (verdict, criteria) = verdict_from(&increments, &analysis, tail, d);
    Ok(ExtensionReport {
        partial_sums: cumulative(&increments),
        increments,
        telescoped: Some(telescoped),
        verdict,
        criteria,
        window_terms: None,
    })
}

/// Edge increments on a parent with finite levels, directly and as
/// `R_{n+1} - R_n` with `R_n = Σ_w (H_w - H̄_w) p̄_w`.
pub fn edge_increments(sub: &EdgeSubdiagram, m: &MeasureSpec, depth: usize) -> Result<(Vec<Q>, Vec<Q>)> {
    let members = |n: usize| -> Result<Vec<Vertex>> {
        sub.parent.vertex_set(n).members().ok_or_else(|| Error::InvalidFamilyParams(format!("level {} is infinite", n)))
    };
    let mut targets = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        targets.push(members(n)?.into_iter().collect::<BTreeSet<_>>());
    }
    let h = HeightTable::build(&sub.parent, &targets)?;
    let hb = HeightTable::build(sub, &targets)?;
    let r_of = |n: usize| -> Result<Q> {
        let mut s = Q::zero();
        for &w in &targets[n] {
            let hp = h.require(n, w)?;
            let hs = hb.get(n, w).cloned().unwrap_or_default();
            s += qb(&(hp - hs)) * p_bar(m, n, w);
        }
        Ok(s)
    };
    let mut direct = Vec::with_capacity(depth);
    let mut tele = Vec::with_capacity(depth);
    let mut r_prev = r_of(0)?;
    for n in 0..depth {
        let mut s = Q::zero();
        for &v in &targets[n + 1] {
            let mut acc = BigUint::zero();
            for (w, c) in sub.removed_row(n, v)? {
                acc += h.require(n, w)? * BigUint::from(c);
            }
            s += qb(&acc) * p_bar(m, n + 1, v);
        }
        direct.push(s);
        let r = r_of(n + 1)?;
        tele.push(&r - &r_prev);
        r_prev = r;
    }
    Ok((direct, tele))
}

/// Outcome of the stochastic sufficient condition.
#[derive(Clone, Debug)]
pub struct StochasticReport {
    /// `ε_n = sup_{v ∈ W_{n+1}} Σ_{w ∉ W_n} q_{v,w}^{(n)}`.
    pub eps: Vec<Q>,
    /// `M_1 = max_{w ∈ W_1} H_w^{(1)} / H̄_w^{(1)}`.
    pub m1: Q,
    pub verdict: Verdict,
    /// `1 + M Σ ε_n` with `M = M_1 / Π_{i>=1} (1 - ε_i)`, when finite.
    pub bound: Option<f64>,
}

fn eps_sequence(sub: &VertexSubdiagram, depth: usize) -> Result<(Vec<Q>, Q)> {
    let ws: Vec<Vec<Vertex>> = (0..=depth.max(1)).map(|n| sub.w(n)).collect();
    let mut targets: Vec<BTreeSet<Vertex>> = ws.iter().map(|w| w.iter().copied().collect()).collect();
    let mut rows = Vec::new();
    for n in 0..depth {
        let mut lvl = Vec::new();
        for &v in &ws[n + 1] {
            let r = sub.parent.row(n, v)?;
            targets[n].extend(r.iter().map(|e| e.0));
            lvl.push((v, r));
        }
        rows.push(lvl);
    }
    let h = HeightTable::build(&sub.parent, &targets)?;
    let mut eps = Vec::with_capacity(depth);
    for n in 0..depth {
        let mut best = Q::zero();
        for (v, r) in &rows[n] {
            let mut out = BigUint::zero();
            for &(w, c) in r {
                if ws[n].binary_search(&w).is_err() {
                    out += h.require(n, w)? * BigUint::from(c);
                }
            }
            let q = qb(&out) / qb(h.require(n + 1, *v)?);
            if q > best {
                best = q;
            }
        }
        eps.push(best);
    }
    let m1 = heights_ratio(sub, 1)?;
    Ok((eps, m1))
}

/// `max_{w ∈ W_n} H_w^{(n)} / H̄_w^{(n)}`.
pub fn heights_ratio(sub: &VertexSubdiagram, n: usize) -> Result<Q> {
    let wn = sub.w(n);
    let h = HeightTable::for_level(&sub.parent, n, &wn)?;
    let hb = HeightTable::for_level(sub, n, &wn)?;
    let mut best = Q::zero();
    for &w in &wn {
        let r = qb(h.require(n, w)?) / qb(hb.require(n, w)?);
        if r > best {
            best = r;
        }
    }
    Ok(best)
}

/// Tests `Σ_n ε_n < ∞` and, when it holds, the resulting bound on the
/// extension of any probability measure on the subdiagram.
pub fn stochastic_sufficient_condition(sub: &VertexSubdiagram, depth: usize, tol: f64) -> Result<StochasticReport> {
    let mut tail_fn: Option<TailFn> = None;
    let mut note = String::from("no analytic bound on Σ ε_n");
    if let Some(pd) = sub.parent.depth() {
        tail_fn = Some(Box::new(move |d| (d >= pd).then_some(0.0)));
    } else if sub.kind == WKind::Full {
        tail_fn = Some(Box::new(|_| Some(0.0)));
    } else if let (Some(FamilySpec::Tridiagonal { a }), WKind::Singleton(0)) = (sub.parent.family(), &sub.kind) {
        let e = Monomial::new(qi(2)).times(a, 0, -1);
        if e.summable() {
            tail_fn = Some(Box::new(move |d| e.tail_bound(d)));
        } else {
            note = String::from("ε_n = 2/(a_n+2) is not summable: the sufficient condition fails");
        }
    }
    let resolved = tail_fn.as_ref().and_then(|t| resolve_depth(depth, tol, t));
    let mut d = resolved.map_or(depth, |r| r.0);
    if let Some(pd) = sub.parent.depth() {
        d = d.min(pd);
    }
    let (eps, m1) = eps_sequence(sub, d)?;
    let Some((_, tail)) = resolved else {
        return Ok(StochasticReport { eps, m1, verdict: Verdict::Inconclusive { depth: d, note }, bound: None });
    };
    let partial: Q = eps.iter().sum();
    let mut prod = 1.0f64;
    for e in eps.iter().skip(1) {
        let x = e.to_f64().unwrap_or(1.0);
        prod = (prod * (1.0 - x).next_down()).next_down();
    }
    prod = (prod * (1.0 - tail).next_down()).next_down();
    let bound = if prod > 0.0 {
        let m = up(m1.to_f64().unwrap_or(f64::INFINITY).next_up() / prod);
        Some(up(1.0 + up(m * up(partial.to_f64().unwrap_or(f64::INFINITY).next_up() + tail))))
    } else {
        None
    };
    Ok(StochasticReport { eps, m1, verdict: Verdict::Finite { partial, tail_bound: tail, depth: d }, bound })
}

/// Outcome of the test `H̄_w^{(n)} / H_w^{(n)} < ε` for all `w ∈ W_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct NullityReport {
    /// The hypothesis holds at some level within the depth.
    pub holds: bool,
    pub level: Option<usize>,
    /// `max_w H̄_w^{(n)} / H_w^{(n)}` per level.
    pub ratios: Vec<Q>,
    /// `Σ_{w ∈ W_n} H̄_w^{(n)} p_w^{(n)}`, an upper bound for `μ(X_B̄)`, at the witness level.
    pub mass_bound: Option<Q>,
}

pub fn nullity_check(m: &MeasureSpec, sub: &VertexSubdiagram, eps: &Q, depth: usize) -> Result<NullityReport> {
    let targets: Vec<BTreeSet<Vertex>> = (0..=depth).map(|n| sub.w(n).into_iter().collect()).collect();
    let h = HeightTable::build(&sub.parent, &targets)?;
    let hb = HeightTable::build(sub, &targets)?;
    let mut ratios = Vec::with_capacity(depth + 1);
    let mut found = None;
    for (n, wn) in targets.iter().enumerate() {
        let mut best = Q::zero();
        for &w in wn {
            let r = qb(hb.require(n, w)?) / qb(h.require(n, w)?);
            if r > best {
                best = r;
            }
        }
        if found.is_none() && best < *eps {
            found = Some(n);
        }
        ratios.push(best);
    }
    let mass_bound = match (found, m.is_exact()) {
        (Some(n), true) => {
            let mut s = Q::zero();
            for &w in &targets[n] {
                s += qb(hb.require(n, w)?) * p_bar(m, n, w);
            }
            Some(s)
        }
        _ => None,
    };
    Ok(NullityReport { holds: found.is_some(), level: found, ratios, mass_bound })
}

/// Caller-supplied analytic data for a simple subdiagram: a majorant of
/// `α_n / α_{n-1} - 1` and a bound on `M'_n / m'_n`, both checked on the
/// computed levels.
#[derive(Clone, Debug)]
pub struct SimpleHint {
    pub excess: Monomial,
    pub ratio_bound: Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimpleVerdict {
    /// `M'/m'` bounded and `lim α_n` exists: every extension is finite.
    FiniteSufficient,
    /// `m'/M'` bounded below and `β_n` diverges: extensions are infinite.
    NecessaryViolated,
    Undetermined,
}

#[derive(Clone, Debug)]
pub struct SimpleBounds {
    pub row_sums: Vec<u64>,
    pub sizes: Vec<usize>,
    /// `(m̄_n, M̄_n)` over `W_{n+1} × W_n`.
    pub inner: Vec<(u64, u64)>,
    /// `(m'_n, M'_n)` over `W_{n+1} × W'_n` (reachable part), if nonempty.
    pub outer: Vec<Option<(u64, u64)>>,
    pub alpha: Vec<Q>,
    pub beta: Vec<Q>,
    pub verdict: SimpleVerdict,
    pub note: String,
}

pub fn simple_subdiagram_bounds(
    sub: &VertexSubdiagram,
    depth: usize,
    hint: Option<&SimpleHint>,
) -> Result<SimpleBounds> {
    let mut out = SimpleBounds {
        row_sums: Vec::new(),
        sizes: Vec::new(),
        inner: Vec::new(),
        outer: Vec::new(),
        alpha: Vec::new(),
        beta: Vec::new(),
        verdict: SimpleVerdict::Undetermined,
        note: String::new(),
    };
    let (mut alpha, mut beta) = (Q::one(), Q::one());
    for n in 0..depth {
        let wn = sub.w(n);
        let wn1 = sub.w(n + 1);
        let lo = wn1[0] - SAMPLE_RADIUS;
        let hi = wn1[wn1.len() - 1] + SAMPLE_RADIUS;
        let r = sub.parent.check_row_sums(n, (lo, hi))?.ok_or(Error::NotErs(n))?;
        let (mut mi, mut ma) = (u64::MAX, 0u64);
        let (mut mo, mut mao) = (u64::MAX, 0u64);
        for &v in &wn1 {
            let row: BTreeMap<Vertex, u64> = sub.parent.row(n, v)?.into_iter().collect();
            for w in &wn {
                let f = row.get(w).copied().unwrap_or(0);
                if f == 0 {
                    return Err(Error::NotSimple(n));
                }
                mi = mi.min(f);
                ma = ma.max(f);
            }
            for (w, &f) in &row {
                if wn.binary_search(w).is_err() {
                    mo = mo.min(f);
                    mao = mao.max(f);
                }
            }
        }
        let size = wn.len() as u64;
        alpha *= Q::new(BigInt::from(r), BigInt::from(mi * size));
        beta *= Q::new(BigInt::from(r), BigInt::from(ma * size));
        out.row_sums.push(r);
        out.sizes.push(wn.len());
        out.inner.push((mi, ma));
        out.outer.push((mao > 0).then_some((mo, mao)));
        out.alpha.push(alpha.clone());
        out.beta.push(beta.clone());
    }
    if sub.kind == WKind::Full {
        out.verdict = SimpleVerdict::FiniteSufficient;
        out.note = String::from("trivial subdiagram: W'_n is empty, the extension equals 1");
        return Ok(out);
    }
    if let (Some(FamilySpec::Tridiagonal { a }), WKind::Singleton(0)) = (sub.parent.family(), &sub.kind) {
        let e = Monomial::new(qi(2)).times(a, 0, -1);
        if e.summable() {
            out.verdict = SimpleVerdict::FiniteSufficient;
            out.note = String::from("α_n = β_n = Π (1 + 2/a_i) converges and M'_n = m'_n = 1");
        } else {
            out.verdict = SimpleVerdict::NecessaryViolated;
            out.note = String::from("β_n = Π (1 + 2/a_i) diverges while m'_n / M'_n = 1");
        }
        return Ok(out);
    }
    if let Some(h) = hint {
        for n in 0..out.alpha.len() {
            let prev = if n == 0 { Q::one() } else { out.alpha[n - 1].clone() };
            if n >= h.excess.first_index() && &out.alpha[n] / prev - Q::one() > h.excess.value(n) {
                return Err(Error::ParamOutOfRange(format!("α ratio exceeds the hint at level {}", n)));
            }
            if let Some((mo, mao)) = out.outer[n] {
                if Q::new(BigInt::from(mao), BigInt::from(mo)) > h.ratio_bound {
                    return Err(Error::ParamOutOfRange(format!("M'/m' exceeds the hint at level {}", n)));
                }
            }
        }
        if h.excess.summable() {
            out.verdict = SimpleVerdict::FiniteSufficient;
            out.note = String::from("α_n converges by a summable majorant and M'/m' is bounded");
        } else {
            out.note = String::from("majorant of α_n / α_{n-1} - 1 is not summable");
        }
        return Ok(out);
    }
    out.note = String::from("no analytic description of α_n");
    Ok(out)
}

/// Ratio tests and the equal-row-sum test for a stationary subdiagram with
/// an eigen measure.
#[derive(Clone, Debug)]
pub struct StationaryTestReport {
    /// `α_n = Σ_{w ∈ W'_n} H_w^{(n)}` over the reachable part.
    pub alpha: Vec<BigUint>,
    /// `(m'_n, M'_n)`.
    pub outer: Vec<Option<(u64, u64)>>,
    /// `α_{n+1} M'_{n+1} / (α_n M'_n)`.
    pub ratios: Vec<f64>,
    pub report: ExtensionReport,
}

pub fn stationary_sub_tests(
    sub: &VertexSubdiagram,
    e: &EigenSpec,
    depth: usize,
    tol: f64,
) -> Result<StationaryTestReport> {
    if !sub.is_stationary() {
        return Err(Error::InvalidFamilyParams("subdiagram is not stationary".into()));
    }
    let lambda = e.lambda.exact().ok_or_else(|| Error::ParamOutOfRange("eigenvalue must be exact".into()))?.clone();
    let m = MeasureSpec::StationaryEigen(if e.probability { e.clone() } else { e.clone().normalized()? });
    require_exact(&m)?;
    let ws: Vec<Vec<Vertex>> = (0..=depth).map(|n| sub.w(n)).collect();
    let mut targets: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); depth + 1];
    let mut outer = Vec::new();
    for n in 0..depth {
        let (mut mo, mut mao) = (u64::MAX, 0u64);
        for &v in &ws[n + 1] {
            for (w, f) in sub.parent.row(n, v)? {
                if ws[n].binary_search(&w).is_err() {
                    targets[n].insert(w);
                    mo = mo.min(f);
                    mao = mao.max(f);
                }
            }
        }
        outer.push((mao > 0).then_some((mo, mao)));
    }
    let h = HeightTable::build(&sub.parent, &targets)?;
    let mut alpha = Vec::with_capacity(depth);
    for (n, t) in targets.iter().enumerate().take(depth) {
        let mut s = BigUint::zero();
        for &w in t {
            s += h.require(n, w)?;
        }
        alpha.push(s);
    }
    let ratios: Vec<f64> = (1..depth)
        .map(|n| {
            let num = alpha[n].to_f64().unwrap_or(f64::INFINITY) * outer[n].map_or(0.0, |o| o.1 as f64);
            let den = alpha[n - 1].to_f64().unwrap_or(f64::INFINITY) * outer[n - 1].map_or(0.0, |o| o.1 as f64);
            num / den
        })
        .collect();

    let mut analysis = Analysis::default();
    let first = ws[0].first().copied().unwrap_or(0);
    let lam_f = lambda.to_f64().unwrap_or(f64::NAN);
    let parent_ers = if !sub.parent.flags().stationary {
        None
    } else {
        sub.parent.check_row_sums(0, (first - 2 * SAMPLE_RADIUS, first + 2 * SAMPLE_RADIUS)).ok().flatten()
    };
    if let Some(FamilySpec::HalfLine { a }) = sub.parent.family() {
        if sub.kind == WKind::Singleton(0) && lambda == qi(*a) {
            analysis = half_line_analysis(*a);
            if *a >= 3 {
                analysis.tags.push(format!(
                    "ratio test: α_(n+1) M'_(n+1) = 2 α_n M'_n < (λ - ε) α_n M'_n, ε = {}",
                    (*a as f64 - 2.0) / 2.0
                ));
            } else if *a == 1 {
                analysis.infinite = Some(Certificate {
                    kind: CertificateKind::RatioTest,
                    level: 0,
                    detail: String::from("α_(n+1) m'_(n+1) = 2 α_n m'_n > (λ + 1/2) α_n m'_n"),
                });
            }
        }
    } else if let Some(r) = parent_ers {
        if qi(r) > lambda && outer.first().copied().flatten().is_some() {
            analysis.infinite = Some(Certificate {
                kind: CertificateKind::PerronBelowRowSums,
                level: 0,
                detail: format!("equal row sums r = {} exceed λ = {}: terms grow like (r/λ)^n", r, lambda),
            });
            analysis.tags.push(String::from("equal row sums above the Perron value"));
        }
    }
    if analysis.tail.is_none() && analysis.infinite.is_none() {
        analysis.tags.push(format!("ratio test inconclusive against λ = {}", lam_f));
    }
    let tail = match (&analysis.infinite, &analysis.tail) {
        (None, Some(t)) => resolve_depth(depth, tol, t),
        _ => None,
    };
    let d = tail.map_or(depth, |t| t.0);
    let (increments, telescoped) = vertex_increments(sub, &m, d)?;
    let (verdict, criteria) = verdict_from(&increments, &analysis, tail, d);
    Ok(StationaryTestReport {
        alpha,
        outer,
        ratios,
        report: ExtensionReport {
            partial_sums: cumulative(&increments),
            increments,
            telescoped: Some(telescoped),
            verdict,
            criteria,
            window_terms: None,
        },
    })
}

/// Extension from the `a_n`-odometer through the zero vertices of the fat
/// odometer diagram.
pub fn fat_odometer_extension(a: &Seq, t: &Seq, depth: usize, tol: f64) -> Result<ExtensionReport> {
    let d = crate::diagram::build_family(&FamilySpec::FatOdometer { a: a.clone(), t: t.clone() })?;
    let sub = VertexSubdiagram::singleton(d, 0)?;
    vertex_extension_series(&sub, &MeasureSpec::odometer(a.clone(), 0), depth, tol)
}

/// Heights of the intermediate diagram `B'` and the extension of the
/// odometer measure inside it.
#[derive(Clone, Debug)]
pub struct StepwiseReport {
    /// `h_0^{(n)}` for `n = 0..=depth`.
    pub h0: Vec<BigUint>,
    /// `k^{(n)}` for `n = 0..=depth` (`k^{(0)} = 1`).
    pub k: Vec<BigUint>,
    /// Terms `t_{n-1} k^{(n)} / (a_0 ⋯ a_n)` for `n = 1..=depth`.
    pub report: ExtensionReport,
    /// An infinite extension inside `B'` forces an infinite extension to `B`.
    pub infinite_in_full: bool,
}

/// Exact heights in `B'` (with `W_0 = {0}`, `W_n = [0, t_{n-1}]`) and the
/// series `1 + Σ_{n>=1} t_{n-1} k^{(n)} / (a_0 ⋯ a_n)`.
pub fn stepwise_chain(a: &Seq, t: &Seq, depth: usize, tol: f64) -> Result<StepwiseReport> {
    a.validate_positive()?;
    t.validate_positive()?;
    let lower = Monomial::new(Q::one()).times(t, -1, 1).times(a, -1, -1).times(a, 0, -1);
    let mut criteria = Vec::new();
    let infinite = (!lower.summable()).then(|| Certificate {
        kind: CertificateKind::Comparison,
        level: 1,
        detail: String::from("terms are at least t_{n-1}/(a_{n-1} a_n), whose series diverges"),
    });
    let a_tail = Monomial::new(Q::one()).times(a, 0, -1);
    let y = Monomial::new(Q::one()).times(t, 0, 1).times(a, 0, -1);
    let y_sup = |d: usize| -> Option<f64> {
        if y.ratio_sup(d) <= 1.0 {
            return y.value(d).to_f64().map(up);
        }
        if a.is_nondecreasing() {
            return Some(up(t.sup_from(d)? as f64 / a.at_f64(d)));
        }
        None
    };

    let mut h0 = vec![BigUint::one()];
    let mut k = vec![BigUint::one()];
    let mut terms: Vec<Q> = Vec::new();
    let mut prod = BigUint::one();
    let mut g = Q::one();
    let mut found: Option<(usize, f64)> = None;
    let cap = if infinite.is_some() { depth } else { AUTO_DEPTH_CAP.max(depth) };
    let mut n = 1usize;
    while n <= cap {
        let (hn, kn) = if n == 1 {
            (a.at(0), BigUint::one())
        } else {
            let tn2 = t.at(n - 2);
            (a.at(n - 1) * &h0[n - 1] + &tn2 * &k[n - 1], &h0[n - 1] + &tn2 * &k[n - 1])
        };
        prod *= a.at(n - 1);
        let z = Q::new(BigInt::from(t.at(n - 1) * &kn), BigInt::from(prod.clone()));
        h0.push(hn);
        k.push(kn);
        let term = &z / a.at_q(n);
        g += &term;
        terms.push(term);
        if n >= depth && infinite.is_none() && found.is_none() {
            // g here is g_{n+1}; the bound uses g_n = g_{n+1} - term_n.
            let g_n = &g - terms.last().unwrap();
            if let (Some(yb), Some(ad), Some(s)) = (y_sup(n), a_tail.tail_bound(n), lower.tail_bound(n + 1)) {
                let den = 1.0 - yb - yb * ad;
                if den > 0.0 {
                    let zf = z.to_f64().unwrap_or(f64::INFINITY).next_up();
                    let gf = g_n.to_f64().unwrap_or(f64::INFINITY).next_up();
                    let zhat = zf.max(up(up(yb * gf) / den.next_down()));
                    let ghat = up(gf + up(zhat * ad));
                    let b = up(up(ghat + zhat) * s);
                    if b < tol {
                        found = Some((n, b));
                        break;
                    }
                }
            }
        }
        if infinite.is_some() && n >= depth {
            break;
        }
        n += 1;
    }
    let verdict = if let Some(c) = infinite {
        criteria.push(String::from(c.kind.name()));
        Verdict::Infinite(c)
    } else if let Some((d, b)) = found {
        criteria.push(String::from("dominated tail: t_{n-1}/(a_{n-1} a_n) summable"));
        Verdict::Finite { partial: Q::one() + terms.iter().sum::<Q>(), tail_bound: b, depth: d }
    } else {
        Verdict::Inconclusive { depth: terms.len(), note: String::from("no tail bound below the tolerance") }
    };
    let infinite_in_full = verdict.is_infinite();
    Ok(StepwiseReport {
        h0,
        k,
        report: ExtensionReport {
            partial_sums: cumulative(&terms),
            increments: terms,
            telescoped: None,
            verdict,
            criteria,
            window_terms: None,
        },
        infinite_in_full,
    })
}

/// Cylinder values of the extension of the odometer measure on a singleton
/// `{v0}`, restricted to paths that stay at `v0` from level `horizon` on and
/// normalized to a probability measure.
pub fn horizon_extension_measure(d: &Diagram, v0: Vertex, horizon: usize) -> Result<MeasureSpec> {
    let mut counts: Vec<BTreeMap<Vertex, BigUint>> = vec![BTreeMap::new(); horizon + 1];
    counts[horizon].insert(v0, BigUint::one());
    for n in (0..horizon).rev() {
        let mut cur = BTreeMap::new();
        for (&v, c) in &counts[n + 1] {
            for (w, f) in d.row(n, v)? {
                *cur.entry(w).or_insert_with(BigUint::zero) += c * BigUint::from(f);
            }
        }
        counts[n] = cur;
    }
    let loops: Vec<u64> = (0..=horizon).map(|n| d.entry(n, v0, v0)).collect::<Result<_>>()?;
    if loops.iter().any(|&x| x == 0) {
        return Err(Error::InvalidFamilyParams(format!("vertex {} carries no odometer", v0)));
    }
    let mut den = BigUint::one();
    for &x in loops.iter().take(horizon) {
        den *= BigUint::from(x);
    }
    // Σ_w H_w^{(0)} p_w^{(0)} before normalization.
    let raw_mass: BigUint = counts[0].values().sum();
    let mass = Q::new(BigInt::from(raw_mass.clone()), BigInt::from(den.clone()));
    let counts = Arc::new(counts);
    let d2 = d.clone();
    let p = move |n: usize, w: Vertex| -> Q {
        if n <= horizon {
            let c = counts[n].get(&w).cloned().unwrap_or_default();
            return Q::new(BigInt::from(c), BigInt::from(raw_mass.clone()));
        }
        if w != v0 {
            return Q::zero();
        }
        let mut extra = BigUint::one();
        for i in horizon..n {
            extra *= BigUint::from(d2.entry(i, v0, v0).unwrap_or(1));
        }
        Q::new(BigInt::one(), BigInt::from(extra * &raw_mass))
    };
    Ok(MeasureSpec::PVectors(
        PVectors::new(format!("horizon-{} extension from {{{}}}", horizon, v0), d.vertex_set(0), p).with_mass(mass),
    ))
}

/// One added edge: a parallel copy of an existing edge from `source ∈ V_{level}`
/// to `range ∈ V_{level+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AddedEdge {
    pub level: usize,
    pub source: Vertex,
    pub range: Vertex,
    /// `l`: the tower over `range` has measure below `2^{-l}`.
    pub index: u32,
    pub tower_measure: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentPlan {
    pub edges: Vec<AddedEdge>,
    /// `1 + Σ` tower measures of the ranges.
    pub bound: Q,
    /// `Σ_{k=0}^{L} 2^{-k}` with `L` the number of added edges.
    pub cap: Q,
    /// Upper cones of the ranges are pairwise disjoint.
    pub cones_disjoint: bool,
}

/// Greedy choice of added edges whose range towers have measure below
/// `2^{-l}` and pairwise disjoint upper cones. Step `s = 1..=budget` adds one
/// edge into each of the levels `1..=s`.
pub fn augment_edges_finite(d: &Diagram, m: &MeasureSpec, budget: usize, search_limit: i64) -> Result<AugmentPlan> {
    require_exact(m)?;
    let b = d.bounded_size().ok_or(Error::MissingBoundedSizeParams)?.clone();
    let reach = |n: usize| -> i64 { (0..n).map(|i| (b.t)(i) as i64).sum() };
    let mut edges = Vec::new();
    let mut cones: Vec<(Vertex, Vertex)> = Vec::new();
    let mut frontier: Option<Vertex> = None;
    let mut l = 0u32;
    for s in 1..=budget {
        for n in 1..=s {
            l += 1;
            let threshold = Q::new(BigInt::one(), BigInt::one() << l as usize);
            let r = reach(n);
            let start = match frontier {
                Some(f) => f + r + 1,
                None => d.vertex_set(n).first().unwrap_or(0),
            };
            let mut chosen = None;
            let mut w = start;
            while w <= start + search_limit {
                if d.vertex_set(n).contains(w) {
                    let t = HeightTable::for_level(d, n, &[w])?;
                    let tm = qb(t.require(n, w)?) * p_bar(m, n, w);
                    if tm < threshold {
                        chosen = Some((w, tm));
                        break;
                    }
                }
                w += 1;
            }
            let (w, tm) = chosen.ok_or_else(|| {
                Error::NoSmallTower(format!("no tower below 2^-{} at level {} within {} vertices", l, n, search_limit))
            })?;
            let source = d
                .row(n - 1, w)?
                .first()
                .map(|e| e.0)
                .ok_or_else(|| Error::NoSmallTower(format!("vertex {} has no incoming edge", w)))?;
            cones.push((w - r, w + r));
            frontier = Some(w + r);
            edges.push(AddedEdge { level: n - 1, source, range: w, index: l, tower_measure: tm });
        }
    }
    let mut sorted = cones.clone();
    sorted.sort();
    let cones_disjoint = sorted.windows(2).all(|p| p[0].1 < p[1].0);
    let bound = Q::one() + edges.iter().map(|e| e.tower_measure.clone()).sum::<Q>();
    let mut cap = Q::zero();
    for k in 0..=l {
        cap += Q::new(BigInt::one(), BigInt::one() << k as usize);
    }
    Ok(AugmentPlan { edges, bound, cap, cones_disjoint })
}

/// `Σ_{w ∈ V_n ∩ window} H_w^{(n)} p_w^{(n)}`.
pub fn window_mass(d: &Diagram, m: &MeasureSpec, n: usize, window: (Vertex, Vertex)) -> Result<Scalar> {
    let Some((lo, hi)) = d.vertex_set(n).clip(window.0, window.1) else {
        return Ok(Scalar::Exact(Q::zero()));
    };
    let vs: Vec<Vertex> = (lo..=hi).collect();
    let t = HeightTable::for_level(d, n, &vs)?;
    if m.is_exact() {
        let mut s = Q::zero();
        for &v in &vs {
            s += qb(t.require(n, v)?) * p_bar(m, n, v);
        }
        Ok(Scalar::Exact(s))
    } else {
        let mut s = 0.0;
        for &v in &vs {
            s += t.require(n, v)?.to_f64().unwrap_or(f64::INFINITY) * m.p_f64(n, v);
        }
        Ok(Scalar::Float(s))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustionReport {
    pub found: bool,
    /// `(N, |W_N(k)|, k)` for the first capture.
    pub witness: Option<(usize, usize, u64)>,
    /// Captured mass at the witness.
    pub mass: Option<Scalar>,
}

/// Searches `k = 1..=k_max`, `N = 0..=n_max` for
/// `Σ_{w ∈ W_N(k)} H_w^{(N)} p_w^{(N)} > 1 - ε`.
pub fn exhaustion_check(d: &Diagram, m: &MeasureSpec, k_max: u64, eps: f64, n_max: usize) -> Result<ExhaustionReport> {
    let b = d.bounded_size().ok_or(Error::MissingBoundedSizeParams)?.clone();
    for k in 1..=k_max {
        for n in 0..=n_max {
            let s: i64 = (0..n).map(|i| (b.t)(i) as i64).sum::<i64>() + k as i64;
            let mass = window_mass(d, m, n, (-s, s))?;
            if mass.to_f64() > 1.0 - eps {
                let size = d.vertex_set(n).clip(-s, s).map_or(0, |(lo, hi)| (hi - lo + 1) as usize);
                return Ok(ExhaustionReport { found: true, witness: Some((n, size, k)), mass: Some(mass) });
            }
        }
    }
    Ok(ExhaustionReport { found: false, witness: None, mass: None })
}
