//! Tail-invariant measures given by their values `p_v^{(n)}` on cylinders.
//!
//! A measure is tail invariant iff `F_n^T p^{(n+1)} = p^{(n)}` for every `n`.
//! Columns of `F_n` may be infinite; their sums are then taken in closed
//! form using geometric tails of `p`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::combinatorics::{CylinderSpec, HeightTable};
use crate::diagram::{Diagram, Vertex, VertexSet};
use crate::seq::Seq;
use crate::{Error, Result, Q};

/// A number that is either exact or a float.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(Q),
    Float(f64),
}

impl Scalar {
    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            Scalar::Float(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&Q> {
        match self {
            Scalar::Exact(q) => Some(q),
            Scalar::Float(_) => None,
        }
    }
}

/// `p_{v+1} = ratio * p_v` for every `v >= from`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricTail {
    pub from: Vertex,
    pub ratio: Scalar,
}

type PFn = Arc<dyn Fn(usize, Vertex) -> Q + Send + Sync>;
type XiExact = Arc<dyn Fn(Vertex) -> Q + Send + Sync>;
type XiFloat = Arc<dyn Fn(Vertex) -> f64 + Send + Sync>;

/// Explicit rational p-vectors, constant geometric tail shape across levels.
#[derive(Clone)]
pub struct PVectors {
    pub label: String,
    pub support: VertexSet,
    p: PFn,
    pub tail: Option<GeometricTail>,
    /// `Σ_v H_v^{(n)} p_v^{(n)}`, when known in closed form.
    pub mass: Option<Q>,
}

impl PVectors {
    pub fn new(
        label: impl Into<String>,
        support: VertexSet,
        p: impl Fn(usize, Vertex) -> Q + Send + Sync + 'static,
    ) -> Self {
        PVectors { label: label.into(), support, p: Arc::new(p), tail: None, mass: None }
    }

    pub fn with_tail(mut self, tail: GeometricTail) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn with_mass(mut self, mass: Q) -> Self {
        self.mass = Some(mass);
        self
    }

    pub fn p(&self, n: usize, v: Vertex) -> Q {
        (self.p)(n, v)
    }
}

/// The measure `μ([ē]) = ξ_v / λ^n` (divided by `σ = Σ ξ` when normalized)
/// attached to a Perron pair of a stationary diagram.
#[derive(Clone)]
pub struct EigenSpec {
    pub label: String,
    pub lambda: Scalar,
    xi_exact: Option<XiExact>,
    xi_float: XiFloat,
    /// `Σ_v ξ_v`; `None` when infinite.
    pub sigma: Option<Scalar>,
    pub probability: bool,
    pub support: VertexSet,
    /// Geometric tail of `ξ` towards `+∞`.
    pub tail: Option<GeometricTail>,
}

impl EigenSpec {
    pub fn exact(
        label: impl Into<String>,
        lambda: Q,
        support: VertexSet,
        xi: impl Fn(Vertex) -> Q + Send + Sync + 'static,
    ) -> Self {
        let xi = Arc::new(xi);
        let xi2 = xi.clone();
        EigenSpec {
            label: label.into(),
            lambda: Scalar::Exact(lambda),
            xi_exact: Some(xi),
            xi_float: Arc::new(move |v| xi2(v).to_f64().unwrap_or(f64::NAN)),
            sigma: None,
            probability: false,
            support,
            tail: None,
        }
    }

    pub fn float(
        label: impl Into<String>,
        lambda: f64,
        support: VertexSet,
        xi: impl Fn(Vertex) -> f64 + Send + Sync + 'static,
    ) -> Self {
        EigenSpec {
            label: label.into(),
            lambda: Scalar::Float(lambda),
            xi_exact: None,
            xi_float: Arc::new(xi),
            sigma: None,
            probability: false,
            support,
            tail: None,
        }
    }

    pub fn with_sigma(mut self, sigma: Option<Scalar>) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_tail(mut self, tail: GeometricTail) -> Self {
        self.tail = Some(tail);
        self
    }

    /// Divide by `σ` so that the measure of the whole path space is one.
    pub fn normalized(mut self) -> Result<Self> {
        if self.sigma.is_none() {
            return Err(Error::ParamOutOfRange("cannot normalize: Σξ is infinite".into()));
        }
        self.probability = true;
        Ok(self)
    }

    pub fn xi_exact(&self, v: Vertex) -> Option<Q> {
        self.xi_exact.as_ref().map(|f| f(v))
    }

    pub fn xi_f64(&self, v: Vertex) -> f64 {
        (self.xi_float)(v)
    }
}

/// The unique invariant measure of an odometer, placed on a base vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct OdometerSpec {
    pub a: Seq,
    pub base: Vertex,
}

/// A tail-invariant measure.
#[derive(Clone)]
pub enum MeasureSpec {
    PVectors(PVectors),
    StationaryEigen(EigenSpec),
    OdometerProduct(OdometerSpec),
}

impl fmt::Debug for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::PVectors(p) => write!(f, "PVectors({})", p.label),
            MeasureSpec::StationaryEigen(e) => {
                write!(f, "StationaryEigen({}, λ={:?}, σ={:?})", e.label, e.lambda, e.sigma)
            }
            MeasureSpec::OdometerProduct(o) => write!(f, "OdometerProduct({}, base {})", o.a, o.base),
        }
    }
}

/// Value of a cylinder: exact when available, always as a float.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderMeasure {
    pub exact: Option<Q>,
    pub value: f64,
    /// Absolute error bound of `value`.
    pub error: f64,
}

fn q_from_int(x: i64) -> Q {
    Q::from_integer(BigInt::from(x))
}

impl MeasureSpec {
    pub fn odometer(a: Seq, base: Vertex) -> Self {
        MeasureSpec::OdometerProduct(OdometerSpec { a, base })
    }

    pub fn support(&self) -> VertexSet {
        match self {
            MeasureSpec::PVectors(p) => p.support,
            MeasureSpec::StationaryEigen(e) => e.support,
            MeasureSpec::OdometerProduct(o) => VertexSet::finite(o.base, o.base),
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            MeasureSpec::StationaryEigen(e) => {
                e.xi_exact.is_some()
                    && e.lambda.exact().is_some()
                    && (!e.probability || e.sigma.as_ref().and_then(|s| s.exact()).is_some())
            }
            _ => true,
        }
    }

    /// `p_v^{(n)}` in exact arithmetic, when the measure is exact.
    pub fn p_exact(&self, n: usize, v: Vertex) -> Option<Q> {
        if !self.support().contains(v) {
            return Some(Q::zero());
        }
        match self {
            MeasureSpec::PVectors(p) => Some(p.p(n, v)),
            MeasureSpec::StationaryEigen(e) => {
                let lambda = e.lambda.exact()?;
                let mut x = e.xi_exact(v)? / num_traits::pow(lambda.clone(), n);
                if e.probability {
                    x /= e.sigma.as_ref()?.exact()?;
                }
                Some(x)
            }
            MeasureSpec::OdometerProduct(o) => {
                let mut den = Q::one();
                for i in 0..n {
                    den *= o.a.at_q(i);
                }
                Some(den.recip())
            }
        }
    }

    pub fn p_f64(&self, n: usize, v: Vertex) -> f64 {
        if let Some(q) = self.p_exact(n, v) {
            return q.to_f64().unwrap_or(0.0);
        }
        match self {
            MeasureSpec::StationaryEigen(e) => {
                let mut x = e.xi_f64(v) / libm::pow(e.lambda.to_f64(), n as f64);
                if e.probability {
                    x /= e.sigma.as_ref().map_or(f64::INFINITY, |s| s.to_f64());
                }
                x
            }
            _ => unreachable!("non-eigen specs are exact"),
        }
    }

    pub fn geometric_tail(&self) -> Option<GeometricTail> {
        match self {
            MeasureSpec::PVectors(p) => p.tail.clone(),
            MeasureSpec::StationaryEigen(e) => e.tail.clone(),
            MeasureSpec::OdometerProduct(_) => None,
        }
    }
}

/// Residual of `F_n^T p^{(n+1)} = p^{(n)}` on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    /// Exact maximal residual, for exact specs.
    pub exact: Option<Q>,
    pub max_abs: f64,
    /// Vertex where the maximum is attained.
    pub worst: Option<Vertex>,
}

/// Sum `Σ_{v >= from} c p_v^{(n)}` for a measure with geometric tail.
fn tail_sum_exact(m: &MeasureSpec, n: usize, from: Vertex, c: u64, level_vertex: Vertex) -> Result<Q> {
    let tail = m.geometric_tail().ok_or(Error::MissingTailDescriptor { level: n, vertex: level_vertex })?;
    let r = tail.ratio.exact().ok_or(Error::MissingTailDescriptor { level: n, vertex: level_vertex })?.clone();
    let mut s = Q::zero();
    let start = from.max(tail.from);
    for v in from..start {
        s += m.p_exact(n, v).unwrap_or_else(Q::zero);
    }
    let first = m.p_exact(n, start).unwrap_or_else(Q::zero);
    s += first / (Q::one() - r);
    Ok(s * q_from_int(c as i64))
}

fn tail_sum_f64(m: &MeasureSpec, n: usize, from: Vertex, c: u64, level_vertex: Vertex) -> Result<f64> {
    let tail = m.geometric_tail().ok_or(Error::MissingTailDescriptor { level: n, vertex: level_vertex })?;
    let r = tail.ratio.to_f64();
    let start = from.max(tail.from);
    let mut s = 0.0;
    for v in from..start {
        s += m.p_f64(n, v);
    }
    s += m.p_f64(n, start) / (1.0 - r);
    Ok(s * c as f64)
}

/// Maximal residual of `Σ_v f_{v,w} p_v^{(n+1)} - p_w^{(n)}` over `w ∈ V_n ∩ window`.
pub fn verify_tail_invariance(m: &MeasureSpec, d: &Diagram, n: usize, window: (Vertex, Vertex)) -> Result<Residual> {
    let Some((lo, hi)) = d.vertex_set(n).clip(window.0, window.1) else {
        return Ok(Residual { exact: Some(Q::zero()), max_abs: 0.0, worst: None });
    };
    let exact = m.is_exact();
    let mut best = Residual { exact: exact.then(Q::zero), max_abs: 0.0, worst: None };
    for w in lo..=hi {
        let col = d.column(n, w)?;
        if exact {
            let mut lhs = Q::zero();
            for &(v, c) in &col.entries {
                lhs += m.p_exact(n + 1, v).unwrap() * q_from_int(c as i64);
            }
            if let Some(t) = col.tail {
                lhs += tail_sum_exact(m, n + 1, t.from, t.count, w)?;
            }
            let r = (lhs - m.p_exact(n, w).unwrap()).abs();
            let rf = r.to_f64().unwrap_or(f64::INFINITY);
            if best.worst.is_none() || r > *best.exact.as_ref().unwrap() {
                best = Residual { exact: Some(r), max_abs: rf, worst: Some(w) };
            }
        } else {
            let mut lhs = 0.0;
            for &(v, c) in &col.entries {
                lhs += m.p_f64(n + 1, v) * c as f64;
            }
            if let Some(t) = col.tail {
                lhs += tail_sum_f64(m, n + 1, t.from, t.count, w)?;
            }
            let pw = m.p_f64(n, w);
            let r = (lhs - pw).abs() / pw.abs().max(1.0);
            if best.worst.is_none() || r > best.max_abs {
                best = Residual { exact: None, max_abs: r, worst: Some(w) };
            }
        }
    }
    Ok(best)
}

/// `μ([ē]) = p_{r(ē)}^{(n)}` for a cylinder given by a path from level 0.
pub fn cylinder_measure(m: &MeasureSpec, c: &CylinderSpec) -> Result<CylinderMeasure> {
    let (n, v) = match (c.end_level(), c.range()) {
        (Some(n), Some(v)) => (n, v),
        _ => return Err(Error::InvalidPath("empty cylinder".into())),
    };
    if c.start_level() != Some(0) {
        return Err(Error::InvalidPath("cylinders must start at level 0".into()));
    }
    if !m.support().contains(v) {
        return Err(Error::OutsideSupport(v));
    }
    let exact = m.p_exact(n, v);
    let value = m.p_f64(n, v);
    let error = if exact.is_some() { 0.0 } else { value.abs() * 4.0 * f64::EPSILON };
    Ok(CylinderMeasure { exact, value, error })
}

/// `μ(X_v^{(n)}) = H_v^{(n)} p_v^{(n)}`.
pub fn tower_measure(m: &MeasureSpec, n: usize, v: Vertex, heights: &HeightTable) -> Result<Scalar> {
    let h = heights.require(n, v)?;
    match m.p_exact(n, v) {
        Some(p) => Ok(Scalar::Exact(p * Q::from_integer(BigInt::from(h.clone())))),
        None => Ok(Scalar::Float(m.p_f64(n, v) * h.to_f64().unwrap_or(f64::INFINITY))),
    }
}

/// The measures `p_i^{(n)} = (a/(1+a))^{i-1} (1+a)^{-n}` on the lower
/// triangular diagram, `0 < a < 1`. Their total mass is `1 + a`.
pub fn triangular_family_measure(a: &Q) -> Result<MeasureSpec> {
    if *a <= Q::zero() || *a >= Q::one() {
        return Err(Error::ParamOutOfRange(format!("a = {} must lie in (0, 1)", a)));
    }
    let one_plus = Q::one() + a;
    let r = a / &one_plus;
    let r2 = r.clone();
    let op = one_plus.clone();
    let pv = PVectors::new(format!("triangular a={}", a), VertexSet::Naturals { first: 1 }, move |n, i| {
        if i < 1 {
            return Q::zero();
        }
        num_traits::pow(r2.clone(), (i - 1) as usize) / num_traits::pow(op.clone(), n)
    })
    .with_tail(GeometricTail { from: 1, ratio: Scalar::Exact(r) })
    .with_mass(one_plus);
    Ok(MeasureSpec::PVectors(pv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::enumerate_paths;
    use crate::diagram::{build_family, FamilySpec};

    fn q(a: i64, b: i64) -> Q {
        Q::new(a.into(), b.into())
    }

    #[test]
    fn triangular_invariance_exact() {
        let d = build_family(&FamilySpec::LowerTriangular).unwrap();
        let m = triangular_family_measure(&q(1, 2)).unwrap();
        assert_eq!(m.p_exact(1, 2).unwrap(), q(1, 3) * q(2, 3));
        for n in 0..4 {
            let r = verify_tail_invariance(&m, &d, n, (1, 12)).unwrap();
            assert_eq!(r.exact, Some(Q::zero()));
        }
        assert!(triangular_family_measure(&q(3, 2)).is_err());
    }

    #[test]
    fn odometer_cylinders() {
        let d = build_family(&FamilySpec::Odometer { a: Seq::constant(2) }).unwrap();
        let m = MeasureSpec::odometer(Seq::constant(2), 0);
        let r = verify_tail_invariance(&m, &d, 3, (0, 0)).unwrap();
        assert_eq!(r.exact, Some(Q::zero()));
        let paths = enumerate_paths(&d, 0, (3, 0)).unwrap();
        for p in &paths {
            assert_eq!(cylinder_measure(&m, p).unwrap().exact, Some(q(1, 8)));
        }
        let t = HeightTable::for_level(&d, 3, &[0]).unwrap();
        assert_eq!(tower_measure(&m, 3, 0, &t).unwrap(), Scalar::Exact(Q::one()));
    }
}
