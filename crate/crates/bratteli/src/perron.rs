//! Perron eigenpairs of finite corners, Leslie matrices, recurrence.
//!
//! For a stationary diagram the relevant matrix is `A = F^T`; a measure is
//! built from a right eigenvector `A ξ = λ ξ` as `μ([ē]) = ξ_v / λ^n`.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::diagram::{Diagram, FamilySpec, Vertex, VertexSet};
use crate::measure::{EigenSpec, GeometricTail, MeasureSpec, Scalar};
use crate::seq::Seq;
use crate::{Error, Result, Q};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Largest matrix on which irreducibility and aperiodicity are checked.
pub const STRUCTURE_CAP: usize = 512;
/// Relative offset above `L` for the lower end of the Leslie bracket.
pub const BRACKET_DELTA: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub lambda: f64,
    /// Right eigenvector with first coordinate 1.
    pub xi: Vec<f64>,
    /// `sup |A ξ - λ ξ|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Checks that the digraph `i -> j` (when `m[i][j] > 0`) is strongly
/// connected and has period one.
pub fn check_primitive(m: &[Vec<u64>]) -> Result<()> {
    let k = m.len();
    if k > STRUCTURE_CAP {
        return Err(Error::MatrixTooLarge(k));
    }
    if k == 0 || m.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidFamilyParams("matrix must be square and nonempty".into()));
    }
    let bfs = |forward: bool| -> Vec<Option<u64>> {
        let mut dist = vec![None; k];
        dist[0] = Some(0);
        let mut q = VecDeque::from([0usize]);
        while let Some(i) = q.pop_front() {
            for j in 0..k {
                let e = if forward { m[i][j] } else { m[j][i] };
                if e > 0 && dist[j].is_none() {
                    dist[j] = Some(dist[i].unwrap() + 1);
                    q.push_back(j);
                }
            }
        }
        dist
    };
    let fwd = bfs(true);
    let bwd = bfs(false);
    if fwd.iter().chain(bwd.iter()).any(|d| d.is_none()) {
        return Err(Error::NotIrreducible);
    }
    let mut g = 0u64;
    for i in 0..k {
        for j in 0..k {
            if m[i][j] > 0 {
                let a = fwd[i].unwrap() + 1;
                let b = fwd[j].unwrap();
                g = g.gcd(&a.abs_diff(b));
            }
        }
    }
    if g != 1 {
        return Err(Error::NotAperiodic(g));
    }
    Ok(())
}

/// Perron eigenpair of a primitive nonnegative matrix by power iteration
/// from the all-ones vector, renormalizing the first coordinate to 1.
pub fn perron_finite(m: &[Vec<u64>], tol: f64, max_iter: usize) -> Result<Eigenpair> {
    if !(tol > 0.0) {
        return Err(Error::ParamOutOfRange("tol must be positive".into()));
    }
    check_primitive(m)?;
    let k = m.len();
    let mf: Vec<Vec<(usize, f64)>> =
        m.iter().map(|r| r.iter().enumerate().filter(|(_, &c)| c > 0).map(|(j, &c)| (j, c as f64)).collect()).collect();
    let apply = |x: &[f64]| -> Vec<f64> { mf.iter().map(|r| r.iter().map(|&(j, c)| c * x[j]).sum()).collect() };
    let mut x = vec![1.0; k];
    let mut lambda = 0.0f64;
    for it in 1..=max_iter {
        let y = apply(&x);
        let l = y[0];
        if !(l > 0.0) {
            return Err(Error::NotIrreducible);
        }
        let xn: Vec<f64> = y.iter().map(|v| v / l).collect();
        let dx = x.iter().zip(&xn).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dl = (l - lambda).abs();
        x = xn;
        lambda = l;
        if dl.max(dx) < tol {
            let ax = apply(&x);
            let residual = ax.iter().zip(&x).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
            if residual <= tol {
                return Ok(Eigenpair { lambda, xi: x, residual, iterations: it });
            }
        }
    }
    Err(Error::NoConvergence(max_iter))
}

/// Corner `A_k = (A_{ij})_{i,j < k}` of an infinite matrix given by a
/// 0-based accessor.
pub fn corner(a: &dyn Fn(usize, usize) -> u64, k: usize) -> Vec<Vec<u64>> {
    (0..k).map(|i| (0..k).map(|j| a(i, j)).collect()).collect()
}

/// The accessor of `A = F^T` for a stationary diagram over `{first, first+1, ...}`.
pub fn transpose_accessor(d: &Diagram) -> Result<impl Fn(usize, usize) -> u64 + '_> {
    let first =
        d.vertex_set(0).first().ok_or_else(|| Error::InvalidFamilyParams("vertex set has no first element".into()))?;
    Ok(move |i: usize, j: usize| d.entry(0, first + j as Vertex, first + i as Vertex).unwrap_or(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationSequence {
    pub entries: Vec<(usize, Eigenpair)>,
    /// Whether `λ_k` is nondecreasing along the sequence.
    pub monotone: bool,
}

/// Perron eigenpairs of the nested corners `A_k`, `k ∈ ks`.
pub fn truncation_sequence(
    a: &dyn Fn(usize, usize) -> u64,
    ks: &[usize],
    tol: f64,
    max_iter: usize,
) -> Result<TruncationSequence> {
    let mut entries = Vec::with_capacity(ks.len());
    for &k in ks {
        entries.push((k, perron_finite(&corner(a, k), tol, max_iter)?));
    }
    let mut monotone = true;
    for w in entries.windows(2) {
        if w[0].0 <= w[1].0 && w[1].1.lambda < w[0].1.lambda - 8.0 * tol {
            monotone = false;
        }
    }
    Ok(TruncationSequence { entries, monotone })
}

fn leslie_limit_l(b: &Seq, s: &Seq) -> Result<f64> {
    let s_lim = s.limit().ok_or_else(|| Error::NoFiniteLambda(format!("survival rates {} are unbounded", s)))?;
    let g = b.growth();
    let rho_b = g.rho.to_f64().unwrap_or(f64::INFINITY);
    Ok(rho_b * s_lim as f64)
}

/// Where `p(λ)` lies relative to 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    AtLeastOne,
    BelowOne,
}

/// Sums `p(λ) = Σ_{i>=1} b_i s_1⋯s_{i-1} / λ^i` until its position relative
/// to 1 is certified. Returns the side and the last partial sum.
fn leslie_p_side(b: &Seq, s: &Seq, lambda: f64, max_terms: usize) -> Result<(Side, f64)> {
    let mut term = b.at_f64(0) / lambda;
    let mut sum = 0.0f64;
    for i in 1..=max_terms {
        sum += term;
        if sum >= 1.0 {
            return Ok((Side::AtLeastOne, sum));
        }
        // Ratio u_{m+1}/u_m = (b_{m+1}/b_m) s_m / λ for m >= i.
        let (_, hb) = b.ratio_bounds(i - 1);
        if let Some(ss) = s.sup_from(i - 1) {
            let q = hb * ss as f64 / lambda;
            if q < 1.0 {
                let tail = term * q / (1.0 - q);
                if sum + tail * (1.0 + 1e-12) < 1.0 {
                    return Ok((Side::BelowOne, sum));
                }
            }
        }
        let next_b = b.at_f64(i);
        let cur_b = b.at_f64(i - 1);
        term = term * (next_b / cur_b) * s.at_f64(i - 1) / lambda;
        if !term.is_finite() {
            return Ok((Side::AtLeastOne, f64::INFINITY));
        }
    }
    Err(Error::BracketFailure(format!("cannot place p({}) relative to 1", lambda)))
}

/// Evaluates `p(λ)` with a certified tail.
pub fn leslie_p(b: &Seq, s: &Seq, lambda: f64) -> Result<f64> {
    let mut term = b.at_f64(0) / lambda;
    let mut sum = 0.0;
    for i in 1..=1_000_000usize {
        sum += term;
        let (_, hb) = b.ratio_bounds(i - 1);
        if let Some(ss) = s.sup_from(i - 1) {
            let q = hb * ss as f64 / lambda;
            if q < 1.0 && term * q / (1.0 - q) <= sum * 1e-17 {
                return Ok(sum);
            }
        }
        term = term * (b.at_f64(i) / b.at_f64(i - 1)) * s.at_f64(i - 1) / lambda;
    }
    Err(Error::BracketFailure(format!("p({}) did not converge", lambda)))
}

/// The Perron value of the infinite Leslie matrix: the root of `p(λ) = 1`
/// on `(L(1+δ), ∞)` with `L = limsup b_{i+1} s_i / b_i`.
pub fn leslie_lambda(b: &Seq, s: &Seq, tol: f64) -> Result<f64> {
    b.validate_positive()?;
    s.validate_positive()?;
    let l = leslie_limit_l(b, s)?;
    if !l.is_finite() {
        return Err(Error::NoFiniteLambda("sup b_{i+1}/b_i is infinite".into()));
    }
    let mut lo = l * (1.0 + BRACKET_DELTA);
    let max_terms = 2_000_000;
    if leslie_p_side(b, s, lo, max_terms)?.0 != Side::AtLeastOne {
        return Err(Error::BracketFailure(format!("p({}) < 1 at the lower end", lo)));
    }
    let mut hi = l + 1.0;
    while leslie_p_side(b, s, hi, max_terms)?.0 != Side::BelowOne {
        lo = hi;
        hi *= 2.0;
        if hi > libm::ldexp(1.0, 60) {
            return Err(Error::BracketFailure("upper end exceeded 2^60".into()));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match leslie_p_side(b, s, mid, max_terms) {
            Ok((Side::AtLeastOne, _)) => lo = mid,
            Ok((Side::BelowOne, _)) => hi = mid,
            Err(_) => break,
        }
        if hi - lo <= tol * 1e-3 * hi {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let p = leslie_p(b, s, lambda)?;
    if (p - 1.0).abs() > tol.max(1e-13) * 16.0 {
        return Err(Error::BracketFailure(format!("|p(λ) - 1| = {:e}", (p - 1.0).abs())));
    }
    Ok(lambda)
}

/// `ξ_i = s_1⋯s_{i-1} / λ^{i-1}` for `i = 1..=k`, with the tail ratio and
/// `σ = Σ ξ` when `s` is constant.
#[derive(Clone, Debug, PartialEq)]
pub struct LeslieEigenvector {
    pub xi: Vec<f64>,
    pub tail_ratio: Option<f64>,
    pub sigma: Option<f64>,
    /// `Σ ξ = ∞` (for constant `s >= λ`).
    pub divergent_mass: bool,
}

pub fn leslie_eigenvector(lambda: f64, s: &Seq, k: usize) -> LeslieEigenvector {
    let mut xi = Vec::with_capacity(k);
    let mut x = 1.0;
    for i in 0..k {
        xi.push(x);
        x *= s.at_f64(i) / lambda;
    }
    let (tail_ratio, sigma, divergent_mass) = match s {
        Seq::Constant(c) => {
            let r = *c as f64 / lambda;
            if r < 1.0 {
                (Some(r), Some(lambda / (lambda - *c as f64)), false)
            } else {
                (Some(r), None, true)
            }
        }
        _ => (None, None, false),
    };
    LeslieEigenvector { xi, tail_ratio, sigma, divergent_mass }
}

/// Exact eigendata of a constant-parameter Leslie matrix: `λ = b + s`,
/// `ξ_i = (s/λ)^{i-1}`, `σ = λ/b`.
pub fn leslie_constant_spec(b: u64, s: u64) -> EigenSpec {
    let lambda = Q::from_integer(BigInt::from(b + s));
    let r = Q::new(BigInt::from(s), BigInt::from(b + s));
    let r2 = r.clone();
    let sigma = Q::new(BigInt::from(b + s), BigInt::from(b));
    EigenSpec::exact(format!("Leslie b={} s={}", b, s), lambda, VertexSet::Naturals { first: 1 }, move |i| {
        if i < 1 {
            Q::zero()
        } else {
            num_traits::pow(r2.clone(), (i - 1) as usize)
        }
    })
    .with_sigma(Some(Scalar::Exact(sigma)))
    .with_tail(GeometricTail { from: 1, ratio: Scalar::Exact(r) })
}

/// Leslie measure from descriptors; exact when both are constant.
pub fn leslie_measure(b: &Seq, s: &Seq, tol: f64) -> Result<EigenSpec> {
    if let (Seq::Constant(bc), Seq::Constant(sc)) = (b, s) {
        return Ok(leslie_constant_spec(*bc, *sc));
    }
    let lambda = leslie_lambda(b, s, tol)?;
    let s2 = s.clone();
    let spec =
        EigenSpec::float(format!("Leslie b={} s={}", b, s), lambda, VertexSet::Naturals { first: 1 }, move |i| {
            let mut x = 1.0;
            for j in 0..(i - 1).max(0) as usize {
                x *= s2.at_f64(j) / lambda;
            }
            x
        });
    Ok(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecurrenceVerdict {
    Recurrent,
    Transient,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceClass {
    pub verdict: RecurrenceVerdict,
    /// `Σ_{n<=N} (A^n)_{ii} / λ^n` for `N = 0..=horizon`.
    pub partial_sums: Vec<f64>,
    pub note: String,
}

/// Partial sums of `Σ_n (A^n)_{ii}/λ^n` for `A = F^T` of a stationary diagram.
pub fn classify_recurrence(d: &Diagram, lambda: f64, i: Vertex, horizon: usize) -> Result<RecurrenceClass> {
    let mut x: alloc::collections::BTreeMap<Vertex, BigUint> = alloc::collections::BTreeMap::new();
    x.insert(i, BigUint::one());
    let mut partial = Vec::with_capacity(horizon + 1);
    let mut acc = 0.0;
    for n in 0..=horizon {
        let diag = x.get(&i).cloned().unwrap_or_default();
        acc += diag.to_f64().unwrap_or(f64::INFINITY) / libm::pow(lambda, n as f64);
        partial.push(acc);
        if n == horizon {
            break;
        }
        let mut next = alloc::collections::BTreeMap::new();
        for (&v, c) in &x {
            for (w, f) in d.row(0, v)? {
                *next.entry(w).or_insert_with(BigUint::zero) += c * BigUint::from(f);
            }
        }
        if next.len() > crate::combinatorics::MAX_LEVEL_VERTICES {
            return Err(Error::WindowOverflow("recurrence support".into()));
        }
        x = next;
    }
    let mut verdict = RecurrenceVerdict::Inconclusive;
    let mut note = String::from("no analytic recognizer applies");
    if let Some(FamilySpec::Leslie { b: Seq::Constant(b), s: Seq::Constant(s) }) = d.family() {
        if (lambda - (b + s) as f64).abs() <= 1e-9 * lambda {
            verdict = RecurrenceVerdict::Recurrent;
            note = format!(
                "constant Leslie: <ξ,η> = 1 + Σ (s/λ)^(i-1) = {} < ∞, positive recurrent",
                1.0 + (*s as f64 / lambda) / (1.0 - *s as f64 / lambda)
            );
        }
    } else if let VertexSet::Finite { lo, hi } = d.vertex_set(0) {
        let k = (hi - lo + 1) as usize;
        if k <= STRUCTURE_CAP {
            let acc = transpose_accessor(d)?;
            let m = corner(&acc, k);
            if let Ok(e) = perron_finite(&m, 1e-12, DEFAULT_MAX_ITER) {
                if (e.lambda - lambda).abs() <= 1e-9 * lambda {
                    verdict = RecurrenceVerdict::Recurrent;
                    note = String::from(
                        "finite primitive matrix at its Perron value: terms converge to a positive constant",
                    );
                }
            }
        }
    }
    Ok(RecurrenceClass { verdict, partial_sums: partial, note })
}

/// Nullspace vector of `A - λ I` over the rationals, normalized so that its
/// first nonzero coordinate is 1.
pub fn rational_eigenvector(a: &[Vec<Q>], lambda: &Q) -> Option<Vec<Q>> {
    let k = a.len();
    let mut m: Vec<Vec<Q>> = a.to_vec();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..k {
        let Some(p) = (r..k).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..k {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..k {
                    let t = &m[r][j] * &f;
                    m[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free = (0..k).find(|c| !pivots.contains(c))?;
    let mut x = vec![Q::zero(); k];
    x[free] = Q::one();
    for (row, &pc) in pivots.iter().enumerate() {
        x[pc] = -m[row][free].clone();
    }
    let first = x.iter().find(|v| !v.is_zero())?.clone();
    let x: Vec<Q> = x.into_iter().map(|v| v / &first).collect();
    x.iter().all(|v| !v.is_negative()).then_some(x)
}

#[derive(Clone, Debug)]
pub struct StationaryMeasure {
    pub spec: MeasureSpec,
    /// `Σ_v ξ_v < ∞`.
    pub finite: bool,
}

/// Measure of a stationary diagram from eigendata of `A = F^T`; checks
/// `A ξ = λ ξ` on `window` (rows of `A` are columns of `F`).
pub fn stationary_measure(d: &Diagram, e: EigenSpec, window: (Vertex, Vertex)) -> Result<StationaryMeasure> {
    if !d.flags().stationary {
        return Err(Error::InvalidFamilyParams("diagram is not stationary".into()));
    }
    let finite = e.sigma.is_some();
    let normalized = if finite { e.normalized()? } else { e };
    let spec = MeasureSpec::StationaryEigen(normalized);
    let r = crate::measure::verify_tail_invariance(&spec, d, 0, window)?;
    let ok = match &r.exact {
        Some(q) => q.is_zero(),
        None => r.max_abs <= 1e-12,
    };
    if !ok {
        return Err(Error::ParamOutOfRange(format!(
            "eigen relation fails at vertex {:?} (residual {:e})",
            r.worst, r.max_abs
        )));
    }
    Ok(StationaryMeasure { spec, finite })
}

/// Exact eigen measure of a finite stationary diagram at a given rational `λ`.
pub fn finite_exact_eigen(d: &Diagram, lambda: &Q) -> Result<EigenSpec> {
    let VertexSet::Finite { lo, hi } = d.vertex_set(0) else {
        return Err(Error::InvalidFamilyParams("vertex set must be finite".into()));
    };
    let k = (hi - lo + 1) as usize;
    let acc = transpose_accessor(d)?;
    let a: Vec<Vec<Q>> = corner(&acc, k)
        .into_iter()
        .map(|r| r.into_iter().map(|c| Q::from_integer(BigInt::from(c))).collect())
        .collect();
    let xi = rational_eigenvector(&a, lambda).ok_or_else(|| {
        Error::ParamOutOfRange(format!("{} is not an eigenvalue with a nonnegative eigenvector", lambda))
    })?;
    let sigma: Q = xi.iter().cloned().sum();
    let xi2 = xi.clone();
    Ok(EigenSpec::exact(format!("finite eigen λ={}", lambda), lambda.clone(), d.vertex_set(0), move |v| {
        xi2[(v - lo) as usize].clone()
    })
    .with_sigma(Some(Scalar::Exact(sigma))))
}

/// Eigendata of the retained part of the edge example: `λ = 3`,
/// `ξ_0 = ξ_{-1} = 1`, `ξ_k = 2^{-k}`, `ξ_{-k} = 2^{-(k-1)}` for `k >= 1`,
/// `σ = 4`.
pub fn edge_example_eigen() -> EigenSpec {
    EigenSpec::exact("edge example", Q::from_integer(3.into()), VertexSet::Integers, |v| {
        let e = if v >= 0 { v } else { -v - 1 };
        Q::new(BigInt::one(), BigInt::one() << e as usize)
    })
    .with_sigma(Some(Scalar::Exact(Q::from_integer(4.into()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::build_family;

    #[test]
    fn small_eigenpairs() {
        let e = perron_finite(&[vec![2]], 1e-12, 100).unwrap();
        assert_eq!(e.lambda, 2.0);
        assert_eq!(e.xi, vec![1.0]);
        let e = perron_finite(&[vec![1, 1], vec![1, 0]], 1e-12, 10_000).unwrap();
        assert!((e.lambda - (1.0 + libm::sqrt(5.0)) / 2.0).abs() < 1e-10);
        assert!(matches!(perron_finite(&[vec![2, 1], vec![0, 2]], 1e-12, 100), Err(Error::NotIrreducible)));
        assert!(matches!(perron_finite(&[vec![0, 1], vec![1, 0]], 1e-12, 100), Err(Error::NotAperiodic(2))));
    }

    #[test]
    fn leslie_values() {
        let one = Seq::constant(1);
        assert!((leslie_lambda(&one, &one, 1e-12).unwrap() - 2.0).abs() < 1e-9);
        assert!((leslie_lambda(&one, &Seq::constant(2), 1e-12).unwrap() - 3.0).abs() < 1e-9);
        assert!((leslie_lambda(&Seq::constant(3), &Seq::constant(2), 1e-12).unwrap() - 5.0).abs() < 1e-9);
        assert!(matches!(leslie_lambda(&one, &Seq::geometric(1, 2), 1e-12), Err(Error::NoFiniteLambda(_))));
        let ev = leslie_eigenvector(3.0, &Seq::constant(2), 4);
        assert_eq!(ev.sigma, Some(3.0));
        assert!((ev.xi[2] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn rank2_exact_eigen() {
        let d = build_family(&FamilySpec::Rank2Example).unwrap();
        let e = finite_exact_eigen(&d, &Q::from_integer(2.into())).unwrap();
        assert_eq!(e.xi_exact(1), Some(Q::one()));
        assert_eq!(e.xi_exact(2), Some(Q::zero()));
        let m = stationary_measure(&d, e, (1, 2)).unwrap();
        assert!(m.finite);
    }

    #[test]
    fn recurrence() {
        let d = build_family(&FamilySpec::StationaryFinite { matrix: vec![vec![2]] }).unwrap();
        let r = classify_recurrence(&d, 2.0, 0, 10).unwrap();
        assert_eq!(r.verdict, RecurrenceVerdict::Recurrent);
        assert_eq!(r.partial_sums.len(), 11);
        assert_eq!(r.partial_sums[10], 11.0);
        let l = build_family(&FamilySpec::Leslie { b: Seq::constant(1), s: Seq::constant(1) }).unwrap();
        assert_eq!(classify_recurrence(&l, 2.0, 1, 20).unwrap().verdict, RecurrenceVerdict::Recurrent);
        let t = build_family(&FamilySpec::LowerTriangular).unwrap();
        let r = classify_recurrence(&t, 2.0, 1, 20).unwrap();
        assert_eq!(r.verdict, RecurrenceVerdict::Inconclusive);
        assert_eq!(r.partial_sums.len(), 21);
    }

    #[test]
    fn edge_example_eigen_relation() {
        let sub = build_family(&FamilySpec::EdgeExampleSub).unwrap();
        let m = stationary_measure(&sub, edge_example_eigen(), (-30, 30)).unwrap();
        assert!(m.finite);
    }
}
