//! Convergence of measures on cylinder sets.
//!
//! Tail-invariant measures give a cylinder the value `p_v^{(m)}` of its range
//! vertex `v ∈ V_m`, so a cylinder is described here by its length, its range
//! and (optionally) the largest vertex its path visits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::combinatorics::{enumerate_paths_capped, FinitePath};
use crate::diagram::{build_family, Diagram, FamilySpec, Vertex};
use crate::measure::MeasureSpec;
use crate::perron::{corner, perron_finite, transpose_accessor, DEFAULT_MAX_ITER};
use crate::seq::Seq;
use crate::{Error, Result, Q};

/// Number of trailing indices over which a gap must not increase.
pub const MONOTONE_WINDOW: usize = 5;

/// A cylinder of length `level` ending at `vertex`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cylinder {
    pub id: String,
    pub level: usize,
    pub vertex: Vertex,
    /// Largest vertex visited by the defining path.
    pub max_vertex: Vertex,
}

impl Cylinder {
    /// The cylinder `[v]` of paths starting at `v ∈ V_0`.
    pub fn vertex(v: Vertex) -> Self {
        Cylinder { id: format!("[{}]", v), level: 0, vertex: v, max_vertex: v }
    }

    pub fn from_path(p: &FinitePath) -> Option<Self> {
        let v = p.range()?;
        let mut max = p.source()?;
        let mut id = format!("{}", max);
        for e in &p.edges {
            max = max.max(e.range);
            id.push_str(&format!("-{}.{}", e.range, e.index));
        }
        Some(Cylinder { id, level: p.end_level()?, vertex: v, max_vertex: max })
    }
}

/// All cylinders of length `1..=max_len` whose range lies in `window`,
/// together with the vertex cylinders of `V_0` in the window.
pub fn cylinders_up_to(d: &Diagram, max_len: usize, window: (Vertex, Vertex)) -> Result<Vec<Cylinder>> {
    let mut out = Vec::new();
    if let Some((lo, hi)) = d.vertex_set(0).clip(window.0, window.1) {
        out.extend((lo..=hi).map(Cylinder::vertex));
    }
    for m in 1..=max_len {
        let Some((lo, hi)) = d.vertex_set(m).clip(window.0, window.1) else { continue };
        for v in lo..=hi {
            for p in enumerate_paths_capped(d, 0, (m, v), max_len)? {
                out.extend(Cylinder::from_path(&p));
            }
        }
    }
    Ok(out)
}

/// Trajectory of `μ_k(C)` against `μ(C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub cylinder: Cylinder,
    pub target: f64,
    pub values: Vec<f64>,
    pub gaps: Vec<f64>,
}

impl Trajectory {
    pub fn final_gap(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Gap does not increase over the last `MONOTONE_WINDOW` indices and ends below `tol`.
    pub fn converged(&self, tol: f64) -> bool {
        let k = self.gaps.len().saturating_sub(MONOTONE_WINDOW);
        self.gaps[k..].windows(2).all(|w| w[1] <= w[0]) && self.final_gap() < tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub ks: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// `σ_k = Σ_v x_v(k)` with `x_1(k) = 1`.
    pub sigmas: Vec<f64>,
    /// `μ_k(X)` for each `k`.
    pub masses: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    pub tol: f64,
    pub converged: bool,
    /// Whether `‖x(k)‖₁ → ‖ξ‖₁` is known for this family or only assumed.
    pub hypothesis: String,
}

/// Probability measures of the corners `A_k = (F^T)_{k×k}` of a stationary
/// diagram over `{first, first+1, ...}`: `μ_k(C) = x_v(k) / (σ_k λ_k^m)`,
/// compared with `target`.
pub fn truncation_measure_convergence(
    d: &Diagram,
    target: &MeasureSpec,
    ks: &[usize],
    cylinders: &[Cylinder],
    tol: f64,
) -> Result<ConvergenceReport> {
    if !d.flags().stationary {
        return Err(Error::InvalidFamilyParams("truncations need a stationary diagram".into()));
    }
    let first = d.vertex_set(0).first().unwrap_or(0);
    let a = transpose_accessor(d)?;
    let mut rep = ConvergenceReport {
        ks: ks.to_vec(),
        lambdas: Vec::new(),
        sigmas: Vec::new(),
        masses: Vec::new(),
        trajectories: cylinders
            .iter()
            .map(|c| Trajectory {
                cylinder: c.clone(),
                target: target.p_f64(c.level, c.vertex),
                values: Vec::new(),
                gaps: Vec::new(),
            })
            .collect(),
        tol,
        converged: false,
        hypothesis: match d.family() {
            Some(FamilySpec::Leslie { b: Seq::Constant(_), s: Seq::Constant(_) }) => {
                String::from("norm convergence of truncated eigenvectors holds for constant Leslie parameters")
            }
            _ => String::from("norm convergence of truncated eigenvectors assumed, not checked"),
        },
    };
    for &k in ks {
        let e = perron_finite(&corner(&a, k), tol * 1e-3, DEFAULT_MAX_ITER)?;
        let sigma: f64 = e.xi.iter().sum();
        rep.lambdas.push(e.lambda);
        rep.sigmas.push(sigma);
        rep.masses.push(e.xi.iter().map(|x| x / sigma).sum());
        for t in rep.trajectories.iter_mut() {
            let c = &t.cylinder;
            let idx = c.vertex - first;
            let v = if c.max_vertex - first < k as i64 && idx >= 0 {
                e.xi[idx as usize] / (sigma * libm::pow(e.lambda, c.level as f64))
            } else {
                0.0
            };
            t.values.push(v);
            t.gaps.push((v - t.target).abs());
        }
    }
    rep.converged = rep.trajectories.iter().all(|t| t.converged(tol));
    Ok(rep)
}

/// Total mass of a member of a sequence of measures; `None` is infinite.
pub type Mass = Option<Q>;

#[derive(Clone, Debug, PartialEq)]
pub struct MassLimitReport {
    /// `μ_n(X)` for `n = 1..=horizon`.
    pub masses: Vec<Mass>,
    /// `max_C |μ_n(C) - μ(C)|` for `n = 1..=horizon`.
    pub sup_gaps: Vec<Q>,
    pub subprobability: bool,
    pub cylinders_converge: bool,
    pub masses_converge: bool,
    /// Subprobability measures converging on cylinders whose masses do not
    /// tend to 1.
    pub violation: bool,
}

/// `μ_n = c_n μ + d_n ν` with `(c_n, d_n) = coeff(n)`, evaluated on
/// cylinders whose values under `μ` and `ν` are given.
pub fn subprobability_mass_limit(
    mu: &[Q],
    nu: &[Q],
    nu_mass: &Mass,
    coeff: impl Fn(usize) -> (Q, Q),
    horizon: usize,
    tol: f64,
) -> MassLimitReport {
    let mut masses = Vec::with_capacity(horizon);
    let mut sup_gaps = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        let (c, dn) = coeff(n);
        masses.push(nu_mass.as_ref().map(|m| &c + &dn * m).or_else(|| dn.is_zero().then(|| c.clone())));
        let mut g = Q::zero();
        for (a, b) in mu.iter().zip(nu) {
            let x = (&c * a + &dn * b - a).abs();
            if x > g {
                g = x;
            }
        }
        sup_gaps.push(g);
    }
    let last = |v: &[Q]| v.last().and_then(|q| q.to_f64()).unwrap_or(f64::INFINITY);
    let subprobability = masses.iter().all(|m| m.as_ref().is_some_and(|m| *m <= Q::one()));
    let cylinders_converge = last(&sup_gaps) < tol;
    let masses_converge = masses
        .last()
        .and_then(|m| m.as_ref())
        .is_some_and(|m| (m - Q::one()).abs().to_f64().unwrap_or(f64::INFINITY) < tol);
    MassLimitReport {
        violation: subprobability && cylinders_converge && !masses_converge,
        masses,
        sup_gaps,
        subprobability,
        cylinders_converge,
        masses_converge,
    }
}

/// Values `p_v^{(m)}` of a measure on the given cylinders.
pub fn cylinder_values(m: &MeasureSpec, cylinders: &[Cylinder]) -> Result<Vec<Q>> {
    cylinders
        .iter()
        .map(|c| m.p_exact(c.level, c.vertex).ok_or_else(|| Error::ParamOutOfRange("measure is not exact".into())))
        .collect()
}

/// A cylinder of the locally compact set `X` in the rank-2 example: its path
/// stays at `w_1` on levels `0..j` and at `w_2` on levels `j..=m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rank2Cylinder {
    pub entry: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rank2Report {
    /// `μ_n(X)` for `n = 1..=n_max`.
    pub masses: Vec<Q>,
    /// `μ̂(C_i)` for `i = 1..=n_max`.
    pub block_masses: Vec<Q>,
}

/// The rank-2 diagram with `F = [[2,0],[1,2]]` on `{1, 2}` and the measure
/// `μ` on the odometer through `w_2`.
pub struct Rank2Example {
    d: Diagram,
    mu: MeasureSpec,
}

const W1: Vertex = 1;
const W2: Vertex = 2;

impl Rank2Example {
    pub fn new() -> Result<Self> {
        let d = build_family(&FamilySpec::Rank2Example)?;
        let a = d.entry(0, W2, W2)?;
        Ok(Rank2Example { d, mu: MeasureSpec::odometer(Seq::constant(a), W2) })
    }

    /// `μ̂(U) = μ([e_2^{(m)}])` for a cylinder of length `m` ending at `w_2`.
    pub fn mu_hat(&self, c: &Rank2Cylinder) -> Q {
        self.mu.p_exact(c.length, W2).unwrap_or_else(Q::zero)
    }

    /// `μ̂(C_i)`: paths through `w_1` on levels `0..i` into `w_2^{(i)}`.
    pub fn block_mass(&self, i: usize) -> Result<Q> {
        let mut paths = BigInt::one();
        for k in 0..i.saturating_sub(1) {
            paths *= self.d.entry(k, W1, W1)?;
        }
        paths *= self.d.entry(i - 1, W2, W1)?;
        Ok(Q::from_integer(paths) * self.mu.p_exact(i, W2).unwrap_or_else(Q::zero))
    }

    /// Weight of `C_i` in `μ_n`.
    pub fn weight(n: usize, i: usize) -> Q {
        match i {
            0 => Q::one(),
            i if i <= n => Q::new(BigInt::one(), BigInt::from(n + 1 - i)),
            _ => Q::zero(),
        }
    }

    pub fn mu_n(&self, n: usize, c: &Rank2Cylinder) -> Q {
        Self::weight(n, c.entry) * self.mu_hat(c)
    }

    /// The limit `μ`, carried by `C_0`.
    pub fn mu(&self, c: &Rank2Cylinder) -> Q {
        if c.entry == 0 {
            self.mu_hat(c)
        } else {
            Q::zero()
        }
    }

    pub fn mass(&self, n: usize) -> Result<Q> {
        let mut s = Q::one();
        for i in 1..=n {
            s += Self::weight(n, i) * self.block_mass(i)?;
        }
        Ok(s)
    }
}

/// Exact masses `μ_n(X)` and block masses for `n = 1..=n_max`.
pub fn rank2_counterexample(n_max: usize) -> Result<Rank2Report> {
    let ex = Rank2Example::new()?;
    let block_masses = (1..=n_max).map(|i| ex.block_mass(i)).collect::<Result<Vec<_>>>()?;
    let masses = (1..=n_max).map(|n| ex.mass(n)).collect::<Result<Vec<_>>>()?;
    Ok(Rank2Report { masses, block_masses })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank2_masses() {
        let r = rank2_counterexample(3).unwrap();
        assert_eq!(r.masses[1], Q::new(7.into(), 4.into()));
        assert!(r.block_masses.iter().all(|m| *m == Q::new(1.into(), 2.into())));
    }

    #[test]
    fn renewal_truncations() {
        let d = build_family(&FamilySpec::Leslie { b: Seq::constant(1), s: Seq::constant(1) }).unwrap();
        let target = MeasureSpec::StationaryEigen(crate::perron::leslie_constant_spec(1, 1).normalized().unwrap());
        let ks: Vec<usize> = (2..=25).collect();
        let r = truncation_measure_convergence(&d, &target, &ks, &[Cylinder::vertex(1)], 1e-6).unwrap();
        assert!(r.converged, "{:?}", r.trajectories[0].gaps.last());
        assert!((r.lambdas[0] - (1.0 + libm::sqrt(5.0)) / 2.0).abs() < 1e-9);
    }
}
