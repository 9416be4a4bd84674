//! Verdicts for series of nonnegative terms and the certificates behind them.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{ToPrimitive, Zero};

use crate::Q;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertificateKind {
    /// Terms are bounded below by a positive constant from some index on.
    TermsBoundedBelow,
    /// Terms dominate a series known to diverge.
    Comparison,
    /// A single level already contributes an infinite sum.
    LevelDivergence,
    /// Ratios of consecutive terms stay above one.
    RatioTest,
    /// Perron value of the subdiagram is below the row sums of the parent.
    PerronBelowRowSums,
}

impl CertificateKind {
    pub fn name(&self) -> &'static str {
        match self {
            CertificateKind::TermsBoundedBelow => "terms bounded below",
            CertificateKind::Comparison => "comparison",
            CertificateKind::LevelDivergence => "level divergence",
            CertificateKind::RatioTest => "ratio test",
            CertificateKind::PerronBelowRowSums => "Perron value below row sums",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// Level (or term index) where the certificate applies.
    pub level: usize,
    pub detail: String,
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.level, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// The series converges; its value lies in `[partial, partial + tail_bound]`.
    Finite {
        partial: Q,
        tail_bound: f64,
        depth: usize,
    },
    Infinite(Certificate),
    Inconclusive {
        depth: usize,
        note: String,
    },
}

impl Verdict {
    pub fn is_finite(&self) -> bool {
        matches!(self, Verdict::Finite { .. })
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Verdict::Infinite(_))
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Verdict::Inconclusive { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Finite { .. } => "Finite",
            Verdict::Infinite(_) => "Infinite",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }

    /// Midpoint estimate of a finite value.
    pub fn value(&self) -> Option<f64> {
        match self {
            Verdict::Finite { partial, tail_bound, .. } => {
                Some(partial.to_f64().unwrap_or(f64::NAN) + tail_bound / 2.0)
            }
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Finite { partial, tail_bound, depth } => write!(
                f,
                "Finite(value={:.15}, tail_bound={:e}, depth={})",
                partial.to_f64().unwrap_or(f64::NAN),
                tail_bound,
                depth
            ),
            Verdict::Infinite(c) => write!(f, "Infinite({})", c),
            Verdict::Inconclusive { depth, note } => {
                write!(f, "Inconclusive(depth={}, {})", depth, note)
            }
        }
    }
}

/// Partial sums `s_N = base + Σ_{n<N} terms[n]`, one per prefix length `N = 1..`.
pub fn partial_sums(base: &Q, terms: &[Q]) -> Vec<Q> {
    let mut acc = base.clone();
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        acc += t;
        out.push(acc.clone());
    }
    out
}

pub fn is_nondecreasing(xs: &[Q]) -> bool {
    xs.windows(2).all(|w| w[0] <= w[1])
}

pub fn all_nonnegative(xs: &[Q]) -> bool {
    xs.iter().all(|x| *x >= Q::zero())
}
