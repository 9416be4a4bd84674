//! Ordered diagrams, truncated Vershik maps and wandering cylinder sets.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::{Edge, FinitePath};
use crate::diagram::{build_family, Diagram, FamilySpec, Vertex};
use crate::seq::Seq;
use crate::{Error, Result};

/// Caps of the zero-sum search over `{L_0, ..., L_N}`.
pub const SUBSET_MAX_N: usize = 24;
pub const SUBSET_MAX_REPEAT: u32 = 8;
pub const SUBSET_MAX_ABS: i128 = 1 << 32;
const SUBSET_MAX_STATES: usize = 1 << 20;

/// Ordered list of `(source, index)` pairs in `r^{-1}(v)` for `v ∈ V_{n+1}`.
pub type OrderFn = Arc<dyn Fn(usize, Vertex) -> Result<Vec<(Vertex, u64)>> + Send + Sync>;

/// A diagram with a total order on every fiber `r^{-1}(v)`.
#[derive(Clone)]
pub struct OrderedDiagram {
    base: Diagram,
    order: Option<OrderFn>,
}

impl core::fmt::Debug for OrderedDiagram {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "OrderedDiagram({})", self.base.name())
    }
}

/// A finite prefix `e_0, ..., e_{D-1}` of an infinite path.
pub type TruncatedPath = FinitePath;

impl OrderedDiagram {
    /// Left-to-right order: by source vertex, then by edge index.
    pub fn left_to_right(base: Diagram) -> Self {
        OrderedDiagram { base, order: None }
    }

    pub fn with_order(base: Diagram, order: OrderFn) -> Self {
        OrderedDiagram { base, order: Some(order) }
    }

    pub fn base(&self) -> &Diagram {
        &self.base
    }

    /// The ordered fiber over `v ∈ V_{n+1}`.
    pub fn fiber(&self, n: usize, v: Vertex) -> Result<Vec<(Vertex, u64)>> {
        if let Some(o) = &self.order {
            return o(n, v);
        }
        let mut row = self.base.row(n, v)?;
        row.sort();
        Ok(row.into_iter().flat_map(|(w, c)| (0..c).map(move |i| (w, i))).collect())
    }

    fn position(&self, e: &Edge) -> Result<(usize, Vec<(Vertex, u64)>)> {
        let f = self.fiber(e.level, e.range)?;
        let k = f
            .iter()
            .position(|&(w, i)| w == e.source && i == e.index)
            .ok_or_else(|| Error::InvalidPath(format!("edge {:?} is not in its fiber", e)))?;
        Ok((k, f))
    }

    /// The minimal (or maximal) path from `V_0` to `v ∈ V_n`.
    pub fn extreme_path(&self, n: usize, v: Vertex, maximal: bool) -> Result<Vec<Edge>> {
        let mut edges = Vec::with_capacity(n);
        let mut cur = v;
        for j in (0..n).rev() {
            let f = self.fiber(j, cur)?;
            let pick = if maximal { f.last() } else { f.first() };
            let &(w, i) =
                pick.ok_or_else(|| Error::InvalidPath(format!("vertex {} at level {} has empty fiber", cur, j + 1)))?;
            edges.push(Edge { level: j, source: w, range: cur, index: i });
            cur = w;
        }
        edges.reverse();
        Ok(edges)
    }

    fn check(&self, p: &TruncatedPath) -> Result<()> {
        if p.edges.is_empty() || p.start_level() != Some(0) {
            return Err(Error::InvalidPath("truncated paths start at level 0 and have depth >= 1".into()));
        }
        p.validate(&self.base)
    }

    fn step(&self, p: &TruncatedPath, forward: bool) -> Result<TruncatedPath> {
        self.check(p)?;
        for (m, e) in p.edges.iter().enumerate() {
            let (k, f) = self.position(e)?;
            let next = if forward { f.get(k + 1) } else { k.checked_sub(1).and_then(|j| f.get(j)) };
            if let Some(&(w, i)) = next {
                let mut edges = self.extreme_path(m, w, !forward)?;
                edges.push(Edge { level: m, source: w, range: e.range, index: i });
                edges.extend_from_slice(&p.edges[m + 1..]);
                return Ok(FinitePath { edges });
            }
        }
        Err(if forward { Error::MaximalWithinDepth } else { Error::MinimalWithinDepth })
    }

    /// Vershik successor: the first non-maximal edge is replaced by its
    /// successor and preceded by the minimal path to its source.
    pub fn successor(&self, p: &TruncatedPath) -> Result<TruncatedPath> {
        self.step(p, true)
    }

    pub fn predecessor(&self, p: &TruncatedPath) -> Result<TruncatedPath> {
        self.step(p, false)
    }

    /// A path from `i ∈ V_0` whose outgoing edge at each level is chosen uniformly.
    pub fn random_path<R: Rng>(&self, i: Vertex, depth: usize, rng: &mut R) -> Result<TruncatedPath> {
        let mut edges = Vec::with_capacity(depth);
        let mut cur = i;
        for n in 0..depth {
            let col = self.base.column(n, cur)?;
            let out: Vec<(Vertex, u64)> = col.entries.iter().flat_map(|&(v, c)| (0..c).map(move |k| (v, k))).collect();
            if out.is_empty() {
                return Err(Error::InvalidPath(format!("vertex {} at level {} has no outgoing edge", cur, n)));
            }
            let (v, k) = out[rng.random_range(0..out.len())];
            edges.push(Edge { level: n, source: cur, range: v, index: k });
            cur = v;
        }
        Ok(FinitePath { edges })
    }
}

/// `B(t_n)` with the left-to-right order; only `t_n > 0` is required.
pub fn ordered_bt(t: &Seq) -> Result<OrderedDiagram> {
    Ok(OrderedDiagram::left_to_right(build_family(&FamilySpec::BtGeneral { t: t.clone() })?))
}

/// `L_0 = 2 t_0` and `L_n = 2 (t_n - Σ_{k<n} t_k)`.
pub fn l_sequence(t: &Seq, n: usize) -> Result<Vec<i128>> {
    let mut out = Vec::with_capacity(n + 1);
    let mut sum: i128 = 0;
    for k in 0..=n {
        let tk = t.at_u64(k)? as i128;
        out.push(2 * (tk - sum));
        sum += tk;
    }
    Ok(out)
}

/// Whether `L_n > 0` for every `n`, decided from the descriptor.
pub fn l_positive_for_all(t: &Seq) -> bool {
    fn tail_ok(tail: &Seq, prefix: u128) -> bool {
        match tail {
            // t_n - Σ_{k<n} t_k = c ρ^j - c(ρ^j - 1)/(ρ - 1) - S is nondecreasing in j for ρ >= 2.
            Seq::Geometric { c, rho } if *rho >= 2 => (*c as u128) > prefix,
            _ => false,
        }
    }
    match t {
        Seq::Geometric { .. } => tail_ok(t, 0),
        Seq::List { values, tail } => {
            let mut s: u128 = 0;
            for &v in values {
                if (v as u128) <= s {
                    return false;
                }
                s += v as u128;
            }
            tail_ok(tail, s)
        }
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WanderingVerdict {
    /// No finite sum of `L`'s vanishes: every `[i]` is wandering.
    Certified { reason: String },
    /// `witness` lists `(n, multiplicity)` with `Σ multiplicity · L_n = 0`.
    NotCertified { witness: Option<Vec<(usize, u32)>>, reason: String },
}

impl WanderingVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, WanderingVerdict::Certified { .. })
    }
}

/// Certificate that all cylinders `[i]` are wandering, or a vanishing sum
/// of `L`'s found by a capped search.
pub fn wandering_certificate(t: &Seq, n: usize) -> Result<WanderingVerdict> {
    let ls = l_sequence(t, n.min(SUBSET_MAX_N))?;
    if l_positive_for_all(t) {
        return Ok(WanderingVerdict::Certified { reason: String::from("L_n > 0 for every n") });
    }
    if let Some(k) = ls.iter().position(|&l| l == 0) {
        return Ok(WanderingVerdict::NotCertified {
            witness: Some(alloc::vec![(k, 1)]),
            reason: format!("L_{} = 0", k),
        });
    }
    if let Some(w) = zero_sum(&ls) {
        return Ok(WanderingVerdict::NotCertified { witness: Some(w), reason: String::from("vanishing sum of L's") });
    }
    let reason = if n > SUBSET_MAX_N {
        format!("no vanishing sum among L_0..L_{} within the search caps", SUBSET_MAX_N)
    } else if ls.iter().all(|&l| l > 0) {
        format!("L_0..L_{} are positive but positivity of all L_n is not established", n)
    } else {
        String::from("no vanishing sum within the search caps")
    };
    Ok(WanderingVerdict::NotCertified { witness: None, reason })
}

/// A nonempty multiset of the values with repetition at most
/// `SUBSET_MAX_REPEAT` summing to zero.
fn zero_sum(ls: &[i128]) -> Option<Vec<(usize, u32)>> {
    let mut states: BTreeMap<i128, Vec<u32>> = BTreeMap::new();
    states.insert(0, alloc::vec![0; ls.len()]);
    for (k, &l) in ls.iter().enumerate() {
        let snapshot: Vec<(i128, Vec<u32>)> = states.iter().map(|(s, c)| (*s, c.clone())).collect();
        for (s, counts) in snapshot {
            for r in 1..=SUBSET_MAX_REPEAT {
                let v = s + l * r as i128;
                if v.abs() > SUBSET_MAX_ABS {
                    break;
                }
                let mut c = counts.clone();
                c[k] = r;
                if v == 0 {
                    return Some(c.iter().enumerate().filter(|x| *x.1 > 0).map(|(i, &m)| (i, m)).collect());
                }
                if states.len() < SUBSET_MAX_STATES {
                    states.entry(v).or_insert(c);
                }
            }
        }
    }
    None
}

/// Whether the successor of every sampled non-maximal path from `i` starts
/// at `i + 2`.
pub fn source_shift_check(t: &Seq, i: Vertex, samples: usize, depth: usize, seed: u64) -> Result<bool> {
    let od = ordered_bt(t)?;
    for s in 0..samples {
        let mut rng = sample_rng(seed, s);
        let p = od.random_path(i, depth, &mut rng)?;
        match od.successor(&p) {
            Ok(q) => {
                if q.source() != Some(i + 2) {
                    return Ok(false);
                }
            }
            Err(Error::MaximalWithinDepth) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WanderingReport {
    /// No sampled orbit came back to the source vertex.
    pub wandering: bool,
    pub samples: usize,
    /// Orbits cut short by an all-maximal prefix.
    pub skipped: usize,
    pub returns: usize,
    /// Every one-step displacement was one of `L_0, ..., L_{D-1}`.
    pub displacements_in_l: bool,
    /// Parity of the source was preserved along every orbit.
    pub parity_preserved: bool,
    /// Predecessor undid every successor step.
    pub inverse_ok: bool,
}

/// Iterates the truncated Vershik map up to `k_max` times on sampled paths
/// from `i` and records returns to `i`.
pub fn empirical_wandering(
    od: &OrderedDiagram,
    t: &Seq,
    i: Vertex,
    k_max: usize,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<WanderingReport> {
    let ls = l_sequence(t, depth.saturating_sub(1))?;
    let mut r = WanderingReport {
        wandering: true,
        samples,
        skipped: 0,
        returns: 0,
        displacements_in_l: true,
        parity_preserved: true,
        inverse_ok: true,
    };
    for s in 0..samples {
        let mut rng = sample_rng(seed, s);
        let mut p = od.random_path(i, depth, &mut rng)?;
        for _ in 0..k_max {
            let q = match od.successor(&p) {
                Ok(q) => q,
                Err(Error::MaximalWithinDepth) => {
                    r.skipped += 1;
                    break;
                }
                Err(e) => return Err(e),
            };
            if od.predecessor(&q).as_ref() != Ok(&p) {
                r.inverse_ok = false;
            }
            let (a, b) = (p.source().unwrap_or(0), q.source().unwrap_or(0));
            if !ls.contains(&((b - a) as i128)) {
                r.displacements_in_l = false;
            }
            if (b - a).rem_euclid(2) != 0 {
                r.parity_preserved = false;
            }
            if b == i {
                r.returns += 1;
                r.wandering = false;
                break;
            }
            p = q;
        }
    }
    Ok(r)
}
