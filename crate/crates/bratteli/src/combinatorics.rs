//! Tower heights, finite paths and stochastic incidence matrices.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::diagram::{Diagram, Row, Vertex};
use crate::{Error, Result, Q};

/// Default cap on `n - m` for explicit path enumeration.
pub const DEPTH_CAP: usize = 8;
/// Cap on the number of vertices held in one level of a height computation.
pub const MAX_LEVEL_VERTICES: usize = 4_000_000;

/// Anything with finite rows `F_n(v, ·)`: diagrams and their subdiagrams.
pub trait RowSource {
    fn source_row(&self, n: usize, v: Vertex) -> Result<Row>;
}

impl RowSource for Diagram {
    fn source_row(&self, n: usize, v: Vertex) -> Result<Row> {
        self.row(n, v)
    }
}

/// Exact heights `H^{(n)}` on a finite window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightVector {
    pub level: usize,
    pub window: (Vertex, Vertex),
    pub values: BTreeMap<Vertex, BigUint>,
}

/// Heights on the union of upper cones of a set of target vertices, for all
/// levels `0..=n`.
#[derive(Clone, Debug, Default)]
pub struct HeightTable {
    levels: Vec<BTreeMap<Vertex, BigUint>>,
}

impl HeightTable {
    /// `targets[n]` lists the vertices of level `n` whose heights are needed.
    pub fn build<R: RowSource + ?Sized>(r: &R, targets: &[BTreeSet<Vertex>]) -> Result<Self> {
        let top = targets.len();
        if top == 0 {
            return Ok(HeightTable::default());
        }
        let mut needed: Vec<BTreeSet<Vertex>> = targets.to_vec();
        let mut rows: Vec<BTreeMap<Vertex, Row>> = vec_of(top.saturating_sub(1));
        for j in (1..top).rev() {
            let mut below = core::mem::take(&mut needed[j - 1]);
            for &v in &needed[j] {
                let row = r.source_row(j - 1, v)?;
                below.extend(row.iter().map(|&(w, _)| w));
                rows[j - 1].insert(v, row);
                if below.len() > MAX_LEVEL_VERTICES {
                    return Err(Error::WindowOverflow(format!(
                        "more than {} vertices needed at level {}",
                        MAX_LEVEL_VERTICES,
                        j - 1
                    )));
                }
            }
            needed[j - 1] = below;
        }
        let mut levels: Vec<BTreeMap<Vertex, BigUint>> = Vec::with_capacity(top);
        levels.push(needed[0].iter().map(|&v| (v, BigUint::one())).collect());
        for j in 1..top {
            let prev = &levels[j - 1];
            let mut cur = BTreeMap::new();
            for &v in &needed[j] {
                let mut h = BigUint::zero();
                for &(w, c) in &rows[j - 1][&v] {
                    h += &prev[&w] * BigUint::from(c);
                }
                cur.insert(v, h);
            }
            levels.push(cur);
        }
        Ok(HeightTable { levels })
    }

    /// Heights at the single target level `n` for the given vertices.
    pub fn for_level<R: RowSource + ?Sized>(r: &R, n: usize, vs: &[Vertex]) -> Result<Self> {
        let mut t = vec_of::<BTreeSet<Vertex>>(n + 1);
        t[n].extend(vs.iter().copied());
        Self::build(r, &t)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn get(&self, n: usize, v: Vertex) -> Option<&BigUint> {
        self.levels.get(n)?.get(&v)
    }

    pub fn require(&self, n: usize, v: Vertex) -> Result<&BigUint> {
        self.get(n, v).ok_or_else(|| Error::WindowTooSmall(format!("no height for vertex {} at level {}", v, n)))
    }

    pub fn level(&self, n: usize) -> Option<&BTreeMap<Vertex, BigUint>> {
        self.levels.get(n)
    }
}

fn vec_of<T: Default>(n: usize) -> Vec<T> {
    (0..n).map(|_| T::default()).collect()
}

/// Exact heights `H_v^{(n)}` for `v ∈ V_n ∩ [lo, hi]`.
pub fn heights(d: &Diagram, n: usize, window: (Vertex, Vertex)) -> Result<HeightVector> {
    let Some((lo, hi)) = d.vertex_set(n).clip(window.0, window.1) else {
        return Ok(HeightVector { level: n, window, values: BTreeMap::new() });
    };
    let vs: Vec<Vertex> = (lo..=hi).collect();
    let mut t = HeightTable::for_level(d, n, &vs)?;
    Ok(HeightVector { level: n, window: (lo, hi), values: t.levels.swap_remove(n) })
}

/// One edge of a finite path: from `source ∈ V_level` to `range ∈ V_{level+1}`,
/// the `index`-th of the `f_{range,source}` parallel edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub level: usize,
    pub source: Vertex,
    pub range: Vertex,
    pub index: u64,
}

/// A finite path `e_m, ..., e_{n-1}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FinitePath {
    pub edges: Vec<Edge>,
}

impl FinitePath {
    pub fn source(&self) -> Option<Vertex> {
        self.edges.first().map(|e| e.source)
    }

    pub fn range(&self) -> Option<Vertex> {
        self.edges.last().map(|e| e.range)
    }

    pub fn start_level(&self) -> Option<usize> {
        self.edges.first().map(|e| e.level)
    }

    pub fn end_level(&self) -> Option<usize> {
        self.edges.last().map(|e| e.level + 1)
    }

    /// Checks concatenation and edge indices against `d`.
    pub fn validate(&self, d: &Diagram) -> Result<()> {
        for (k, e) in self.edges.iter().enumerate() {
            if k > 0 {
                let p = &self.edges[k - 1];
                if p.range != e.source || p.level + 1 != e.level {
                    return Err(Error::InvalidPath(format!("edges {} and {} do not concatenate", k - 1, k)));
                }
            }
            if e.index >= d.entry(e.level, e.range, e.source)? {
                return Err(Error::InvalidPath(format!("edge index {} out of range", e.index)));
            }
        }
        Ok(())
    }
}

/// A cylinder set: all infinite paths extending a finite path.
pub type CylinderSpec = FinitePath;

/// All finite paths from level `m` to `v ∈ V_n`.
pub fn enumerate_paths(d: &Diagram, m: usize, target: (usize, Vertex)) -> Result<Vec<FinitePath>> {
    enumerate_paths_capped(d, m, target, DEPTH_CAP)
}

pub fn enumerate_paths_capped(d: &Diagram, m: usize, target: (usize, Vertex), cap: usize) -> Result<Vec<FinitePath>> {
    let (n, v) = target;
    if n < m {
        return Err(Error::InvalidPath(format!("target level {} below start level {}", n, m)));
    }
    if n - m > cap {
        return Err(Error::DepthCapExceeded { depth: n - m, cap });
    }
    if !d.vertex_set(n).contains(v) {
        return Err(Error::VertexOutOfSet { level: n, vertex: v });
    }
    // Built top-down: each entry holds e_{n-1}, ..., e_j.
    let mut partial: Vec<(Vertex, Vec<Edge>)> = alloc::vec![(v, Vec::new())];
    for j in (m..n).rev() {
        let mut next = Vec::new();
        for (u, edges) in partial {
            for (w, c) in d.row(j, u)? {
                for i in 0..c {
                    let mut e = edges.clone();
                    e.push(Edge { level: j, source: w, range: u, index: i });
                    next.push((w, e));
                }
            }
        }
        partial = next;
    }
    let mut out: Vec<FinitePath> = partial
        .into_iter()
        .map(|(_, mut e)| {
            e.reverse();
            FinitePath { edges: e }
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Brute-force count of paths from `V_0` to `v ∈ V_n`, one edge at a time.
pub fn height_oracle(d: &Diagram, n: usize, v: Vertex) -> Result<BigUint> {
    height_oracle_capped(d, n, v, DEPTH_CAP)
}

pub fn height_oracle_capped(d: &Diagram, n: usize, v: Vertex, cap: usize) -> Result<BigUint> {
    if n > cap {
        return Err(Error::DepthCapExceeded { depth: n, cap });
    }
    fn walk(d: &Diagram, j: usize, u: Vertex, count: &mut u64) -> Result<()> {
        if j == 0 {
            *count += 1;
            return Ok(());
        }
        for (w, c) in d.row(j - 1, u)? {
            for _ in 0..c {
                walk(d, j - 1, w, count)?;
            }
        }
        Ok(())
    }
    let mut count = 0u64;
    walk(d, n, v, &mut count)?;
    Ok(BigUint::from(count))
}

/// Row `v` of the stochastic matrix `Q_n`: `q_{v,w} = f_{v,w} H_w^{(n)} / H_v^{(n+1)}`.
pub fn stochastic_row<R: RowSource + ?Sized>(
    r: &R,
    n: usize,
    v: Vertex,
    heights: &HeightTable,
) -> Result<Vec<(Vertex, Q)>> {
    let hv = heights.require(n + 1, v)?;
    let denom = BigInt::from(hv.clone());
    let mut out = Vec::new();
    for (w, c) in r.source_row(n, v)? {
        let hw = heights.require(n, w)?;
        out.push((w, Q::new(BigInt::from(hw * BigUint::from(c)), denom.clone())));
    }
    Ok(out)
}
