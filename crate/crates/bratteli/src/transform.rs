//! The 0-1 procedure: edges of a diagram become the vertices of a diagram
//! with 0-1 incidence matrices.
//!
//! Edges of `E_n` are numbered canonically. With `V_{n+1}` identified with
//! `ℕ₀`, the fiber `r^{-1}(l)` receives the numbers
//! `Σ_{i<l} |r^{-1}(i)|, ..., Σ_{i<=l} |r^{-1}(i)| - 1` in fiber order; over
//! `ℤ` the fiber of `-l` receives the block ending just below
//! `-Σ_{i=1}^{l-1} |r^{-1}(-i)|`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::combinatorics::{Edge, FinitePath, HeightTable};
use crate::diagram::{Column, Diagram, Flags, Row, Vertex, VertexSet};
use crate::dynamics::OrderedDiagram;
use crate::extension::{EdgeSubdiagram, VertexSubdiagram};
use crate::measure::{MeasureSpec, PVectors};
use crate::{Error, Result, Q};

/// Longest walk along a level when locating an edge number.
pub const WALK_CAP: i64 = 1 << 22;

/// Canonical numbering of the edges of one ordered diagram.
#[derive(Clone, Debug)]
pub struct EdgeNumbering {
    parent: OrderedDiagram,
}

fn fiber_len(od: &OrderedDiagram, n: usize, v: Vertex) -> Result<i64> {
    Ok(od.fiber(n, v)?.len() as i64)
}

impl EdgeNumbering {
    pub fn new(parent: OrderedDiagram) -> Self {
        EdgeNumbering { parent }
    }

    pub fn parent(&self) -> &OrderedDiagram {
        &self.parent
    }

    /// Set of edge numbers of `E_n`.
    pub fn edge_set(&self, n: usize) -> Result<VertexSet> {
        let d = self.parent.base();
        Ok(match d.vertex_set(n + 1) {
            VertexSet::Finite { lo, hi } => {
                let mut total = 0i64;
                for v in lo..=hi {
                    total += fiber_len(&self.parent, n, v)?;
                }
                VertexSet::Finite { lo: 0, hi: total - 1 }
            }
            VertexSet::Naturals { .. } => VertexSet::Naturals { first: 0 },
            VertexSet::Integers => VertexSet::Integers,
        })
    }

    /// First number of the block of `r^{-1}(v)`, `v ∈ V_{n+1}`.
    pub fn offset(&self, n: usize, v: Vertex) -> Result<i64> {
        let set = self.parent.base().vertex_set(n + 1);
        if !set.contains(v) {
            return Err(Error::VertexOutOfSet { level: n + 1, vertex: v });
        }
        let origin = set.first().unwrap_or(0);
        let mut s = 0i64;
        if v >= origin {
            for u in origin..v {
                s += fiber_len(&self.parent, n, u)?;
            }
        } else {
            for u in v..origin {
                s -= fiber_len(&self.parent, n, u)?;
            }
        }
        Ok(s)
    }

    /// The edge of `E_n` with number `k`.
    pub fn edge(&self, n: usize, k: i64) -> Result<Edge> {
        let set = self.parent.base().vertex_set(n + 1);
        let origin = set.first().unwrap_or(0);
        let mut v = origin;
        let mut start = 0i64;
        let mut steps = 0i64;
        loop {
            steps += 1;
            if steps > WALK_CAP {
                return Err(Error::WindowOverflow(format!("edge number {} at level {}", k, n)));
            }
            if !set.contains(v) {
                return Err(Error::VertexOutOfSet { level: n, vertex: k });
            }
            let len = fiber_len(&self.parent, n, v)?;
            if k < start {
                v -= 1;
                if !set.contains(v) {
                    return Err(Error::VertexOutOfSet { level: n, vertex: k });
                }
                start -= fiber_len(&self.parent, n, v)?;
                continue;
            }
            if k < start + len {
                let (w, i) = self.parent.fiber(n, v)?[(k - start) as usize];
                return Ok(Edge { level: n, source: w, range: v, index: i });
            }
            start += len;
            v += 1;
        }
    }

    /// The number of an edge.
    pub fn number(&self, e: &Edge) -> Result<i64> {
        let f = self.parent.fiber(e.level, e.range)?;
        let pos = f
            .iter()
            .position(|&(w, i)| w == e.source && i == e.index)
            .ok_or_else(|| Error::InvalidPath(format!("edge {:?} is not in its fiber", e)))?;
        Ok(self.offset(e.level, e.range)? + pos as i64)
    }

    /// Numbers of the edges of `E_n` with range `v`.
    pub fn block(&self, n: usize, v: Vertex) -> Result<(i64, i64)> {
        let o = self.offset(n, v)?;
        Ok((o, o + fiber_len(&self.parent, n, v)? - 1))
    }
}

/// The canonical image `B̃` together with the edge/vertex bijection.
#[derive(Clone, Debug)]
pub struct ZeroOneImage {
    pub image: Diagram,
    pub numbering: EdgeNumbering,
}

/// The canonical 0-1 image of an ordered diagram.
pub fn zero_one(od: &OrderedDiagram) -> ZeroOneImage {
    let numbering = EdgeNumbering::new(od.clone());
    let base = od.base().clone();
    let (nb_sets, nb_rows, nb_cols) = (numbering.clone(), numbering.clone(), numbering.clone());
    let base_cols = base.clone();
    let mut image = Diagram::from_rows(
        format!("0-1 image of {}", base.name()),
        move |n| nb_sets.edge_set(n).unwrap_or(VertexSet::Finite { lo: 0, hi: -1 }),
        move |n, k| {
            // k is an edge of E_{n+1}; it follows every edge of E_n ending at its source.
            let e = nb_rows.edge(n + 1, k)?;
            let (lo, hi) = nb_rows.block(n, e.source)?;
            Ok((lo..=hi).map(|j| (j, 1)).collect())
        },
    )
    .with_columns(move |n, k| {
        let e = nb_cols.edge(n, k)?;
        let col = base_cols.column(n + 1, e.range)?;
        let mut entries = Vec::new();
        for (v, _) in col.entries {
            let off = nb_cols.offset(n + 1, v)?;
            for (p, &(w, _)) in nb_cols.parent().fiber(n + 1, v)?.iter().enumerate() {
                if w == e.range {
                    entries.push((off + p as i64, 1));
                }
            }
        }
        entries.sort();
        Ok(Column { entries, tail: None })
    })
    .with_flags(Flags { stationary: base.flags().stationary, horizontally_stationary: false });
    if let Some(d) = base.depth() {
        image = image.with_depth(d.saturating_sub(1));
    }
    ZeroOneImage { image, numbering }
}

impl ZeroOneImage {
    /// A parent path `e_0, ..., e_n` becomes the image path through the
    /// vertices `#e_0, ..., #e_n`.
    pub fn image_path(&self, p: &FinitePath) -> Result<FinitePath> {
        let ks: Vec<i64> = p.edges.iter().map(|e| self.numbering.number(e)).collect::<Result<_>>()?;
        Ok(FinitePath {
            edges: ks
                .windows(2)
                .enumerate()
                .map(|(n, w)| Edge { level: n, source: w[0], range: w[1], index: 0 })
                .collect(),
        })
    }

    /// Inverse of `image_path`; `first` is the vertex of `Ṽ_0` when the
    /// image path is empty.
    pub fn parent_path(&self, p: &FinitePath, first: Vertex) -> Result<FinitePath> {
        let mut ks = Vec::with_capacity(p.edges.len() + 1);
        ks.push(p.source().unwrap_or(first));
        ks.extend(p.edges.iter().map(|e| e.range));
        let edges = ks.iter().enumerate().map(|(n, &k)| self.numbering.edge(n, k)).collect::<Result<Vec<_>>>()?;
        let q = FinitePath { edges };
        q.validate(self.numbering.parent().base())?;
        Ok(q)
    }

    /// `ν = μ ∘ ψ^{-1}`: the image vertex `k ∈ Ṽ_n` carries `p_{r(e)}^{(n+1)}`.
    pub fn pushforward(&self, m: &MeasureSpec) -> Result<MeasureSpec> {
        if !m.is_exact() {
            return Err(Error::ParamOutOfRange("pushforward needs an exact measure".into()));
        }
        let nb = self.numbering.clone();
        let m2 = m.clone();
        let p = move |n: usize, k: Vertex| -> Q {
            match nb.edge(n, k) {
                Ok(e) => m2.p_exact(n + 1, e.range).unwrap_or_else(Q::zero),
                Err(_) => Q::zero(),
            }
        };
        Ok(MeasureSpec::PVectors(PVectors::new(
            format!("pushforward to {}", self.image.name()),
            self.numbering.edge_set(0)?,
            p,
        )))
    }

    /// The vertex subdiagram of the image whose vertices are the retained
    /// edges of an edge subdiagram (the first `f̄_{v,w}` of each parallel class).
    pub fn retained_vertices(&self, sub: &EdgeSubdiagram) -> Result<VertexSubdiagram> {
        let nb = self.numbering.clone();
        let s = sub.sub().clone();
        let parent = self.numbering.parent().base().clone();
        let stationary = parent.flags().stationary;
        for n in 0..=crate::extension::SAMPLE_LEVELS {
            if !parent.vertex_set(n + 1).is_finite() {
                return Err(Error::InvalidFamilyParams("retained edge sets need finite levels".into()));
            }
        }
        VertexSubdiagram::new(
            self.image.clone(),
            format!("retained edges of {}", s.name()),
            move |n| {
                let mut out = BTreeSet::new();
                for v in parent.vertex_set(n + 1).members().unwrap_or_default() {
                    let Ok(row) = s.row(n, v) else { continue };
                    for (w, c) in row {
                        for i in 0..c {
                            if let Ok(k) = nb.number(&Edge { level: n, source: w, range: v, index: i }) {
                                out.insert(k);
                            }
                        }
                    }
                }
                out.into_iter().collect()
            },
            stationary,
        )
    }
}

/// `|Ṽ_n| = Σ_{v,w} f^{(n)}_{v,w}` and `|Ẽ_n| = Σ f^{(n+1)}_{v,u} f^{(n)}_{u,w}`
/// for a parent with finite levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountIdentities {
    pub level: usize,
    pub vertices: (u64, u64),
    pub edges: (u64, u64),
}

impl CountIdentities {
    pub fn holds(&self) -> bool {
        self.vertices.0 == self.vertices.1 && self.edges.0 == self.edges.1
    }
}

fn members(d: &Diagram, n: usize) -> Result<Vec<Vertex>> {
    d.vertex_set(n).members().ok_or_else(|| Error::InvalidFamilyParams(format!("level {} is infinite", n)))
}

/// Both sides of the count identities at level `n`.
pub fn count_identities(zi: &ZeroOneImage, n: usize) -> Result<CountIdentities> {
    let d = zi.numbering.parent().base();
    let mut e_n = 0u64;
    for v in members(d, n + 1)? {
        e_n += d.row_sum(n, v)?;
    }
    let mut paths2 = 0u64;
    for v in members(d, n + 2)? {
        for (u, c) in d.row(n + 1, v)? {
            paths2 += c * d.row_sum(n, u)?;
        }
    }
    let img = &zi.image;
    let tv = members(img, n)?.len() as u64;
    let mut te = 0u64;
    for k in members(img, n + 1)? {
        te += img.row_sum(n, k)?;
    }
    Ok(CountIdentities { level: n, vertices: (e_n, tv), edges: (paths2, te) })
}

/// Evidence that the image breaks horizontal stationarity:
/// `f̃_{i,j} ≠ f̃_{i+1,j+1}` at level `level`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToeplitzWitness {
    pub level: usize,
    pub i: Vertex,
    pub j: Vertex,
    pub entries: (u64, u64),
    pub rows: (Row, Row),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreservationReport {
    /// `(parent r_n, image r_n)` per level.
    pub ers: Vec<(Option<u64>, Option<u64>)>,
    /// `(parent c_{n+1}, image c_n)` per level.
    pub ecs: Vec<(Option<u64>, Option<u64>)>,
    /// Parent stationary, and image rows agree across levels on the window.
    pub stationary: Option<bool>,
    pub toeplitz_witness: Option<ToeplitzWitness>,
    pub notes: Vec<String>,
}

impl PreservationReport {
    /// Every property of the parent that was observed is also observed in the image.
    pub fn all_preserved(&self) -> bool {
        self.ers.iter().all(|(p, i)| p.is_none() || p == i)
            && self.ecs.iter().all(|(p, i)| p.is_none() || p == i)
            && self.stationary != Some(false)
    }
}

/// Checks ERS, ECS and stationarity on `levels` levels of the image over
/// `window`, and searches the window for a Toeplitz violation when the parent
/// is horizontally stationary.
pub fn verify_preserved_properties(
    zi: &ZeroOneImage,
    levels: usize,
    window: (Vertex, Vertex),
) -> Result<PreservationReport> {
    let d = zi.numbering.parent().base();
    let img = &zi.image;
    let mut rep = PreservationReport {
        ers: Vec::new(),
        ecs: Vec::new(),
        stationary: None,
        toeplitz_witness: None,
        notes: Vec::new(),
    };
    for n in 0..levels {
        let pr = d.check_row_sums(n, window)?;
        let ir = img.check_row_sums(n, window)?;
        rep.ers.push((pr, ir));
        let pc = d.check_col_sums(n + 1, window)?;
        let ic = img.check_col_sums(n, window)?;
        rep.ecs.push((pc, ic));
    }
    if d.flags().stationary {
        let mut same = true;
        for n in 1..levels {
            let Some((lo, hi)) = img.vertex_set(n + 1).clip(window.0, window.1) else { continue };
            for k in lo..=hi {
                if img.row(n, k)? != img.row(0, k)? {
                    same = false;
                }
            }
        }
        rep.stationary = Some(same);
    }
    if d.flags().horizontally_stationary {
        rep.toeplitz_witness = toeplitz_violation(img, 0, window)?;
        if rep.toeplitz_witness.is_none() {
            rep.notes.push(String::from("no Toeplitz violation inside the window"));
        }
    }
    Ok(rep)
}

/// First `(i, j)` in the window with `f̃_{i,j} ≠ f̃_{i+1,j+1}`.
pub fn toeplitz_violation(img: &Diagram, n: usize, window: (Vertex, Vertex)) -> Result<Option<ToeplitzWitness>> {
    let (lo, hi) = window;
    for i in lo..hi {
        if !img.vertex_set(n + 1).contains(i) || !img.vertex_set(n + 1).contains(i + 1) {
            continue;
        }
        let (r0, r1) = (img.row(n, i)?, img.row(n, i + 1)?);
        for j in lo..hi {
            let a = r0.iter().find(|e| e.0 == j).map_or(0, |e| e.1);
            let b = r1.iter().find(|e| e.0 == j + 1).map_or(0, |e| e.1);
            if a != b {
                return Ok(Some(ToeplitzWitness { level: n, i, j, entries: (a, b), rows: (r0, r1) }));
            }
        }
    }
    Ok(None)
}

/// Whether `f̃_{i,j} = f̃_{i+p,j+p}` for all `i, j` in the window.
pub fn shift_periodic(img: &Diagram, n: usize, p: i64, window: (Vertex, Vertex)) -> Result<bool> {
    for i in window.0..=window.1 {
        let (r0, r1) = (img.row(n, i)?, img.row(n, i + p)?);
        let shifted: Row = r0.iter().map(|&(j, c)| (j + p, c)).collect();
        if shifted != r1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Dense `|Ṽ_{n+1}| × |Ṽ_n|` matrix of a finite image level.
pub fn image_matrix(zi: &ZeroOneImage, n: usize) -> Result<Vec<Vec<u64>>> {
    let img = &zi.image;
    let cols = members(img, n)?;
    members(img, n + 1)?
        .into_iter()
        .map(|k| {
            let row = img.row(n, k)?;
            Ok(cols.iter().map(|j| row.iter().find(|e| e.0 == *j).map_or(0, |e| e.1)).collect())
        })
        .collect()
}

/// Inverse procedure for images whose levels are all-ones blocks: the
/// odometer with `a_n = |Ṽ_n|`, up to the number of vertices of `V_0`.
pub fn inverse_all_ones(img: &Diagram, levels: usize) -> Result<Vec<u64>> {
    let mut a = Vec::with_capacity(levels);
    for n in 0..levels {
        let cols = members(img, n)?;
        for k in members(img, n + 1)? {
            let row = img.row(n, k)?;
            if row.len() != cols.len() || row.iter().any(|e| e.1 != 1) {
                return Err(Error::InvalidFamilyParams(format!("level {} is not an all-ones block", n)));
            }
        }
        a.push(cols.len() as u64);
    }
    Ok(a)
}

/// Total mass `Σ_k H̃_k^{(n)} ν_k^{(n)}` of the pushforward on a finite level.
pub fn image_level_mass(zi: &ZeroOneImage, nu: &MeasureSpec, n: usize) -> Result<Q> {
    let vs = members(&zi.image, n)?;
    let t = HeightTable::for_level(&zi.image, n, &vs)?;
    let mut s = Q::zero();
    for &k in &vs {
        let h: &BigUint = t.require(n, k)?;
        s += Q::from_integer(h.clone().into()) * nu.p_exact(n, k).unwrap_or_else(Q::zero);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{build_family, FamilySpec};
    use crate::seq::Seq;
    use alloc::vec;

    #[test]
    fn two_by_two_image_matrix() {
        let d = build_family(&FamilySpec::StationaryFinite { matrix: vec![vec![2, 0], vec![1, 3]] }).unwrap();
        let zi = zero_one(&OrderedDiagram::left_to_right(d));
        let m = image_matrix(&zi, 0).unwrap();
        let top = vec![1, 1, 0, 0, 0, 0];
        let bottom = vec![0, 0, 1, 1, 1, 1];
        assert_eq!(m, vec![top.clone(), top.clone(), top, bottom.clone(), bottom.clone(), bottom]);
        assert!(count_identities(&zi, 0).unwrap().holds());
    }

    #[test]
    fn integer_blocks() {
        let d = build_family(&FamilySpec::BtGeneral { t: Seq::constant(1) }).unwrap();
        let zi = zero_one(&OrderedDiagram::left_to_right(d));
        assert_eq!(zi.numbering.block(0, -1).unwrap(), (-2, -1));
        assert_eq!(zi.numbering.edge(0, -2).unwrap().source, -2);
        assert_eq!(zi.image.row(0, 0).unwrap(), vec![(-2, 1), (-1, 1)]);
        assert_eq!(zi.image.row(0, 2).unwrap(), vec![(0, 1), (1, 1)]);
        assert!(shift_periodic(&zi.image, 0, 2, (-6, 6)).unwrap());
        assert!(toeplitz_violation(&zi.image, 0, (-6, 6)).unwrap().is_some());
    }
}
