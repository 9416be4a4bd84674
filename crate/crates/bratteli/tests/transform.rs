use bratteli::combinatorics::{Edge, FinitePath};
use bratteli::diagram::{build_family, Diagram, FamilySpec};
use bratteli::dynamics::OrderedDiagram;
use bratteli::extension::{edge_increments, vertex_increments, EdgeSubdiagram};
use bratteli::measure::{verify_tail_invariance, MeasureSpec};
use bratteli::perron::{finite_exact_eigen, stationary_measure};
use bratteli::seq::Seq;
use bratteli::transform::*;
use bratteli::Q;
use num_traits::Zero;
use proptest::prelude::*;

fn image_of(d: Diagram) -> ZeroOneImage {
    zero_one(&OrderedDiagram::left_to_right(d))
}

/// Edges of `E_n` in canonical order: by range, then by source, then by index.
fn canonical_edges(d: &Diagram, n: usize) -> Vec<Edge> {
    let mut out = Vec::new();
    for v in d.vertex_set(n + 1).members().unwrap() {
        let mut row = d.row(n, v).unwrap();
        row.sort();
        for (w, c) in row {
            out.extend((0..c).map(|i| Edge { level: n, source: w, range: v, index: i as u64 }));
        }
    }
    out
}

/// The 0-1 matrix between `E_{n+1}` and `E_n` from the definition: `e` follows `f` iff `s(e) = r(f)`.
fn brute_image(d: &Diagram, n: usize) -> Vec<Vec<u64>> {
    let lower = canonical_edges(d, n);
    canonical_edges(d, n + 1).iter().map(|e| lower.iter().map(|f| u64::from(e.source == f.range)).collect()).collect()
}

fn small_matrix() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (1usize..=3).prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(1u64..4, k), k))
}

#[test]
fn image_matrix_of_two_by_two_example() {
    let zi = image_of(build_family(&FamilySpec::StationaryFinite { matrix: vec![vec![2, 0], vec![1, 3]] }).unwrap());
    let m = image_matrix(&zi, 0).unwrap();
    let top = vec![1, 1, 0, 0, 0, 0];
    let bottom = vec![0, 0, 1, 1, 1, 1];
    assert_eq!(m, vec![top.clone(), top.clone(), top, bottom.clone(), bottom.clone(), bottom]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn image_matches_the_definition(matrix in small_matrix()) {
        let d = build_family(&FamilySpec::StationaryFinite { matrix }).unwrap();
        let zi = image_of(d.clone());
        for n in 0..2 {
            prop_assert_eq!(image_matrix(&zi, n).unwrap(), brute_image(&d, n));
            prop_assert!(count_identities(&zi, n).unwrap().holds());
        }
    }

    #[test]
    fn image_columns_match_rows(matrix in small_matrix()) {
        let zi = image_of(build_family(&FamilySpec::StationaryFinite { matrix }).unwrap());
        let img = &zi.image;
        let rows = image_matrix(&zi, 0).unwrap();
        for (j, k) in img.vertex_set(0).members().unwrap().into_iter().enumerate() {
            let col: Vec<i64> = img.column(0, k).unwrap().entries.iter().map(|e| e.0).collect();
            let expect: Vec<i64> = (0..rows.len()).filter(|&i| rows[i][j] == 1).map(|i| i as i64).collect();
            prop_assert_eq!(col, expect);
        }
    }

    #[test]
    fn numbering_round_trips_on_integers(k in -40i64..40, t in 1u64..4) {
        let zi = image_of(build_family(&FamilySpec::BtGeneral { t: Seq::constant(t) }).unwrap());
        let e = zi.numbering.edge(0, k).unwrap();
        prop_assert_eq!(zi.numbering.number(&e).unwrap(), k);
        let (lo, hi) = zi.numbering.block(0, e.range).unwrap();
        prop_assert!(lo <= k && k <= hi);
    }
}

#[test]
fn paths_correspond() {
    let d = build_family(&FamilySpec::StationaryFinite { matrix: vec![vec![2, 1], vec![1, 3]] }).unwrap();
    let zi = image_of(d.clone());
    let p = FinitePath {
        edges: vec![
            Edge { level: 0, source: 1, range: 0, index: 0 },
            Edge { level: 1, source: 0, range: 1, index: 0 },
            Edge { level: 2, source: 1, range: 1, index: 2 },
        ],
    };
    p.validate(&d).unwrap();
    let q = zi.image_path(&p).unwrap();
    q.validate(&zi.image).unwrap();
    assert_eq!(q.edges.len(), 2);
    assert_eq!(zi.parent_path(&q, 0).unwrap(), p);
}

#[test]
fn pushforward_stays_invariant_with_equal_mass() {
    let d = build_family(&FamilySpec::StationaryFinite { matrix: vec![vec![2, 1], vec![1, 2]] }).unwrap();
    let e = finite_exact_eigen(&d, &Q::from_integer(3.into())).unwrap();
    let m = stationary_measure(&d, e, (0, 1)).unwrap().spec;
    let zi = image_of(d);
    let nu = zi.pushforward(&m).unwrap();
    for n in 0..3 {
        let r = verify_tail_invariance(&nu, &zi.image, n, (0, 20)).unwrap();
        assert_eq!(r.exact, Some(Q::zero()));
        assert_eq!(image_level_mass(&zi, &nu, n).unwrap(), Q::from_integer(1.into()));
    }
}

#[test]
fn preserved_properties_on_bt() {
    let zi = image_of(build_family(&FamilySpec::BtGeneral { t: Seq::constant(1) }).unwrap());
    let r = verify_preserved_properties(&zi, 3, (-8, 8)).unwrap();
    assert!(r.all_preserved(), "{:?}", r);
    assert!(r.ers.iter().all(|&(p, i)| p == Some(2) && i == Some(2)));
    assert!(r.ecs.iter().all(|&(p, i)| p == Some(2) && i == Some(2)));
    assert_eq!(r.stationary, Some(true));
    // Rows of neighbouring image vertices at distance one are not shifted copies.
    let w = r.toeplitz_witness.expect("Toeplitz violation");
    assert!((w.i - w.j).abs() <= 2);
    assert_ne!(w.entries.0, w.entries.1);
    assert!(shift_periodic(&zi.image, 0, 2, (-8, 8)).unwrap());
}

#[test]
fn odometer_image_inverts() {
    let zi = image_of(build_family(&FamilySpec::Odometer { a: Seq::constant(3) }).unwrap());
    assert_eq!(inverse_all_ones(&zi.image, 4).unwrap(), vec![3, 3, 3, 3]);
    let r = verify_preserved_properties(&zi, 3, (0, 8)).unwrap();
    assert!(r.all_preserved());
}

#[test]
fn edge_and_vertex_increments_agree_through_the_image() {
    let parent = build_family(&FamilySpec::Odometer { a: Seq::constant(3) }).unwrap();
    let sub = EdgeSubdiagram::new(parent.clone(), build_family(&FamilySpec::Odometer { a: Seq::constant(2) }).unwrap())
        .unwrap();
    let m = MeasureSpec::odometer(Seq::constant(2), 0);
    let (edge, _) = edge_increments(&sub, &m, 6).unwrap();
    let zi = image_of(parent);
    let w = zi.retained_vertices(&sub).unwrap();
    let nu = zi.pushforward(&m).unwrap();
    let (vertex, tele) = vertex_increments(&w, &nu, 6).unwrap();
    assert_eq!(vertex, tele);
    assert_eq!(edge, vertex);
}
