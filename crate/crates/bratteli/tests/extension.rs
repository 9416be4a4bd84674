use bratteli::combinatorics::HeightTable;
use bratteli::diagram::{build_family, Diagram, FamilySpec, Row, VertexSet};
use bratteli::extension::*;
use bratteli::measure::{verify_tail_invariance, EigenSpec, MeasureSpec, Scalar};
use bratteli::perron::edge_example_eigen;
use bratteli::seq::Seq;
use bratteli::series::{CertificateKind, Verdict};
use bratteli::Q;
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

fn q(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

fn family(f: FamilySpec) -> Diagram {
    build_family(&f).unwrap()
}

fn singleton(f: FamilySpec) -> VertexSubdiagram {
    VertexSubdiagram::singleton(family(f), 0).unwrap()
}

fn certificate(v: &Verdict) -> CertificateKind {
    match v {
        Verdict::Infinite(c) => c.kind.clone(),
        other => panic!("expected an infinite verdict, got {}", other),
    }
}

/// Paths from level 0 into `(n, v)`, one at a time.
fn count_paths(d: &Diagram, n: usize, v: i64) -> u64 {
    if n == 0 {
        return 1;
    }
    d.row(n - 1, v).unwrap().iter().map(|&(w, c)| c * count_paths(d, n - 1, w)).sum()
}

#[test]
fn tridiagonal_with_constant_two_diverges_by_comparison() {
    let sub = singleton(FamilySpec::Tridiagonal { a: Seq::constant(2) });
    let r = vertex_extension_series(&sub, &MeasureSpec::odometer(Seq::constant(2), 0), 12, 1e-12).unwrap();
    assert_eq!(certificate(&r.verdict), CertificateKind::Comparison);
    assert!(r.forms_agree());
}

#[test]
fn tridiagonal_geometric_partial_sums_match_the_product() {
    let a = Seq::geometric(2, 4);
    let sub = singleton(FamilySpec::Tridiagonal { a: a.clone() });
    let r = vertex_extension_series(&sub, &MeasureSpec::odometer(a.clone(), 0), 30, 1e-12).unwrap();
    assert!(r.verdict.is_finite());
    // Equal row sums a_n + 2 give R_N = Π_{i<N} (1 + 2/a_i).
    let mut prod = Q::one();
    for (n, s) in r.partial_sums.iter().enumerate() {
        prod *= Q::one() + q(2, 1) / a.at_q(n);
        assert_eq!(*s, prod);
    }
    let stoch = stochastic_sufficient_condition(&sub, 30, 1e-12).unwrap();
    let exact = r.partial().to_f64().unwrap();
    assert!(stoch.bound.unwrap() >= exact, "{:?} < {}", stoch.bound, exact);
}

#[test]
fn fat_odometer_matches_brute_force_saturation_masses() {
    let (a, t) = (Seq::geometric(2, 2), Seq::constant(1));
    let r = fat_odometer_extension(&a, &t, 6, 1e-12).unwrap();
    assert!(r.verdict.is_finite(), "{}", r.verdict);
    let d = family(FamilySpec::FatOdometer { a: a.clone(), t });
    let mut den = Q::one();
    for n in 1..=6 {
        den *= a.at_q(n - 1);
        let mass = Q::from_integer(count_paths(&d, n, 0).into()) / &den;
        assert_eq!(r.partial_sums[n - 1], mass);
    }
}

#[test]
fn fat_odometer_with_linear_growth_diverges() {
    let s = Seq::Polynomial(vec![2, 1]);
    let r = fat_odometer_extension(&s, &s, 6, 1e-12).unwrap();
    assert_eq!(certificate(&r.verdict), CertificateKind::Comparison);
}

/// `B'` from its incidence matrices: `W_0 = {0}`, `W_n = [0, t_{n-1}]`, row 0
/// is `(a_n, 1, ..., 1)` and every other row is all ones.
fn stepwise_diagram(a: Seq, t: Seq) -> Diagram {
    let t2 = t.clone();
    Diagram::from_rows(
        "B'",
        move |n| if n == 0 { VertexSet::finite(0, 0) } else { VertexSet::finite(0, t2.at_u64(n - 1).unwrap() as i64) },
        move |n, v| {
            let top = if n == 0 { 0 } else { t.at_u64(n - 1).unwrap() as i64 };
            let mut row = Row::new();
            for w in 0..=top {
                row.push((w, if v == 0 && w == 0 { a.at_u64(n).unwrap() } else { 1 }));
            }
            Ok(row)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn stepwise_second_height(a0 in 1u64..50, t0 in 1u64..50, a1 in 1u64..9) {
        let a = Seq::List { values: vec![a0, a1], tail: Box::new(Seq::constant(2)) };
        let t = Seq::List { values: vec![t0], tail: Box::new(Seq::constant(1)) };
        let s = stepwise_chain(&a, &t, 4, 1e-12).unwrap();
        prop_assert_eq!(s.k[2].clone(), num_bigint::BigUint::from(a0 + t0));
    }

    #[test]
    fn stepwise_terms_are_the_extension_inside_b_prime(a in 1u64..5, t in 1u64..4) {
        let (sa, st) = (Seq::constant(a), Seq::constant(t));
        let s = stepwise_chain(&sa, &st, 6, 1e-12).unwrap();
        let sub = VertexSubdiagram::singleton(stepwise_diagram(sa.clone(), st), 0).unwrap();
        let (direct, tele) = vertex_increments(&sub, &MeasureSpec::odometer(sa, 0), 7).unwrap();
        prop_assert_eq!(&direct, &tele);
        prop_assert_eq!(&direct[0], &Q::zero());
        prop_assert_eq!(&direct[1..], &s.report.increments[..6]);
    }
}

#[test]
fn stepwise_verdicts() {
    let inf = stepwise_chain(&Seq::constant(2), &Seq::constant(1), 10, 1e-12).unwrap();
    assert_eq!(certificate(&inf.report.verdict), CertificateKind::Comparison);
    assert!(inf.infinite_in_full);
    let fin = stepwise_chain(&Seq::geometric(2, 2), &Seq::constant(1), 10, 1e-12).unwrap();
    assert!(fin.report.verdict.is_finite(), "{}", fin.report.verdict);
    assert!(fin.report.partial_sums.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn edge_example_level_zero_diverges() {
    let parent = family(FamilySpec::EdgeExample);
    let sub = EdgeSubdiagram::new(parent, family(FamilySpec::EdgeExampleSub)).unwrap();
    assert!(!sub.is_trivial());
    let m = MeasureSpec::StationaryEigen(edge_example_eigen().normalized().unwrap());
    let r = edge_extension_series(&sub, &m, 4, 1e-12).unwrap();
    assert_eq!(certificate(&r.verdict), CertificateKind::LevelDivergence);
    let (_, terms) = r.window_terms.unwrap();
    for (v, x) in terms {
        if v >= 1 {
            // (1 - 2^{-v}) / σ with σ = 4.
            assert_eq!(x, (Q::one() - q(1, 1 << v)) / q(4, 1), "v = {}", v);
        }
    }
}

#[test]
fn edge_example_level_one_towers() {
    let parent = family(FamilySpec::EdgeExample);
    let m = MeasureSpec::StationaryEigen(edge_example_eigen());
    let terms = tower_terms(&parent, &parent, &m, 1, (-6, 6)).unwrap();
    for (v, x) in terms {
        let expect = if v == 0 || v == -1 { q(4, 3) } else { Q::one() };
        assert_eq!(x, expect, "v = {}", v);
    }
}

#[test]
fn odometer_pairs() {
    let pair = |b: Seq, a: Seq| {
        let parent = family(FamilySpec::Odometer { a: b });
        EdgeSubdiagram::new(parent, family(FamilySpec::Odometer { a: a.clone() })).unwrap()
    };
    let m = MeasureSpec::odometer(Seq::constant(2), 0);
    let r = edge_extension_series(&pair(Seq::constant(3), Seq::constant(2)), &m, 8, 1e-12).unwrap();
    assert_eq!(certificate(&r.verdict), CertificateKind::Comparison);
    assert!(r.forms_agree());
    // (b_n - a_n) b_0⋯b_{n-1} / (a_0⋯a_n) = (3/2)^n / 2.
    assert_eq!(r.increments[3], q(27, 16));

    let b = Seq::List { values: vec![3, 3, 3], tail: Box::new(Seq::constant(2)) };
    let r = edge_extension_series(&pair(b, Seq::constant(2)), &m, 2, 1e-12).unwrap();
    match r.verdict {
        Verdict::Finite { partial, tail_bound, depth } => {
            assert_eq!(partial, q(27, 8));
            assert_eq!(tail_bound, 0.0);
            assert_eq!(depth, 3);
        }
        other => panic!("{}", other),
    }
}

#[test]
fn half_line_boundary_cases() {
    let odometer = EigenSpec::exact("loop", Q::one(), VertexSet::finite(0, 0), |_| Q::one())
        .with_sigma(Some(Scalar::Exact(Q::one())));
    let run = |a: u64| {
        let sub = singleton(FamilySpec::HalfLine { a });
        let mut e = odometer.clone();
        e.lambda = Scalar::Exact(Q::from_integer(a.into()));
        stationary_sub_tests(&sub, &e, 12, 1e-12).unwrap()
    };
    let three = run(3);
    match &three.report.verdict {
        Verdict::Finite { partial, tail_bound, .. } => {
            let p = partial.to_f64().unwrap();
            assert!(p <= 2.0 && 2.0 <= p + tail_bound + 1e-15);
        }
        other => panic!("{}", other),
    }
    assert!(three.ratios.iter().all(|r| (*r - 2.0).abs() < 1e-12));
    assert_eq!(certificate(&run(2).report.verdict), CertificateKind::TermsBoundedBelow);
    assert_eq!(certificate(&run(1).report.verdict), CertificateKind::RatioTest);
    for a in 1..=4 {
        assert!(run(a).report.forms_agree());
    }
}

#[test]
fn perron_value_below_row_sums() {
    let sub = singleton(FamilySpec::Tridiagonal { a: Seq::constant(2) });
    let e = EigenSpec::exact("loop", q(2, 1), VertexSet::finite(0, 0), |_| Q::one())
        .with_sigma(Some(Scalar::Exact(Q::one())));
    let r = stationary_sub_tests(&sub, &e, 6, 1e-12).unwrap();
    assert_eq!(certificate(&r.report.verdict), CertificateKind::PerronBelowRowSums);
}

#[test]
fn simple_subdiagram_verdicts() {
    let b = simple_subdiagram_bounds(&singleton(FamilySpec::Tridiagonal { a: Seq::constant(2) }), 6, None).unwrap();
    assert_eq!(b.verdict, SimpleVerdict::NecessaryViolated);
    assert_eq!(b.alpha[2], q(8, 1));
    let b = simple_subdiagram_bounds(&singleton(FamilySpec::Tridiagonal { a: Seq::geometric(2, 4) }), 6, None).unwrap();
    assert_eq!(b.verdict, SimpleVerdict::FiniteSufficient);
    let err = simple_subdiagram_bounds(&singleton(FamilySpec::HalfLine { a: 3 }), 3, None).unwrap_err();
    assert!(matches!(err, bratteli::Error::NotErs(0)));
}

#[test]
fn nullity_of_a_thin_subdiagram() {
    let sub = singleton(FamilySpec::Tridiagonal { a: Seq::constant(2) });
    let m = MeasureSpec::odometer(Seq::constant(2), 0);
    let r = nullity_check(&m, &sub, &q(1, 100), 10).unwrap();
    assert!(r.holds);
    // H̄/H = 2^n / 4^n.
    assert_eq!(r.level, Some(7));
    assert_eq!(r.ratios[3], q(1, 8));
}

#[test]
fn horizon_measure_is_invariant_below_the_horizon() {
    let a = Seq::geometric(2, 4);
    let d = family(FamilySpec::Tridiagonal { a });
    let m = horizon_extension_measure(&d, 0, 5).unwrap();
    for n in 0..5 {
        let r = verify_tail_invariance(&m, &d, n, (-8, 8)).unwrap();
        assert_eq!(r.exact, Some(Q::zero()), "level {}", n);
    }
    let total = window_mass(&d, &m, 5, (0, 0)).unwrap();
    assert_eq!(total, Scalar::Exact(Q::one()));
}

#[test]
fn augmentation_stays_below_the_dyadic_cap() {
    let d = family(FamilySpec::Tridiagonal { a: Seq::geometric(2, 4) });
    let m = horizon_extension_measure(&d, 0, 8).unwrap();
    let plan = augment_edges_finite(&d, &m, 3, 200).unwrap();
    assert_eq!(plan.edges.len(), 6);
    assert!(plan.cones_disjoint);
    assert!(plan.bound <= plan.cap);
    for e in &plan.edges {
        assert!(e.tower_measure < q(1, 1 << e.index));
        let t = HeightTable::for_level(&d, e.level + 1, &[e.range]).unwrap();
        assert!(t.get(e.level + 1, e.range).is_some());
    }
}

#[test]
fn exhaustion_captures_the_mass() {
    let d = family(FamilySpec::Tridiagonal { a: Seq::geometric(2, 4) });
    let m = horizon_extension_measure(&d, 0, 6).unwrap();
    let r = exhaustion_check(&d, &m, 4, 1e-3, 6).unwrap();
    assert!(r.found);
    assert!(r.mass.unwrap().to_f64() > 1.0 - 1e-3);
}

#[test]
fn lower_triangular_windows_lose_their_mass() {
    let d = family(FamilySpec::LowerTriangular);
    let m = bratteli::measure::triangular_family_measure(&q(1, 2)).unwrap();
    let masses: Vec<f64> = (0..8).map(|n| window_mass(&d, &m, n, (1, 5)).unwrap().to_f64()).collect();
    assert!(masses.windows(2).all(|w| w[1] < w[0]));
    assert!(masses[0] > 1.45 && masses[7] < 1.0);
}

#[test]
fn admissibility_is_enforced() {
    let d = family(FamilySpec::Tridiagonal { a: Seq::constant(2) });
    // W_0 = {0, 5}, W_n = {0}: vertex 5 receives no edge from W_1.
    let e = VertexSubdiagram::new(d, "gap", |n| if n == 0 { vec![0, 5] } else { vec![0] }, false).unwrap_err();
    assert!(matches!(e, bratteli::Error::NotAdmissible { level: 0, vertex: 5 }));
}

#[test]
fn exhaustion_windows_are_admissible() {
    let d = family(FamilySpec::Tridiagonal { a: Seq::constant(3) });
    let w = VertexSubdiagram::exhaustion(d, 2).unwrap();
    assert_eq!(w.w(0), vec![-2, -1, 0, 1, 2]);
    assert_eq!(w.w(2).len(), 9);
}
