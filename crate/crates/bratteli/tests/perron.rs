use bratteli::diagram::{build_family, Diagram, FamilySpec, VertexSet};
use bratteli::measure::{verify_tail_invariance, MeasureSpec};
use bratteli::perron::*;
use bratteli::seq::Seq;
use bratteli::Q;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

/// Root of an increasing-then-decreasing `f` on `[lo, hi]` with `f(lo) >= 0 > f(hi)`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `k × k` renewal corner has characteristic equation `Σ_{i=1}^k λ^{-i} = 1`.
fn renewal_root(k: usize) -> f64 {
    bisect(|x| (1..=k).map(|i| x.powi(-(i as i32))).sum::<f64>() - 1.0, 1.0, 2.0)
}

fn renewal() -> Diagram {
    build_family(&FamilySpec::Leslie { b: Seq::constant(1), s: Seq::constant(1) }).unwrap()
}

#[test]
fn renewal_corners_match_the_characteristic_root() {
    let d = renewal();
    let a = transpose_accessor(&d).unwrap();
    let ks: Vec<usize> = (2..=20).collect();
    let seq = truncation_sequence(&a, &ks, 1e-13, DEFAULT_MAX_ITER).unwrap();
    assert!(seq.monotone);
    for (k, e) in &seq.entries {
        assert!((e.lambda - renewal_root(*k)).abs() < 1e-9, "k = {}: {}", k, e.lambda);
    }
    assert!((seq.entries[0].1.lambda - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9);
    assert!((seq.entries[1].1.lambda - 1.839_286_755_2).abs() < 1e-9);
    assert!((seq.entries.last().unwrap().1.lambda - 2.0).abs() < 1e-5);
}

#[test]
fn rejects_reducible_and_periodic_matrices() {
    assert!(check_primitive(&[vec![1, 1], vec![1, 0]]).is_ok());
    assert!(check_primitive(&[vec![1, 0], vec![1, 1]]).is_err());
    assert!(check_primitive(&[vec![0, 1, 0], vec![0, 0, 1], vec![1, 0, 0]]).is_err());
}

proptest! {
    #[test]
    fn two_by_two_eigenvalues(a in 1u64..20, b in 1u64..20, c in 1u64..20, d in 1u64..20) {
        let e = perron_finite(&[vec![a, b], vec![c, d]], 1e-12, DEFAULT_MAX_ITER).unwrap();
        let (tr, det) = ((a + d) as f64, (a * d) as f64 - (b * c) as f64);
        let expect = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        prop_assert!((e.lambda - expect).abs() < 1e-9 * expect);
        prop_assert_eq!(e.xi[0], 1.0);
        prop_assert!(e.residual <= 1e-12 * expect.max(1.0));
    }

    #[test]
    fn constant_leslie_lambda_is_b_plus_s(b in 1u64..8, s in 1u64..8) {
        let l = leslie_lambda(&Seq::constant(b), &Seq::constant(s), 1e-12).unwrap();
        prop_assert!((l - (b + s) as f64).abs() < 1e-9);
    }

    #[test]
    fn leslie_lambda_matches_bisection(head in 1u64..6, b in 1u64..4) {
        // b_1 = head, b_i = b for i >= 2, s ≡ 1: p(λ) = head/λ + b/(λ(λ-1)).
        let bs = Seq::List { values: vec![head], tail: Box::new(Seq::constant(b)) };
        let l = leslie_lambda(&bs, &Seq::constant(1), 1e-12).unwrap();
        let root = bisect(|x| head as f64 / x + b as f64 / (x * (x - 1.0)) - 1.0, 1.0 + 1e-12, 64.0);
        prop_assert!((l - root).abs() < 1e-9, "{} vs {}", l, root);
    }
}

#[test]
fn leslie_eigenvector_tail() {
    let v = leslie_eigenvector(3.0, &Seq::constant(1), 5);
    assert_eq!(v.xi[2], 1.0 / 9.0);
    assert_eq!(v.sigma, Some(1.5));
    assert!(leslie_eigenvector(1.0, &Seq::constant(1), 3).divergent_mass);
}

#[test]
fn leslie_constant_measure_is_tail_invariant() {
    let d = build_family(&FamilySpec::Leslie { b: Seq::constant(2), s: Seq::constant(1) }).unwrap();
    let m = stationary_measure(&d, leslie_constant_spec(2, 1), (1, 40)).unwrap();
    assert!(m.finite);
    let r = verify_tail_invariance(&m.spec, &d, 3, (1, 20)).unwrap();
    assert_eq!(r.exact, Some(Q::zero()));
}

#[test]
fn edge_example_eigendata() {
    let sub = build_family(&FamilySpec::EdgeExampleSub).unwrap();
    let e = edge_example_eigen();
    let r = verify_tail_invariance(&MeasureSpec::StationaryEigen(e.clone()), &sub, 0, (-30, 30)).unwrap();
    assert_eq!(r.exact, Some(Q::zero()));
    let sigma: Q = (-60..=60).map(|v| e.xi_exact(v).unwrap()).sum();
    assert!((sigma - Q::from_integer(4.into())).abs() < Q::new(1.into(), (1i64 << 58).into()));
}

#[test]
fn finite_rational_eigenvector() {
    let d = Diagram::from_rows(
        "2x2",
        |_| VertexSet::finite(0, 1),
        |_, v| Ok(if v == 0 { vec![(0, 2), (1, 1)] } else { vec![(0, 1), (1, 2)] }),
    )
    .with_flags(bratteli::diagram::Flags { stationary: true, ..Default::default() });
    let e = finite_exact_eigen(&d, &Q::from_integer(3.into())).unwrap();
    assert_eq!(e.xi_exact(0), e.xi_exact(1));
    assert!(finite_exact_eigen(&d, &Q::from_integer(2.into())).is_err());
}

#[test]
fn renewal_is_positive_recurrent() {
    let c = classify_recurrence(&renewal(), 2.0, 1, 30).unwrap();
    assert_eq!(c.verdict, RecurrenceVerdict::Recurrent);
    assert!((c.partial_sums[30] - c.partial_sums[29] - 0.5).abs() < 1e-6);
}
