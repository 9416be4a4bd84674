//! The twelve acceptance criteria, each checked against an oracle written
//! here. Every criterion prints one `PASS`/`FAIL` line; the test fails when
//! the set of failing criteria differs from `KNOWN_RED`.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bratteli::combinatorics::{heights, stochastic_row, HeightTable};
use bratteli::convergence::{
    cylinders_up_to, rank2_counterexample, subprobability_mass_limit, truncation_measure_convergence, Rank2Cylinder,
    Rank2Example,
};
use bratteli::diagram::{build_family, BoundedSize, Diagram, FamilySpec, Row, VertexSet};
use bratteli::dynamics::{
    empirical_wandering, l_sequence, ordered_bt, source_shift_check, wandering_certificate, OrderedDiagram,
    WanderingVerdict,
};
use bratteli::extension::{
    edge_extension_series, edge_increments, fat_odometer_extension, stepwise_chain, stochastic_sufficient_condition,
    tower_terms, vertex_extension_series, vertex_increments, EdgeSubdiagram, VertexSubdiagram,
};
use bratteli::measure::{triangular_family_measure, verify_tail_invariance, MeasureSpec};
use bratteli::perron::{
    edge_example_eigen, leslie_constant_spec, transpose_accessor, truncation_sequence, DEFAULT_MAX_ITER,
};
use bratteli::seq::Seq;
use bratteli::series::{CertificateKind, Verdict};
use bratteli::transform::{count_identities, image_matrix, verify_preserved_properties, zero_one};
use bratteli::Q;
use bratteli_cli::golden::{default_dir, load_fixtures, Fixture};
use bratteli_cli::run::measure_spec;
use bratteli_cli::{Action, SubDoc};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail; see the notes on the edge example.
const KNOWN_RED: &[usize] = &[5];

const HEIGHT_DIAGRAMS: usize = 100;
const HEIGHT_BAND: u64 = 2;
const HEIGHT_ROW_SUM: u64 = 5;
const HEIGHT_LEVELS: usize = 6;
const HEIGHT_WINDOW: (i64, i64) = (-10, 10);
const HEIGHT_BUDGET: Duration = Duration::from_secs(10);
const GEOMETRIC_STABILITY: f64 = 1e-12;
const EDGE_BUDGET: Duration = Duration::from_secs(1);
const SATURATION_DEPTH: usize = 6;
const STEPWISE_PAIRS: usize = 20;
const RENEWAL_TOL: f64 = 1e-9;
const RENEWAL_LAMBDA_3: f64 = 1.839_286_755_2;
const RENEWAL_LIMIT_TOL: f64 = 1e-5;
const RENEWAL_SIGMA_TOL: f64 = 1e-6;
const TRIANGULAR_LEVELS: usize = 10;
const TRIANGULAR_VERTICES: i64 = 30;
const WANDER_SAMPLES: usize = 200;
const WANDER_DEPTH: usize = 14;
const WANDER_KMAX: usize = 8;
const RANK2_LEVELS: usize = 50;

type Check = Result<String, String>;

fn q(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn lib<T>(r: bratteli::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn family(f: FamilySpec) -> Result<Diagram, String> {
    lib(build_family(&f))
}

fn fixtures() -> Vec<Fixture> {
    load_fixtures(&default_dir()).expect("fixtures load")
}

/// Paths from level 0 into `(n, v)`, walked one branch at a time.
fn count_paths(d: &Diagram, n: usize, v: i64) -> BigUint {
    if n == 0 {
        return BigUint::one();
    }
    d.row(n - 1, v).unwrap().iter().map(|&(w, c)| BigUint::from(c) * count_paths(d, n - 1, w)).sum()
}

/// A bounded-size diagram with random rows: `t_n <= 2` and row sums at most 5.
fn random_bounded(rng: &mut ChaCha8Rng) -> Diagram {
    let reach = HEIGHT_WINDOW.1.abs().max(HEIGHT_WINDOW.0.abs()) + (HEIGHT_LEVELS as i64 + 1) * HEIGHT_BAND as i64;
    let t: Vec<u64> = (0..=HEIGHT_LEVELS).map(|_| rng.random_range(0..=HEIGHT_BAND)).collect();
    let mut rows: BTreeMap<(usize, i64), Row> = BTreeMap::new();
    for (n, &tn) in t.iter().enumerate() {
        let tn = tn as i64;
        for v in -reach..=reach {
            let mut budget = HEIGHT_ROW_SUM;
            let mut row = Row::new();
            for w in v - tn..=v + tn {
                let lo = u64::from(w == v);
                let c = rng.random_range(lo..=budget.max(lo)).min(budget);
                budget -= c;
                if c > 0 {
                    row.push((w, c));
                }
            }
            rows.insert((n, v), row);
        }
    }
    let rows = Arc::new(rows);
    let tt = t.clone();
    Diagram::from_rows(
        "random bounded",
        |_| VertexSet::Integers,
        move |n, v| Ok(rows.get(&(n, v)).cloned().unwrap_or_else(|| vec![(v, 1)])),
    )
    .with_bounded_size(BoundedSize { t: Arc::new(move |n| tt.get(n).copied().unwrap_or(0)), l: None })
}

fn heights_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0usize;
    for k in 0..HEIGHT_DIAGRAMS {
        let d = random_bounded(&mut rng);
        for n in 0..=HEIGHT_LEVELS {
            let h = lib(heights(&d, n, HEIGHT_WINDOW))?;
            for v in HEIGHT_WINDOW.0..=HEIGHT_WINDOW.1 {
                let got = h.values.get(&v).ok_or(format!("diagram {} level {} vertex {} missing", k, n, v))?;
                ensure(*got == count_paths(&d, n, v), format!("diagram {} level {} vertex {}", k, n, v))?;
                compared += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < HEIGHT_BUDGET, format!("took {:?}", elapsed))?;
    Ok(format!("{} heights equal path counts in {:?}", compared, elapsed))
}

fn stochastic_rows() -> Check {
    let mut rows = 0usize;
    let mut diagrams = 0usize;
    for f in fixtures() {
        let Ok(d) = f.config.diagram.build() else { continue };
        diagrams += 1;
        for n in 0..4 {
            let (lo, hi) = (f.config.window.0.max(-5), f.config.window.1.min(5));
            let Some((lo, hi)) = d.vertex_set(n + 1).clip(lo, hi) else { continue };
            for v in lo..=hi {
                let t = lib(HeightTable::for_level(&d, n + 1, &[v]))?;
                let row = lib(stochastic_row(&d, n, v, &t))?;
                let s: Q = row.iter().map(|(_, x)| x.clone()).sum();
                ensure(s.is_one(), format!("{}: row ({}, {}) sums to {}", f.id, n, v, s))?;
                rows += 1;
            }
        }
    }
    ensure(rows > 0, "no rows checked")?;
    Ok(format!("{} rows over {} golden diagrams sum to 1", rows, diagrams))
}

fn tridiagonal_extension() -> Check {
    let sub = |a: &Seq| lib(VertexSubdiagram::singleton(family(FamilySpec::Tridiagonal { a: a.clone() })?, 0));
    let two = Seq::constant(2);
    let r = lib(vertex_extension_series(&sub(&two)?, &MeasureSpec::odometer(two.clone(), 0), 12, 1e-12))?;
    match &r.verdict {
        Verdict::Infinite(c) => {
            ensure(c.kind == CertificateKind::Comparison, format!("a = 2 certificate {:?}", c.kind))?
        }
        other => return Err(format!("a = 2 gave {}", other)),
    }
    let a = Seq::geometric(2, 4);
    let s = sub(&a)?;
    let r = lib(vertex_extension_series(&s, &MeasureSpec::odometer(a.clone(), 0), 30, 1e-12))?;
    let Verdict::Finite { partial, tail_bound, .. } = &r.verdict else {
        return Err(format!("a = 2*4^n gave {}", r.verdict));
    };
    // Equal row sums a_n + 2 make the extended mass Π (1 + 2/a_i).
    let mut prod = Q::one();
    for n in 0..30 {
        prod *= Q::one() + q(2, 1) / a.at_q(n);
    }
    ensure(*partial == prod, "depth-30 partial sum differs from the product")?;
    let prev = &r.partial_sums[28];
    let step = (partial - prev).to_f64().unwrap();
    ensure(step.abs() < GEOMETRIC_STABILITY, format!("last step {}", step))?;
    ensure(*tail_bound < GEOMETRIC_STABILITY, format!("tail bound {}", tail_bound))?;
    let exact = partial.to_f64().unwrap();
    let bound = lib(stochastic_sufficient_condition(&s, 30, 1e-12))?.bound.ok_or("no stochastic bound")?;
    ensure(bound >= exact, format!("stochastic bound {} below {}", bound, exact))?;
    Ok(format!("Infinite by comparison; Finite with sum {:.15} <= bound {:.6}", exact, bound))
}

fn extension_formulas_agree() -> Check {
    let mut checked = Vec::new();
    for f in fixtures() {
        if f.config.action != Action::ExtendVertex || matches!(f.config.sub, Some(SubDoc::Stepwise {})) {
            continue;
        }
        let d = f.config.diagram.build().map_err(|e| e.to_string())?;
        let m = measure_spec(&f.config, &d).map_err(|e| e.to_string())?;
        let sub = lib(VertexSubdiagram::singleton(d, 0))?;
        let (direct, tele) = lib(vertex_increments(&sub, &m, 12))?;
        ensure(direct.len() == 12 && direct == tele, format!("{} disagrees", f.id))?;
        checked.push(f.id);
    }
    ensure(!checked.is_empty(), "no golden vertex subdiagrams")?;
    Ok(format!("12 increments agree on {}", checked.join(", ")))
}

fn edge_example() -> Check {
    let start = Instant::now();
    let parent = family(FamilySpec::EdgeExample)?;
    let sub = lib(EdgeSubdiagram::new(parent.clone(), family(FamilySpec::EdgeExampleSub)?))?;
    let m = MeasureSpec::StationaryEigen(lib(edge_example_eigen().normalized())?);
    let r = lib(edge_extension_series(&sub, &m, 4, 1e-12))?;
    let raw = MeasureSpec::StationaryEigen(edge_example_eigen());
    let terms = lib(tower_terms(&parent, &parent, &raw, 1, (-8, 8)))?;
    let elapsed = start.elapsed();
    let off: Vec<String> = terms.iter().filter(|(_, x)| !x.is_one()).map(|(v, x)| format!("{}: {}", v, x)).collect();
    let level = match &r.verdict {
        Verdict::Infinite(c) => c.level,
        other => return Err(format!("verdict {}", other)),
    };
    ensure(elapsed < EDGE_BUDGET, format!("took {:?}", elapsed))?;
    ensure(off.is_empty(), format!("level-1 terms not all 1 ({}); certificate level {}", off.join(", "), level))?;
    ensure(level == 1, format!("certificate fires at level {}", level))?;
    Ok(format!("all terms 1, certificate at level 1, {:?}", elapsed))
}

fn fat_odometer() -> Check {
    let (a, t) = (Seq::geometric(2, 2), Seq::constant(1));
    let r = lib(fat_odometer_extension(&a, &t, 12, 1e-12))?;
    ensure(r.verdict.is_finite(), format!("verdict {}", r.verdict))?;
    let d = family(FamilySpec::FatOdometer { a: a.clone(), t })?;
    let mut den = Q::one();
    for n in 1..=SATURATION_DEPTH {
        den *= a.at_q(n - 1);
        let mass = Q::from_integer(count_paths(&d, n, 0).into()) / &den;
        ensure(r.partial_sums[n - 1] == mass, format!("level {}: {} vs {}", n, r.partial_sums[n - 1], mass))?;
    }
    Ok(format!("Finite, {} saturation masses equal", SATURATION_DEPTH))
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
            Ok((0..=top).map(|w| (w, if v == 0 && w == 0 { a.at_u64(n).unwrap() } else { 1 })).collect())
        },
    )
}

fn stepwise() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..STEPWISE_PAIRS {
        let (a0, a1, t0) = (rng.random_range(1..100u64), rng.random_range(1..10u64), rng.random_range(1..100u64));
        let a = Seq::List { values: vec![a0, a1], tail: Box::new(Seq::constant(2)) };
        let t = Seq::List { values: vec![t0], tail: Box::new(Seq::constant(1)) };
        let s = lib(stepwise_chain(&a, &t, 4, 1e-12))?;
        ensure(s.k[2] == BigUint::from(a0 + t0), format!("k(2) = {} for a0 = {}, t0 = {}", s.k[2], a0, t0))?;
    }
    let inf = lib(stepwise_chain(&Seq::constant(2), &Seq::constant(1), 12, 1e-12))?;
    ensure(matches!(inf.report.verdict, Verdict::Infinite(_)), format!("a = 2 gave {}", inf.report.verdict))?;
    let (a, t) = (Seq::geometric(2, 2), Seq::constant(1));
    let fin = lib(stepwise_chain(&a, &t, 12, 1e-12))?;
    ensure(fin.report.verdict.is_finite(), format!("a = 2^(n+1) gave {}", fin.report.verdict))?;
    for s in [&inf, &fin] {
        ensure(s.report.partial_sums.windows(2).all(|w| w[0] <= w[1]), "partial sums decrease")?;
    }
    let sub = lib(VertexSubdiagram::singleton(stepwise_diagram(a.clone(), t), 0))?;
    let (direct, _) = lib(vertex_increments(&sub, &MeasureSpec::odometer(a, 0), 9))?;
    ensure(direct[1..] == fin.report.increments[..8], "terms differ from the extension inside B'")?;
    Ok(format!("{} pairs give k(2) = a0 + t0; Infinite / Finite; monotone; B' terms equal", STEPWISE_PAIRS))
}

/// Root in `(1, 2)` of `Σ_{i=1}^k x^{-i} = 1`.
fn renewal_root(k: usize) -> f64 {
    let f = |x: f64| (1..=k).map(|i| x.powi(-(i as i32))).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
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

fn renewal() -> Check {
    let d = family(FamilySpec::Leslie { b: Seq::constant(1), s: Seq::constant(1) })?;
    let ks: Vec<usize> = (2..=25).collect();
    let seq = lib(truncation_sequence(&lib(transpose_accessor(&d))?, &ks, 1e-13, DEFAULT_MAX_ITER))?;
    let lam = |k: usize| seq.entries.iter().find(|e| e.0 == k).map(|e| e.1.lambda).unwrap();
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    ensure((lam(2) - golden).abs() < RENEWAL_TOL, format!("lambda_2 = {}", lam(2)))?;
    ensure((lam(3) - RENEWAL_LAMBDA_3).abs() < RENEWAL_TOL, format!("lambda_3 = {}", lam(3)))?;
    for k in 2..=20 {
        ensure((lam(k) - renewal_root(k)).abs() < RENEWAL_TOL, format!("lambda_{} off the bisection root", k))?;
    }
    ensure(seq.entries.windows(2).all(|w| w[0].1.lambda <= w[1].1.lambda), "lambda_k decreases")?;
    ensure((lam(20) - 2.0).abs() < RENEWAL_LIMIT_TOL, format!("lambda_20 = {}", lam(20)))?;
    let target = MeasureSpec::StationaryEigen(lib(leslie_constant_spec(1, 1).normalized())?);
    let cyls = lib(cylinders_up_to(&d, 2, (1, 3)))?;
    let r = lib(truncation_measure_convergence(&d, &target, &ks, &cyls, RENEWAL_SIGMA_TOL))?;
    let sigma = *r.sigmas.last().unwrap();
    ensure((sigma - 2.0).abs() < RENEWAL_SIGMA_TOL, format!("sigma_25 = {}", sigma))?;
    let one = r.trajectories.iter().find(|t| t.cylinder.id == "[1]").ok_or("no cylinder [1]")?;
    let last = *one.values.last().unwrap();
    ensure((last - 0.5).abs() < RENEWAL_SIGMA_TOL, format!("mu_25([1]) = {}", last))?;
    Ok(format!("lambda_20 = {:.9}, sigma_25 = {:.9}, mu_25([1]) = {:.9}", lam(20), sigma, last))
}

fn lower_triangular() -> Check {
    let d = family(FamilySpec::LowerTriangular)?;
    let m = lib(triangular_family_measure(&q(1, 2)))?;
    for n in 0..TRIANGULAR_LEVELS {
        let r = lib(verify_tail_invariance(&m, &d, n, (1, TRIANGULAR_VERTICES)))?;
        ensure(r.exact == Some(Q::zero()), format!("level {} residual {:?}", n, r.exact))?;
    }
    Ok(format!("residual exactly 0 on levels < {}, vertices <= {}", TRIANGULAR_LEVELS, TRIANGULAR_VERTICES))
}

fn b2n_dynamics() -> Check {
    let t = Seq::geometric(1, 2);
    let od: OrderedDiagram = lib(ordered_bt(&t))?;
    for i in -10..=10 {
        ensure(lib(source_shift_check(&t, i, WANDER_SAMPLES, WANDER_DEPTH, 11))?, format!("source {} shift", i))?;
        let r = lib(empirical_wandering(&od, &t, i, WANDER_KMAX, WANDER_DEPTH, WANDER_SAMPLES, 11))?;
        ensure(r.wandering && r.returns == 0, format!("source {} returned", i))?;
    }
    let ls = lib(l_sequence(&t, 30))?;
    ensure(ls.iter().all(|&l| l == 2), "L_n != 2")?;
    ensure(lib(wandering_certificate(&t, 30))?.is_certified(), "B(2^n) not certified")?;
    let tp = Seq::List { values: vec![1], tail: Box::new(t) };
    let vals: Vec<i128> = (0..6).map(|n| tp.at_u64(n).unwrap() as i128).collect();
    let l1 = 2 * (vals[1] - vals[0]);
    ensure(l1 == 0 && lib(l_sequence(&tp, 5))?[1] == l1, "L_1 of t' is not 0")?;
    ensure(matches!(lib(wandering_certificate(&tp, 20))?, WanderingVerdict::NotCertified { .. }), "t' certified")?;
    Ok(String::from("shift +2 and no returns on 21 sources; Certified; t' has L_1 = 0 and is NotCertified"))
}

/// `|E_n|` and the number of two-step paths `E_{n+1} ∘ E_n`, from rows.
fn parent_counts(d: &Diagram, n: usize) -> Option<(u64, u64)> {
    let sum = |k: usize, v: i64| d.row(k, v).unwrap().iter().map(|e| e.1).sum::<u64>();
    let top = d.vertex_set(n + 1).members()?;
    let above = d.vertex_set(n + 2).members()?;
    let edges = top.iter().map(|&v| sum(n, v)).sum();
    let two = above.iter().map(|&v| d.row(n + 1, v).unwrap().iter().map(|&(u, c)| c * sum(n, u)).sum::<u64>()).sum();
    Some((edges, two))
}

fn zero_one_procedure() -> Check {
    let f = family(FamilySpec::StationaryFinite { matrix: vec![vec![2, 0], vec![1, 3]] })?;
    let m = lib(image_matrix(&zero_one(&OrderedDiagram::left_to_right(f)), 0))?;
    let (top, bottom) = (vec![1, 1, 0, 0, 0, 0], vec![0, 0, 1, 1, 1, 1]);
    let expected = vec![top.clone(), top.clone(), top, bottom.clone(), bottom.clone(), bottom];
    ensure(m == expected, format!("image matrix {:?}", m))?;
    let mut checked = 0;
    for fx in fixtures() {
        let Ok(d) = fx.config.diagram.build() else { continue };
        let zi = zero_one(&OrderedDiagram::left_to_right(d.clone()));
        for n in 0..3 {
            let Some((edges, two)) = parent_counts(&d, n) else { continue };
            let c = lib(count_identities(&zi, n))?;
            ensure(c.vertices == (edges, edges) && c.edges == (two, two), format!("{} level {}: {:?}", fx.id, n, c))?;
            checked += 1;
        }
    }
    ensure(checked > 0, "no finite golden diagram")?;
    let zi = zero_one(&OrderedDiagram::left_to_right(family(FamilySpec::BtGeneral { t: Seq::constant(1) })?));
    let p = lib(verify_preserved_properties(&zi, 3, (-8, 8)))?;
    ensure(p.all_preserved() && p.stationary == Some(true), format!("{:?}", p))?;
    let w = p.toeplitz_witness.ok_or("no horizontal-stationarity witness")?;
    ensure(w.entries.0 != w.entries.1, "witness entries agree")?;
    let parent = family(FamilySpec::Odometer { a: Seq::constant(3) })?;
    let sub = lib(EdgeSubdiagram::new(parent.clone(), family(FamilySpec::Odometer { a: Seq::constant(2) })?))?;
    let om = MeasureSpec::odometer(Seq::constant(2), 0);
    let (edge, _) = lib(edge_increments(&sub, &om, 6))?;
    let zi = zero_one(&OrderedDiagram::left_to_right(parent));
    let nu = lib(zi.pushforward(&om))?;
    let (vertex, _) = lib(vertex_increments(&lib(zi.retained_vertices(&sub))?, &nu, 6))?;
    ensure(edge == vertex, "edge and vertex increments differ")?;
    Ok(format!(
        "6x6 matrix exact; {} count identities; ERS/ECS/stationarity kept; witness at ({}, {})",
        checked, w.i, w.j
    ))
}

fn rank2_convergence() -> Check {
    let r = lib(rank2_counterexample(RANK2_LEVELS))?;
    let mut h = Q::zero();
    for (k, m) in r.masses.iter().enumerate() {
        h += q(1, k as i64 + 1);
        ensure(*m == Q::one() + &h / q(2, 1), format!("mass at n = {} is {}", k + 1, m))?;
    }
    let ex = lib(Rank2Example::new())?;
    for i in 1..6 {
        let c = Rank2Cylinder { entry: i, length: i + 2 };
        let hat = ex.mu_hat(&c);
        for n in i..=RANK2_LEVELS {
            let gap = ex.mu_n(n, &c) - ex.mu(&c);
            ensure(gap == &hat / Q::from_integer(BigInt::from(n + 1 - i)), format!("gap for C_{} at n = {}", i, n))?;
        }
    }
    let mu = vec![q(1, 2), q(1, 4), q(1, 8)];
    let nu = vec![q(1, 3), q(1, 9), q(1, 27)];
    let s = subprobability_mass_limit(&mu, &nu, &Some(q(1, 2)), |n| (q(n as i64, n as i64 + 1), Q::zero()), 2000, 1e-3);
    ensure(s.subprobability && s.masses_converge && !s.violation, format!("{:?}", s.masses.last()))?;
    Ok(format!("masses 1 + H_n/2 to n = {}; gaps mu_hat/(n+1-i); subprobability masses -> 1", RANK2_LEVELS))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("heights equal brute-force path counts", heights_oracle),
        ("stochastic rows sum to one", stochastic_rows),
        ("tridiagonal odometer extension", tridiagonal_extension),
        ("direct and telescoped increments agree", extension_formulas_agree),
        ("edge example level sum", edge_example),
        ("fat odometer against saturation masses", fat_odometer),
        ("step-by-step chain", stepwise),
        ("renewal truncations", renewal),
        ("lower-triangular invariance", lower_triangular),
        ("B(2^n) wandering", b2n_dynamics),
        ("0-1 procedure", zero_one_procedure),
        ("rank-two convergence counterexample", rank2_convergence),
    ];
    let mut out = std::io::stdout().lock();
    let mut red = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        match check() {
            Ok(detail) => writeln!(out, "criterion {:>2} PASS  {}: {}", id, name, detail).unwrap(),
            Err(detail) => {
                let tag = if KNOWN_RED.contains(&id) { "FAIL (known)" } else { "FAIL" };
                writeln!(out, "criterion {:>2} {}  {}: {}", id, tag, name, detail).unwrap();
                red.push(id);
            }
        }
    }
    assert_eq!(red, KNOWN_RED, "failing criteria differ from the known set");
}
