use std::collections::BTreeSet;

use bratteli::combinatorics::HeightTable;
use bratteli::convergence::{
    cylinders_up_to, rank2_counterexample, truncation_measure_convergence, Rank2Cylinder, Rank2Example,
};
use bratteli::diagram::{Diagram, FamilySpec};
use bratteli::dynamics::{
    empirical_wandering, l_sequence, ordered_bt, source_shift_check, wandering_certificate, OrderedDiagram,
    WanderingVerdict,
};
use bratteli::extension::{
    edge_extension_series, exhaustion_check, horizon_extension_measure, stepwise_chain,
    stochastic_sufficient_condition, vertex_extension_series, window_mass, EdgeSubdiagram, ExtensionReport,
    VertexSubdiagram,
};
use bratteli::measure::{triangular_family_measure, verify_tail_invariance, MeasureSpec, Scalar};
use bratteli::perron::{
    classify_recurrence, edge_example_eigen, finite_exact_eigen, leslie_constant_spec, leslie_eigenvector,
    leslie_lambda, stationary_measure, transpose_accessor, truncation_sequence, DEFAULT_MAX_ITER,
};
use bratteli::seq::Seq;
use bratteli::series::Verdict;
use bratteli::transform::{count_identities, image_matrix, verify_preserved_properties, zero_one};
use bratteli::Q;
use num_traits::Zero;
use serde_json::{json, Value};

use crate::config::{parse_q, Action, DiagramDoc, ExperimentConfig, MeasureDoc, SubDoc, WSpec};
use crate::output::{f64_str, q_f64, q_str, Outcome, Status, Table};
use crate::CliError;

const DEFAULT_KMAX: usize = 8;
const DEFAULT_SAMPLES: usize = 200;
const DEFAULT_EPS: f64 = 1e-3;
const DEFAULT_CYLINDER_LENGTH: usize = 3;
const DEFAULT_IMAGE_LEVELS: usize = 2;
const DEFAULT_EXHAUST_K: usize = 4;

/// Runs one experiment. Identical configs give identical outcomes.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let d = cfg.diagram.build()?;
    match cfg.action {
        Action::Heights => run_heights(cfg, &d),
        Action::Measure => run_measure(cfg, &d),
        Action::ExtendVertex => run_extend_vertex(cfg, &d),
        Action::ExtendEdge => run_extend_edge(cfg, &d),
        Action::PerronTruncate => run_perron(cfg, &d),
        Action::Leslie => run_leslie(cfg, &d),
        Action::DynamicsWander => run_wander(cfg),
        Action::ZeroOne => run_zero_one(cfg, &d),
        Action::Converge => run_converge(cfg, &d),
        Action::Exhaust => run_exhaust(cfg, &d),
    }
}

fn outcome(action: Action, table: Table, summary: Value) -> Outcome {
    Outcome { action: action.name(), table, summary, verdict: None, status: Status::Ok }
}

fn run_heights(cfg: &ExperimentConfig, d: &Diagram) -> Result<Outcome, CliError> {
    let targets: Vec<BTreeSet<i64>> = (0..=cfg.depth)
        .map(|n| {
            d.vertex_set(n).clip(cfg.window.0, cfg.window.1).map_or_else(BTreeSet::new, |(lo, hi)| (lo..=hi).collect())
        })
        .collect();
    let table = HeightTable::build(d, &targets)?;
    let mut t = Table::new(&["level", "vertex", "height"]);
    let mut largest = 0u64;
    for (n, vs) in targets.iter().enumerate() {
        for &v in vs {
            let x = table.require(n, v)?;
            largest = largest.max(x.bits());
            t.push(vec![n.to_string(), v.to_string(), x.to_string()]);
        }
    }
    let summary = json!({ "levels": cfg.depth + 1, "window": [cfg.window.0, cfg.window.1], "max_bits": largest });
    Ok(outcome(cfg.action, t, summary))
}

/// The measure named by the config, or the family default.
pub fn measure_spec(cfg: &ExperimentConfig, d: &Diagram) -> Result<MeasureSpec, CliError> {
    let doc = match &cfg.measure {
        Some(m) => m.clone(),
        None => default_measure(cfg)?,
    };
    Ok(match doc {
        MeasureDoc::Odometer { a, base } => MeasureSpec::odometer((&a).into(), base),
        MeasureDoc::EdgeExample { normalized } => {
            let e = edge_example_eigen();
            MeasureSpec::StationaryEigen(if normalized { e.normalized()? } else { e })
        }
        MeasureDoc::Leslie { b, s } => MeasureSpec::StationaryEigen(leslie_constant_spec(b, s).normalized()?),
        MeasureDoc::FiniteEigen { lambda } => {
            let e = finite_exact_eigen(d, &parse_q(&lambda)?)?;
            stationary_measure(d, e, cfg.window)?.spec
        }
        MeasureDoc::Triangular { a } => triangular_family_measure(&parse_q(&a)?)?,
        MeasureDoc::Horizon { v0, horizon } => horizon_extension_measure(d, v0, horizon)?,
    })
}

fn default_measure(cfg: &ExperimentConfig) -> Result<MeasureDoc, CliError> {
    let missing = || CliError::Config(format!("action {} on this family needs a \"measure\"", cfg.action.name()));
    let base = match &cfg.sub {
        Some(SubDoc::Vertex { w }) => match w.parse::<WSpec>()? {
            WSpec::Singleton(v) => v,
            _ => 0,
        },
        _ => 0,
    };
    match (&cfg.diagram, &cfg.sub) {
        (DiagramDoc::EdgeExample {}, Some(SubDoc::Edge { retained: DiagramDoc::EdgeExampleSub {} })) => {
            Ok(MeasureDoc::EdgeExample { normalized: true })
        }
        (_, Some(SubDoc::Edge { retained })) => {
            let a = retained.loop_sequence().ok_or_else(missing)?;
            Ok(MeasureDoc::Odometer { a: seq_doc(&a), base: 0 })
        }
        (DiagramDoc::LowerTriangular {}, _) => Ok(MeasureDoc::Triangular { a: "1/2".into() }),
        (DiagramDoc::Leslie { b: crate::SeqDoc::Constant { c: b }, s: crate::SeqDoc::Constant { c: s } }, _) => {
            Ok(MeasureDoc::Leslie { b: *b, s: *s })
        }
        (DiagramDoc::EdgeExampleSub {}, _) => Ok(MeasureDoc::EdgeExample { normalized: true }),
        (doc, _) => {
            let a = doc.loop_sequence().ok_or_else(missing)?;
            Ok(MeasureDoc::Odometer { a: seq_doc(&a), base })
        }
    }
}

fn seq_doc(s: &Seq) -> crate::SeqDoc {
    use crate::SeqDoc as S;
    match s {
        Seq::Constant(c) => S::Constant { c: *c },
        Seq::Geometric { c, rho } => S::Geometric { c: *c, rho: *rho },
        Seq::Polynomial(cs) => S::Polynomial { coeffs: cs.clone() },
        Seq::List { values, tail } => S::List { values: values.clone(), tail: Box::new(seq_doc(tail)) },
    }
}

fn scalar_str(s: &Scalar) -> String {
    match s {
        Scalar::Exact(q) => q_str(q),
        Scalar::Float(x) => f64_str(*x),
    }
}

fn run_measure(cfg: &ExperimentConfig, d: &Diagram) -> Result<Outcome, CliError> {
    let m = measure_spec(cfg, d)?;
    let mut t = Table::new(&["level", "vertex", "p_value"]);
    for n in 0..=cfg.depth {
        let Some((lo, hi)) = d.vertex_set(n).clip(cfg.window.0, cfg.window.1) else { continue };
        for v in lo..=hi {
            let p = match m.p_exact(n, v) {
                Some(q) => q_str(&q),
                None => f64_str(m.p_f64(n, v)),
            };
            t.push(vec![n.to_string(), v.to_string(), p]);
        }
    }
    let checked = match &cfg.measure {
        Some(MeasureDoc::Horizon { horizon, .. }) => cfg.depth.min(*horizon),
        _ => cfg.depth,
    };
    let mut residuals = Vec::new();
    let mut worst_exact = Q::zero();
    let mut worst_float = 0.0f64;
    for n in 0..checked {
        let r = verify_tail_invariance(&m, d, n, cfg.window)?;
        if let Some(q) = &r.exact {
            if *q > worst_exact {
                worst_exact = q.clone();
            }
        }
        worst_float = worst_float.max(r.max_abs);
        residuals
            .push(json!({ "level": n, "max_abs": r.max_abs, "exact": r.exact.as_ref().map(q_str), "worst": r.worst }));
    }
    let exact = m.is_exact();
    let mut out = outcome(
        cfg.action,
        t,
        json!({
            "exact": exact,
            "checked_levels": checked,
            "max_residual": if exact { q_str(&worst_exact) } else { f64_str(worst_float) },
            "residuals": residuals,
        }),
    );
    let violated = if exact { !worst_exact.is_zero() } else { worst_float > cfg.tol.max(1e-12) };
    if violated {
        out.status = Status::CheckFailed(String::from("tail invariance residual is not zero"));
    }
    Ok(out)
}

fn vertex_sub(d: &Diagram, w: &str) -> Result<VertexSubdiagram, CliError> {
    Ok(match w.parse::<WSpec>()? {
        WSpec::Singleton(v) => VertexSubdiagram::singleton(d.clone(), v)?,
        WSpec::Full => VertexSubdiagram::full(d.clone())?,
        WSpec::Exhaustion(k) => VertexSubdiagram::exhaustion(d.clone(), k)?,
        WSpec::Interval(lo, hi) => {
            VertexSubdiagram::intervals(d.clone(), format!("[{}, {}]", lo, hi), move |_| (lo, hi))?
        }
    })
}

fn series_table(r: &ExtensionReport, first: usize) -> Table {
    let mut t = Table::new(&["n", "increment", "partial_sum", "criterion_flags"]);
    let flags = r.criteria.join(";");
    for (i, (x, s)) in r.increments.iter().zip(&r.partial_sums).enumerate() {
        t.push(vec![(i + first).to_string(), q_f64(x), q_f64(s), flags.clone()]);
    }
    t
}

fn verdict_json(v: &Verdict) -> Value {
    match v {
        Verdict::Finite { partial, tail_bound, depth } => json!({
            "label": "Finite", "partial": q_str(partial), "partial_f64": q_f64(partial),
            "tail_bound": tail_bound, "depth": depth,
        }),
        Verdict::Infinite(c) => json!({
            "label": "Infinite", "certificate": c.kind.name(), "level": c.level, "detail": c.detail,
        }),
        Verdict::Inconclusive { depth, note } => json!({ "label": "Inconclusive", "depth": depth, "note": note }),
    }
}

fn series_outcome(cfg: &ExperimentConfig, r: &ExtensionReport, first: usize, mut extra: Value) -> Outcome {
    let mut summary = json!({
        "verdict": verdict_json(&r.verdict),
        "criteria": r.criteria,
        "forms_agree": r.forms_agree(),
        "terms": r.increments.len(),
    });
    if let Some((level, terms)) = &r.window_terms {
        summary["window_terms"] = json!({
            "level": level,
            "terms": terms.iter().map(|(v, x)| json!([v, q_str(x)])).collect::<Vec<_>>(),
        });
    }
    if let (Value::Object(s), Value::Object(e)) = (&mut summary, &mut extra) {
        s.append(e);
    }
    let mut out = outcome(cfg.action, series_table(r, first), summary);
    out.verdict = Some(r.verdict.label().to_string());
    if !r.forms_agree() {
        out.status = Status::CheckFailed(String::from("direct and telescoped increments differ"));
    }
    out
}

fn run_extend_vertex(cfg: &ExperimentConfig, d: &Diagram) -> Result<Outcome, CliError> {
    let sub = cfg.sub.clone().unwrap_or(SubDoc::Vertex { w: String::from("singleton:0") });
    match sub {
        SubDoc::Stepwise {} => {
            let DiagramDoc::FatOdometer { a, t } = &cfg.diagram else {
                return Err(CliError::Config("the stepwise chain needs a fat_odometer diagram".into()));
            };
            let s = stepwise_chain(&a.into(), &t.into(), cfg.depth, cfg.tol)?;
            let extra = json!({
                "h0": s.h0.iter().take(8).map(|x| x.to_string()).collect::<Vec<_>>(),
                "k": s.k.iter().take(8).map(|x| x.to_string()).collect::<Vec<_>>(),
                "infinite_in_full": s.infinite_in_full,
                "monotone": s.report.partial_sums.windows(2).all(|w| w[0] <= w[1]),
            });
            Ok(series_outcome(cfg, &s.report, 1, extra))
        }
        SubDoc::Vertex { w } => {
            let vs = vertex_sub(d, &w)?;
            let m = measure_spec(cfg, d)?;
            let r = vertex_extension_series(&vs, &m, cfg.depth, cfg.tol)?;
            let stochastic = match stochastic_sufficient_condition(&vs, cfg.depth, cfg.tol) {
                Ok(s) => json!({ "bound": s.bound, "m1": q_str(&s.m1), "verdict": s.verdict.label() }),
                Err(e) => json!({ "unavailable": e.to_string() }),
            };
            Ok(series_outcome(cfg, &r, 0, json!({ "sub": vs.label(), "stochastic": stochastic })))
        }
        SubDoc::Edge { .. } => Err(CliError::Config("extend-vertex needs a vertex subdiagram".into())),
    }
}

fn run_extend_edge(cfg: &ExperimentConfig, d: &Diagram) -> Result<Outcome, CliError> {
    let Some(SubDoc::Edge { retained }) = &cfg.sub else {
        return Err(CliError::Config("extend-edge needs {\"kind\": \"edge\", \"retained\": ...}".into()));
    };
    let sub = EdgeSubdiagram::new(d.clone(), retained.build()?)?;
    let m = measure_spec(cfg, d)?;
    let r = edge_extension_series(&sub, &m, cfg.depth, cfg.tol)?;
    Ok(series_outcome(cfg, &r, 0, json!({ "trivial": sub.is_trivial() })))
}

fn ks_or_default(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.ks.clone().unwrap_or_else(|| (2..=cfg.depth.max(2)).collect())
}

fn run_perron(cfg: &ExperimentConfig, d: &Diagram) -> Result<Outcome, CliError> {
    let a = transpose_accessor(d)?;
    let seq = truncation_sequence(&a, &ks_or_default(cfg), cfg.tol, DEFAULT_MAX_ITER)?;
    let mut t = Table::new(&["k", "lambda_k", "residual", "iterations"]);
    for (k, e) in &seq.entries {
        t.push(vec![k.to_string(), f64_str(e.lambda), f64_str(e.residual), e.iterations.to_string()]);
    }
    let limit = match d.family() {
        Some(FamilySpec::Leslie { b, s }) => leslie_lambda(b, s, cfg.tol).ok(),
        _ => None,
    };
    let summary = json!({
        "monotone": seq.monotone,
        "last_lambda": seq.entries.last().map(|e| e.1.lambda),
        "limit_lambda": limit,
    });
    let mut out = outcome(cfg.action, t, summary);
    if !seq.monotone {
        out.status = Status::CheckFailed(String::from("λ_k decreased along nested corners"));
    }
    Ok(out)
}

fn run_leslie(cfg: &ExperimentConfig, d: &Diagram) -> Result<Outcome, CliError> {
    let DiagramDoc::Leslie { b, s } = &cfg.diagram else {
        return Err(CliError::Config("the leslie action needs a leslie diagram".into()));
    };
    let (b, s): (Seq, Seq) = (b.into(), s.into());
    let lambda = leslie_lambda(&b, &s, cfg.tol)?;
    let ev = leslie_eigenvector(lambda, &s, cfg.depth);
    let mut t = Table::new(&["vertex", "xi"]);
    for (i, x) in ev.xi.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), f64_str(*x)]);
    }
    let rec = classify_recurrence(d, lambda, 1, cfg.depth)?;
    let summary = json!({
        "lambda": lambda,
        "sigma": ev.sigma,
        "tail_ratio": ev.tail_ratio,
        "divergent_mass": ev.divergent_mass,
        "recurrence": format!("{:?}", rec.verdict),
        "recurrence_note": rec.note,
    });
    Ok(outcome(cfg.action, t, summary))
}

fn run_wander(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let t = cfg
        .diagram
        .bt_sequence()
        .ok_or_else(|| CliError::Config("dynamics-wander needs a bt, bt_general or b2n diagram".into()))?;
    let od: OrderedDiagram = ordered_bt(&t)?;
    let kmax = cfg.kmax.unwrap_or(DEFAULT_KMAX);
    let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    let cert = wandering_certificate(&t, cfg.depth)?;
    let mut table = Table::new(&[
        "source",
        "samples",
        "skipped",
        "returns",
        "wandering",
        "displacements_in_l",
        "parity_preserved",
        "inverse_ok",
        "successor_source_plus_two",
    ]);
    let mut any_return = false;
    let mut broken = None;
    for i in cfg.window.0..=cfg.window.1 {
        let r = empirical_wandering(&od, &t, i, kmax, cfg.depth, samples, cfg.seed)?;
        let shift = source_shift_check(&t, i, samples, cfg.depth, cfg.seed)?;
        any_return |= r.returns > 0;
        if !(r.inverse_ok && r.displacements_in_l && r.parity_preserved) && broken.is_none() {
            broken = Some(i);
        }
        table.push(vec![
            i.to_string(),
            r.samples.to_string(),
            r.skipped.to_string(),
            r.returns.to_string(),
            r.wandering.to_string(),
            r.displacements_in_l.to_string(),
            r.parity_preserved.to_string(),
            r.inverse_ok.to_string(),
            shift.to_string(),
        ]);
    }
    let (label, reason, witness) = match &cert {
        WanderingVerdict::Certified { reason } => ("Certified", reason.clone(), None),
        WanderingVerdict::NotCertified { witness, reason } => ("NotCertified", reason.clone(), witness.clone()),
    };
    let l = l_sequence(&t, cfg.depth.saturating_sub(1).min(16))?;
    let summary = json!({
        "certificate": label,
        "reason": reason,
        "witness": witness,
        "l": l.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "empirical_wandering": !any_return,
        "kmax": kmax,
        "depth": cfg.depth,
        "seed": cfg.seed,
    });
    let mut out = outcome(cfg.action, table, summary);
    if let Some(i) = broken {
        out.status = Status::CheckFailed(format!("successor/predecessor invariants failed from source {}", i));
    } else if cert.is_certified() && any_return {
        out.status = Status::CheckFailed(String::from("a certified wandering cylinder returned"));
    }
    Ok(out)
}

fn run_zero_one(cfg: &ExperimentConfig, d: &Diagram) -> Result<Outcome, CliError> {
    let zi = zero_one(&OrderedDiagram::left_to_right(d.clone()));
    let levels = cfg.levels.unwrap_or(DEFAULT_IMAGE_LEVELS);
    let mut t = Table::new(&["level", "row", "col", "entry"]);
    let finite = (0..=levels + 1).all(|n| d.vertex_set(n).is_finite());
    let mut identities = Vec::new();
    let mut failed = None;
    for n in 0..levels {
        if finite {
            let m = image_matrix(&zi, n)?;
            let rows = zi.image.vertex_set(n + 1).members().unwrap_or_default();
            let cols = zi.image.vertex_set(n).members().unwrap_or_default();
            for (i, r) in rows.iter().zip(&m) {
                for (j, x) in cols.iter().zip(r) {
                    t.push(vec![n.to_string(), i.to_string(), j.to_string(), x.to_string()]);
                }
            }
            let c = count_identities(&zi, n)?;
            if !c.holds() && failed.is_none() {
                failed = Some(format!("count identities fail at level {}", n));
            }
            identities
                .push(json!({ "level": n, "vertices": [c.vertices.0, c.vertices.1], "edges": [c.edges.0, c.edges.1] }));
        } else if let Some((lo, hi)) = zi.image.vertex_set(n + 1).clip(cfg.window.0, cfg.window.1) {
            for k in lo..=hi {
                for (j, x) in zi.image.row(n, k)? {
                    t.push(vec![n.to_string(), k.to_string(), j.to_string(), x.to_string()]);
                }
            }
        }
    }
    let p = verify_preserved_properties(&zi, levels, cfg.window)?;
    if !p.all_preserved() && failed.is_none() {
        failed = Some(String::from("a property of the parent is lost in the image"));
    }
    let opt = |x: &Option<u64>| x.map_or(Value::Null, |v| json!(v));
    let summary = json!({
        "levels": levels,
        "count_identities": identities,
        "ers": p.ers.iter().map(|(a, b)| json!([opt(a), opt(b)])).collect::<Vec<_>>(),
        "ecs": p.ecs.iter().map(|(a, b)| json!([opt(a), opt(b)])).collect::<Vec<_>>(),
        "stationary": p.stationary,
        "toeplitz_witness": p.toeplitz_witness.as_ref().map(|w| json!({
            "level": w.level, "i": w.i, "j": w.j, "entries": [w.entries.0, w.entries.1],
        })),
        "all_preserved": p.all_preserved(),
        "notes": p.notes,
    });
    let mut out = outcome(cfg.action, t, summary);
    if let Some(m) = failed {
        out.status = Status::CheckFailed(m);
    }
    Ok(out)
}

fn run_converge(cfg: &ExperimentConfig, d: &Diagram) -> Result<Outcome, CliError> {
    let mut t = Table::new(&["n_or_k", "cylinder_id", "value", "target", "gap", "mass"]);
    match &cfg.diagram {
        DiagramDoc::Leslie { b: crate::SeqDoc::Constant { c: b }, s: crate::SeqDoc::Constant { c: s } } => {
            let target = MeasureSpec::StationaryEigen(leslie_constant_spec(*b, *s).normalized()?);
            let cyls = cylinders_up_to(d, cfg.levels.unwrap_or(DEFAULT_CYLINDER_LENGTH), cfg.window)?;
            let ks = cfg.ks.clone().unwrap_or_else(|| (2..=25).collect());
            let tol = if cfg.tol < 1e-9 { 1e-6 } else { cfg.tol };
            let r = truncation_measure_convergence(d, &target, &ks, &cyls, tol)?;
            for (i, k) in r.ks.iter().enumerate() {
                for tr in &r.trajectories {
                    t.push(vec![
                        k.to_string(),
                        tr.cylinder.id.clone(),
                        f64_str(tr.values[i]),
                        f64_str(tr.target),
                        f64_str(tr.gaps[i]),
                        f64_str(r.masses[i]),
                    ]);
                }
            }
            let summary = json!({
                "converged": r.converged,
                "tol": tol,
                "cylinders": cyls.len(),
                "lambdas": r.lambdas,
                "sigmas": r.sigmas,
                "last_sigma": r.sigmas.last(),
                "hypothesis": r.hypothesis,
            });
            Ok(outcome(cfg.action, t, summary))
        }
        DiagramDoc::Rank2Example {} => {
            let n_max = cfg.depth.max(1);
            let ex = Rank2Example::new()?;
            let rep = rank2_counterexample(n_max)?;
            for n in 1..=n_max {
                for i in 0..=3usize {
                    let c = Rank2Cylinder { entry: i, length: i + 1 };
                    let (v, target) = (ex.mu_n(n, &c), ex.mu(&c));
                    let gap = &v - &target;
                    t.push(vec![
                        n.to_string(),
                        format!("C{}:len{}", i, i + 1),
                        q_str(&v),
                        q_str(&target),
                        q_str(&gap),
                        q_str(&rep.masses[n - 1]),
                    ]);
                }
            }
            let summary = json!({
                "masses": rep.masses.iter().map(q_str).collect::<Vec<_>>(),
                "block_masses_half": rep.block_masses.iter().all(|m| *m == Q::new(1.into(), 2.into())),
                "masses_increase": rep.masses.windows(2).all(|w| w[0] < w[1]),
                "last_mass": q_f64(rep.masses.last().unwrap()),
            });
            Ok(outcome(cfg.action, t, summary))
        }
        _ => Err(CliError::Config("converge supports constant leslie diagrams and rank2_example".into())),
    }
}

fn run_exhaust(cfg: &ExperimentConfig, d: &Diagram) -> Result<Outcome, CliError> {
    let m = measure_spec(cfg, d)?;
    let k_max = cfg.kmax.unwrap_or(DEFAULT_EXHAUST_K) as u64;
    let eps = cfg.eps.unwrap_or(DEFAULT_EPS);
    let b = d.bounded_size().ok_or(bratteli::Error::MissingBoundedSizeParams)?.clone();
    let mut t = Table::new(&["k", "level", "window_mass"]);
    for k in 1..=k_max {
        for n in 0..=cfg.depth {
            let s: i64 = (0..n).map(|i| (b.t)(i) as i64).sum::<i64>() + k as i64;
            t.push(vec![k.to_string(), n.to_string(), scalar_str(&window_mass(d, &m, n, (-s, s))?)]);
        }
    }
    let r = exhaustion_check(d, &m, k_max, eps, cfg.depth)?;
    let summary = json!({
        "found": r.found,
        "witness": r.witness.map(|(n, size, k)| json!({ "level": n, "size": size, "k": k })),
        "mass": r.mass.as_ref().map(scalar_str),
        "eps": eps,
    });
    Ok(outcome(cfg.action, t, summary))
}
