use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bratteli_cli::config::{parse_window, ExperimentConfig};
use bratteli_cli::golden::{default_dir, golden_suite};
use bratteli_cli::output::write_atomic;
use bratteli_cli::{exit, run, Action, CliError, DiagramDoc, MeasureDoc, SeqDoc, SubDoc};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bratteli", version, about = "Experiments on generalized Bratteli diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the action named inside a config document.
    Run(Common),
    /// Heights of the vertices level by level.
    Heights(Common),
    /// Values of a tail-invariant measure and its invariance residuals.
    Measure(Common),
    /// Extension series of a measure from a vertex subdiagram.
    ExtendVertex(Common),
    /// Extension series of a measure from an edge subdiagram.
    ExtendEdge(Common),
    /// Perron eigenvalues of nested finite corners.
    PerronTruncate(Common),
    /// Perron eigenvalue, eigenvector and recurrence class of a Leslie diagram.
    Leslie(Common),
    /// Sampled Vershik orbits on B(t) and the wandering certificate.
    DynamicsWander {
        #[command(flatten)]
        common: Common,
        /// Sequence `t`, e.g. `geometric:1,2` or `list:1;geometric:1,2`.
        #[arg(long)]
        t: Option<String>,
    },
    /// The 0-1 transformation of a diagram.
    ZeroOne(Common),
    /// Convergence of truncation measures.
    Converge(Common),
    /// Exhaustion search for a small tower.
    Exhaust(Common),
    /// Replay the golden fixtures and report pass/fail per fixture.
    Golden {
        /// Run only the fixture with this id.
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline diagram document, e.g. '{"family":"b2n"}'.
    #[arg(long)]
    diagram: Option<String>,
    /// Inline subdiagram document.
    #[arg(long)]
    sub: Option<String>,
    /// Inline measure document.
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Vertex window as LO:HI.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    /// Comma-separated truncation sizes.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn inline<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("--{}: {}", what, e)))
}

fn build_config(c: &Common, action: Option<Action>, t: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let diagram = match (&c.diagram, t) {
        (Some(d), _) => Some(inline::<DiagramDoc>("diagram", d)?),
        (None, Some(t)) => Some(DiagramDoc::BtGeneral { t: t.parse::<SeqDoc>()? }),
        (None, None) => None,
    };
    let mut cfg = match (&c.config, diagram) {
        (Some(p), d) => {
            let mut cfg = ExperimentConfig::from_path(p)?;
            if let Some(d) = d {
                cfg.diagram = d;
            }
            cfg
        }
        (None, Some(d)) => ExperimentConfig::new(d, action.unwrap_or(Action::Heights)),
        (None, None) => return Err(CliError::Config("pass --config or --diagram".into())),
    };
    if let Some(a) = action {
        cfg.action = a;
    }
    if let Some(s) = &c.sub {
        cfg.sub = Some(inline::<SubDoc>("sub", s)?);
    }
    if let Some(m) = &c.measure {
        cfg.measure = Some(inline::<MeasureDoc>("measure", m)?);
    }
    if let Some(d) = c.depth {
        cfg.depth = d;
    }
    if let Some(x) = c.tol {
        cfg.tol = x;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.ks.is_some() {
        cfg.ks = c.ks.clone();
    }
    cfg.levels = c.levels.or(cfg.levels);
    cfg.kmax = c.kmax.or(cfg.kmax);
    cfg.samples = c.samples.or(cfg.samples);
    cfg.eps = c.eps.or(cfg.eps);
    if let Some(w) = &c.window {
        cfg.window = parse_window(w)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn run_action(c: &Common, action: Option<Action>, t: Option<&str>) -> Result<i32, CliError> {
    let cfg = build_config(c, action, t)?;
    let o = run(&cfg)?;
    let bytes = match c.format {
        Format::Csv => o.table.to_csv()?,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&o.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
    };
    emit(c.out.as_ref(), &bytes)?;
    if let Some(v) = &o.verdict {
        eprintln!("verdict: {}", v);
    }
    eprintln!("summary: {}", o.summary);
    if let bratteli_cli::Status::CheckFailed(m) = &o.status {
        eprintln!("check failed: {}", m);
    }
    Ok(o.exit_code())
}

fn run_golden(id: Option<&str>, dir: Option<&PathBuf>, out: Option<&PathBuf>) -> Result<i32, CliError> {
    let dir = dir.cloned().unwrap_or_else(default_dir);
    let results = golden_suite(&dir, id)?;
    let failed = results.iter().filter(|r| !r.passed).count();
    let report = serde_json::json!({
        "total": results.len(),
        "failed": failed,
        "results": results.iter().map(|r| serde_json::json!({ "id": r.id, "passed": r.passed, "detail": r.detail })).collect::<Vec<_>>(),
    });
    for r in &results {
        eprintln!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.id);
    }
    let mut s = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    emit(out, s.as_bytes())?;
    Ok(if failed == 0 { exit::OK } else { exit::CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Run(c) => run_action(c, None, None),
        Command::Heights(c) => run_action(c, Some(Action::Heights), None),
        Command::Measure(c) => run_action(c, Some(Action::Measure), None),
        Command::ExtendVertex(c) => run_action(c, Some(Action::ExtendVertex), None),
        Command::ExtendEdge(c) => run_action(c, Some(Action::ExtendEdge), None),
        Command::PerronTruncate(c) => run_action(c, Some(Action::PerronTruncate), None),
        Command::Leslie(c) => run_action(c, Some(Action::Leslie), None),
        Command::DynamicsWander { common, t } => run_action(common, Some(Action::DynamicsWander), t.as_deref()),
        Command::ZeroOne(c) => run_action(c, Some(Action::ZeroOne), None),
        Command::Converge(c) => run_action(c, Some(Action::Converge), None),
        Command::Exhaust(c) => run_action(c, Some(Action::Exhaust), None),
        Command::Golden { id, fixtures, out } => run_golden(id.as_deref(), fixtures.as_ref(), out.as_ref()),
    };
    match r {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
