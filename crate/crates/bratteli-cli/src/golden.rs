use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;
use crate::{run, CliError};

/// One recorded experiment and what it must produce.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub config: ExperimentConfig,
    pub expect: Expectation,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default)]
    pub verdict: Option<String>,
    #[serde(default)]
    pub exit: i32,
    /// Every key here must appear in the run summary with an equal value.
    #[serde(default)]
    pub summary: Map<String, Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldenResult {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

pub fn default_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Reads every `*.json` file under `dir`, sorted by file name.
pub fn load_fixtures(dir: &Path) -> Result<Vec<Fixture>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {}", dir.display(), e)))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {}", p.display(), e)))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", p.display(), e)))
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// `expected` is contained in `actual`; numbers compare to a relative 1e-9.
pub fn subset_match(expected: &Value, actual: &Value) -> bool {
    match (expected, actual) {
        (Value::Object(e), Value::Object(a)) => e.iter().all(|(k, v)| a.get(k).is_some_and(|w| subset_match(v, w))),
        (Value::Array(e), Value::Array(a)) => e.len() == a.len() && e.iter().zip(a).all(|(x, y)| subset_match(x, y)),
        (Value::Number(e), Value::Number(a)) => match (e.as_f64(), a.as_f64()) {
            (Some(x), Some(y)) => close(x, y),
            _ => e == a,
        },
        _ => expected == actual,
    }
}

pub fn check_fixture(f: &Fixture) -> GoldenResult {
    let fail = |detail: String| GoldenResult { id: f.id.clone(), passed: false, detail };
    let outcome = match run(&f.config) {
        Ok(o) => o,
        Err(e) => {
            return if e.exit_code() == f.expect.exit && f.expect.exit != 0 {
                GoldenResult { id: f.id.clone(), passed: true, detail: format!("expected error: {}", e) }
            } else {
                fail(format!("error (exit {}): {}", e.exit_code(), e))
            };
        }
    };
    if outcome.exit_code() != f.expect.exit {
        return fail(format!("exit {} expected {} ({:?})", outcome.exit_code(), f.expect.exit, outcome.status));
    }
    if f.expect.verdict.is_some() && outcome.verdict != f.expect.verdict {
        return fail(format!("verdict {:?} expected {:?}", outcome.verdict, f.expect.verdict));
    }
    let expected = Value::Object(f.expect.summary.clone());
    if !subset_match(&expected, &outcome.summary) {
        return fail(format!("summary mismatch: expected {} within {}", expected, outcome.summary));
    }
    GoldenResult { id: f.id.clone(), passed: true, detail: String::from("ok") }
}

/// Runs every fixture in `dir`, or only the one whose id is `only`.
pub fn golden_suite(dir: &Path, only: Option<&str>) -> Result<Vec<GoldenResult>, CliError> {
    let fixtures = load_fixtures(dir)?;
    let selected: Vec<&Fixture> = fixtures.iter().filter(|f| only.is_none_or(|id| f.id == id)).collect();
    if let (Some(id), true) = (only, selected.is_empty()) {
        return Err(CliError::Config(format!("no fixture with id {}", id)));
    }
    Ok(selected.into_iter().map(check_fixture).collect())
}
