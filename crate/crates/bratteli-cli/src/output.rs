use std::io::Write;
use std::path::Path;

use bratteli::Q;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use crate::{exit, CliError};

/// A CSV table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.header.iter().cloned().zip(r.iter().map(|x| json!(x))).collect()))
            .collect();
        Value::Array(rows)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Ok,
    /// A computed invariant failed; the message names it.
    CheckFailed(String),
}

/// Everything an action produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub action: &'static str,
    pub table: Table,
    pub summary: Value,
    /// `Finite`, `Infinite` or `Inconclusive` for series actions.
    pub verdict: Option<String>,
    pub status: Status,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => exit::OK,
            Status::CheckFailed(_) => exit::CHECK_FAILED,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "action": self.action,
            "verdict": self.verdict,
            "status": match &self.status { Status::Ok => "ok".to_string(), Status::CheckFailed(m) => format!("check failed: {}", m) },
            "summary": self.summary,
            "table": self.table.to_json(),
        })
    }
}

/// Exact rational as `p/q` (or `p`).
pub fn q_str(q: &Q) -> String {
    q.to_string()
}

/// Shortest round-trip decimal of the rational's nearest double.
pub fn q_f64(q: &Q) -> String {
    f64_str(q.to_f64().unwrap_or(f64::NAN))
}

/// Shortest round-trip form; exponent notation outside `[1e-5, 1e16)`.
pub fn f64_str(x: f64) -> String {
    format!("{:?}", x)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {}", path.display(), e));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| CliError::Io(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}
