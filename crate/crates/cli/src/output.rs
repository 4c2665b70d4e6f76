//! Verdict blocks and the files they are written to.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// The measured number(s) and the bound they were held to.
    pub value: Value,
    pub bound: Value,
}

impl Check {
    pub fn new(name: &str, pass: bool, value: impl Serialize, bound: impl Serialize) -> Self {
        Check {
            name: name.to_string(),
            status: if pass { Status::Pass } else { Status::Fail },
            value: serde_json::to_value(value).expect("serializable"),
            bound: serde_json::to_value(bound).expect("serializable"),
        }
    }

    pub fn skip(name: &str, reason: impl fmt::Display) -> Self {
        Check {
            name: name.to_string(),
            status: Status::Skip,
            value: Value::Null,
            bound: json!({ "skipped": reason.to_string() }),
        }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

/// Checks plus the numbers behind them.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub data: serde_json::Map<String, Value>,
}

impl Outcome {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn put(&mut self, key: &str, value: impl Serialize) {
        self.data
            .insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    pub fn extend(&mut self, other: Outcome) {
        self.checks.extend(other.checks);
        self.data.extend(other.data);
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| c.failed())
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !c.failed())
    }

    pub fn to_json(&self, meta: Value) -> Value {
        json!({
            "meta": meta,
            "pass": self.passed(),
            "checks": self.checks,
            "data": self.data,
        })
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}

/// A CSV file whose first line is a `#` comment carrying the meta block.
pub struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Csv {
    pub fn create(path: &Path, meta: &Value, header: &str) -> Result<Self, CliError> {
        let mut out = create(path)?;
        writeln!(out, "# {meta}\n{header}").map_err(|e| CliError::io(path, e))?;
        Ok(Csv {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        writeln!(self.out, "{}", fields.join(",")).map_err(|e| CliError::io(&self.path, e))
    }

    pub fn writer(&mut self) -> &mut BufWriter<File> {
        &mut self.out
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("parse error in {}: {e}", path.display())))
}
