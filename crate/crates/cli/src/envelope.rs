//! Result envelope shared by every command.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Version of the envelope layout and of every command's CSV column order.
pub const SCHEMA_VERSION: u32 = 1;

/// One table cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Null, Into::into)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub passed: bool,
    pub failed: usize,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn from_checks(checks: Vec<Check>) -> Self {
        let failed = checks.iter().filter(|c| !c.passed).count();
        Summary { passed: failed == 0, failed, checks }
    }
}

/// Run facts that vary between identical runs; written beside the results.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub wall_time_seconds: f64,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub schema_version: u32,
    pub config: RunConfig,
    /// Git-style blob hash (SHA-256) of the schema version and config echo.
    pub input_hash: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Summary,
    #[serde(skip)]
    pub metadata: Metadata,
}

/// `sha256("blob <len>\0" ‖ content)` in hex.
pub fn blob_hash(content: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", content.len()).as_bytes());
    hasher.update(content);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn input_hash(config: &RunConfig) -> String {
    let echo = serde_json::json!({ "schema_version": SCHEMA_VERSION, "config": config });
    blob_hash(echo.to_string().as_bytes())
}

impl ResultEnvelope {
    pub fn new(config: RunConfig, columns: &[&str], rows: Vec<Vec<Cell>>, checks: Vec<Check>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == columns.len()));
        ResultEnvelope {
            schema_version: SCHEMA_VERSION,
            input_hash: input_hash(&config),
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
            summary: Summary::from_checks(checks),
            metadata: Metadata::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn git_blob_header() {
        assert_eq!(blob_hash(b"hello"), "8aec4e4876f854f688d0ebfc8f37598f38e5fd6903cccc850ca36591175aeb60");
    }

    #[test]
    fn summary_counts_failures() {
        let s = Summary::from_checks(vec![Check::new("a", true, ""), Check::new("b", false, "")]);
        assert!(!s.passed);
        assert_eq!(s.failed, 1);
        assert!(Summary::from_checks(vec![]).passed);
    }

    #[test]
    fn cells_round_trip_through_json() {
        let cells = vec![Cell::Null, Cell::Bool(true), Cell::Int(-3), Cell::Float(0.1 + 0.2), Cell::Float(2.0), Cell::Text("x".into())];
        let text = serde_json::to_string(&cells).unwrap();
        let back: Vec<Cell> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cells);
    }
}
