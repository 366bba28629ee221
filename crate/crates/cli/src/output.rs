//! CSV and JSON writers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::envelope::{Cell, ResultEnvelope};
use crate::error::RunError;

/// 17 significant digits, enough to recover every `f64` exactly.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn cell_text(cell: &Cell) -> String {
    match cell {
        Cell::Null => String::new(),
        Cell::Bool(b) => b.to_string(),
        Cell::Int(i) => i.to_string(),
        Cell::Float(x) => format_float(*x),
        Cell::Text(s) => s.clone(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> RunError {
    RunError::Io { path: path.to_path_buf(), source }
}

pub fn to_csv(env: &ResultEnvelope) -> Result<Vec<u8>, RunError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let ser = |e: csv::Error| RunError::Serialize(e.to_string());
    writer.write_record(&env.columns).map_err(ser)?;
    for row in &env.rows {
        writer.write_record(row.iter().map(cell_text)).map_err(ser)?;
    }
    writer.into_inner().map_err(|e| RunError::Serialize(e.to_string()))
}

pub fn to_json(env: &ResultEnvelope) -> Result<Vec<u8>, RunError> {
    let mut bytes = serde_json::to_vec_pretty(env).map_err(|e| RunError::Serialize(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn render(env: &ResultEnvelope, format: Format) -> Result<Vec<u8>, RunError> {
    match format {
        Format::Csv => to_csv(env),
        Format::Json => to_json(env),
    }
}

/// Writes the envelope to `path`; the bytes depend only on config, seed and schema version.
pub fn write_results(env: &ResultEnvelope, path: &Path, format: Format) -> Result<(), RunError> {
    let bytes = render(env, format)?;
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// Sidecar path holding the run metadata.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_metadata(env: &ResultEnvelope, path: &Path) -> Result<(), RunError> {
    let meta = metadata_path(path);
    let body = serde_json::json!({
        "schema_version": env.schema_version,
        "input_hash": env.input_hash,
        "metadata": env.metadata,
    });
    let mut file = fs::File::create(&meta).map_err(|e| io_error(&meta, e))?;
    writeln!(file, "{body:#}").map_err(|e| io_error(&meta, e))
}
