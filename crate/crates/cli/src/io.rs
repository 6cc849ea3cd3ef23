//! CSV time series, JSON documents and checkpoints.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mshe_core::{Domain, DomainSpec, Field, FlowParams, Record, SchemeConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 6] = [
    "t",
    "energy",
    "l2_norm",
    "v_norm_sq",
    "residual_M",
    "dissipation_integral",
];

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `records` as CSV with 17 significant digits per value.
pub fn emit_timeseries(records: &[Record], path: &Path) -> Result<(), CliError> {
    if records.is_empty() {
        return Err(CliError::Usage(
            "refusing to write an empty trajectory".into(),
        ));
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(CSV_HEADER)
        .map_err(|e| CliError::io(path, e))?;
    for r in records {
        w.write_record([
            fmt(r.time),
            fmt(r.energy),
            fmt(r.l2_norm),
            fmt(r.v_norm_sq),
            fmt(r.residual_norm),
            fmt(r.dissipation_integral),
        ])
        .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Reads a file written by [`emit_timeseries`].
pub fn read_timeseries(path: &Path) -> Result<Vec<Record>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = r.headers().map_err(|e| CliError::io(path, e))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(CliError::io(
            path,
            format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| CliError::io(path, e))?;
        let v: Vec<f64> = row
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::io(path, format!("row {}: {e}", line + 2)))?;
        if v.len() != 6 {
            return Err(CliError::io(
                path,
                format!("row {}: expected 6 columns", line + 2),
            ));
        }
        out.push(Record {
            time: v[0],
            energy: v[1],
            l2_norm: v[2],
            v_norm_sq: v[3],
            residual_norm: v[4],
            dissipation_integral: v[5],
        });
    }
    Ok(out)
}

/// Column of `records` by CSV header name.
pub fn column(records: &[Record], name: &str) -> Result<Vec<f64>, CliError> {
    let f: fn(&Record) -> f64 = match name {
        "t" => |r| r.time,
        "energy" => |r| r.energy,
        "l2_norm" => |r| r.l2_norm,
        "v_norm_sq" => |r| r.v_norm_sq,
        "residual_M" => |r| r.residual_norm,
        "dissipation_integral" => |r| r.dissipation_integral,
        other => return Err(CliError::Usage(format!("unknown column {other:?}"))),
    };
    Ok(records.iter().map(f).collect())
}

/// `{"schema_version", "kind", "config", ...payload}`
pub fn document(kind: &str, config: &impl Serialize, payload: Value) -> Value {
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "config": config,
    });
    if let (Value::Object(d), Value::Object(p)) = (&mut doc, payload) {
        d.extend(p);
    }
    doc
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub kind: String,
    pub time: f64,
    pub step: u64,
    pub modes: Vec<f64>,
    pub domain: DomainSpec,
    pub params: FlowParams,
    pub scheme: SchemeConfig,
    pub dissipation_integral: f64,
    pub initial_energy: f64,
}

impl Checkpoint {
    pub const KIND: &'static str = "checkpoint";
}

/// Initial data read from a JSON file.
pub enum LoadedField {
    Plain(Field),
    Resume(Checkpoint, Field),
}

/// Accepts any JSON object with a `modes` array; checkpoints are recognised
/// by their `kind`.
pub fn load_field(path: &Path, domain: &Arc<Domain>) -> Result<LoadedField, CliError> {
    let v = read_json(path)?;
    let bad = |msg: String| CliError::io(path, msg);
    if v.get("kind").and_then(Value::as_str) == Some(Checkpoint::KIND) {
        let cp: Checkpoint = serde_json::from_value(v).map_err(|e| bad(e.to_string()))?;
        if cp.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema_version {}",
                cp.schema_version
            )));
        }
        if cp.domain != domain.spec() {
            return Err(bad(
                "checkpoint domain differs from the configured domain".into()
            ));
        }
        let f = Field::from_modes(domain, cp.modes.clone()).map_err(|e| bad(e.to_string()))?;
        return Ok(LoadedField::Resume(cp, f));
    }
    let modes: Vec<f64> = v
        .get("modes")
        .cloned()
        .ok_or_else(|| bad("no `modes` array".into()))
        .and_then(|m| serde_json::from_value(m).map_err(|e| bad(e.to_string())))?;
    let f = Field::from_modes(domain, modes).map_err(|e| bad(e.to_string()))?;
    Ok(LoadedField::Plain(f))
}

pub fn path_or(
    flag: Option<PathBuf>,
    config: &Option<PathBuf>,
    what: &str,
) -> Result<PathBuf, CliError> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| CliError::Usage(format!("no output path for the {what}; pass --out")))
}
