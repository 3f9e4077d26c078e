//! CSV and JSON emitters. Every CSV gets a sibling `.json` file carrying the
//! schema version, code version and full parameter set, since RFC-4180 CSV
//! has no room for metadata. Floats are written in shortest round-trip
//! exponent form so repeated runs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coherence::{CoherenceTrace, RunParams};
use crate::error::{Error, Result};
use crate::liouvillian::LaserParams;
use crate::phase_space::QField;
use crate::spectrum::Spectrum;

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Contents of a sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub code_version: String,
    /// `g1_trace`, `spectrum`, `q_field`, `sweep`, ...
    pub kind: String,
    /// File name of the CSV this record describes.
    pub data_file: String,
    pub columns: Vec<String>,
    pub params: Value,
    pub metadata: Value,
}

pub fn format_float(x: f64) -> String {
    format!("{x:e}")
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Writes a numeric table and its sidecar.
pub fn write_table(
    path: &Path,
    kind: &str,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
    params: Value,
    metadata: Value,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns)?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                found: row.len(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let data_file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    write_json(
        &sidecar_path(path),
        &Provenance {
            schema_version: SCHEMA_VERSION,
            code_version: CODE_VERSION.to_string(),
            kind: kind.to_string(),
            data_file,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            params,
            metadata,
        },
    )
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// Columns `kappa_t, re_g1, im_g1, abs_g1`; times are in units of 1/κ.
pub fn write_trace(path: &Path, trace: &CoherenceTrace) -> Result<()> {
    let kappa = trace.params.map_or(1.0, |p| p.laser.kappa);
    let rows = trace.times.iter().zip(&trace.values).map(|(t, g)| {
        vec![
            format_float(t * kappa),
            format_float(g.re),
            format_float(g.im),
            format_float(g.norm()),
        ]
    });
    let meta = serde_json::json!({
        "omega_bar": trace.omega_bar,
        "revival_period": trace.revival_period,
        "tail_population": trace.tail_population,
        "samples": trace.times.len(),
    });
    write_table(
        path,
        "g1_trace",
        &["kappa_t", "re_g1", "im_g1", "abs_g1"],
        rows,
        to_value(&trace.params)?,
        meta,
    )
}

/// Reads a trace written by [`write_trace`], restoring parameters from the
/// sidecar when present.
pub fn read_trace(path: &Path) -> Result<CoherenceTrace> {
    let side = sidecar_path(path);
    let prov: Option<Provenance> = if side.exists() {
        Some(serde_json::from_str(&fs::read_to_string(&side)?)?)
    } else {
        None
    };
    let params: Option<RunParams> = match &prov {
        Some(p) => serde_json::from_value(p.params.clone())?,
        None => None,
    };
    let kappa = params.map_or(1.0, |p| p.laser.kappa);
    let mut r = csv::Reader::from_path(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Io(format!("bad field {i} in {}", path.display())))
        };
        times.push(f(0)? / kappa);
        values.push(Complex64::new(f(1)?, f(2)?));
    }
    let meta = prov.map(|p| p.metadata).unwrap_or(Value::Null);
    Ok(CoherenceTrace {
        times,
        values,
        params,
        omega_bar: meta.get("omega_bar").and_then(Value::as_f64),
        revival_period: meta.get("revival_period").and_then(Value::as_f64),
        tail_population: meta
            .get("tail_population")
            .and_then(Value::as_f64)
            .unwrap_or(0.0),
    })
}

/// Columns `omega_over_kappa, P`; P integrates to κμ over dω/2π.
pub fn write_spectrum(path: &Path, s: &Spectrum, p: &LaserParams, params: Value) -> Result<()> {
    let rows = s
        .frequencies
        .iter()
        .zip(&s.values)
        .map(|(w, v)| vec![format_float(w / p.kappa), format_float(*v)]);
    let meta = serde_json::json!({
        "laser": p,
        "total_flux": s.total_flux,
        "normalization": s.normalization,
    });
    write_table(path, "spectrum", &["omega_over_kappa", "P"], rows, params, meta)
}

/// Columns `re_alpha, im_alpha, q`, row-major with Re α fastest.
pub fn write_q_field(path: &Path, q: &QField, params: Value) -> Result<()> {
    let nx = q.grid.re.len();
    let rows = q.values.iter().enumerate().map(|(k, v)| {
        vec![
            format_float(q.grid.re[k % nx]),
            format_float(q.grid.im[k / nx]),
            format_float(*v),
        ]
    });
    let meta = serde_json::json!({
        "nx": nx,
        "ny": q.grid.im.len(),
        "re_range": [q.grid.re.first(), q.grid.re.last()],
        "im_range": [q.grid.im.first(), q.grid.im.last()],
        "integral": q.integral,
        "clipped": q.clipped,
        "min_raw": q.min_raw,
        "dim": q.dim,
    });
    write_table(path, "q_field", &["re_alpha", "im_alpha", "q"], rows, params, meta)
}
