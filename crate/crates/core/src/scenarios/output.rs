//! CSV tables and run metadata sidecars.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

use super::runs::ScenarioTable;

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        // shortest representation that round-trips
        format!("{v}")
    }
}

/// Writes `x_m,y_m,value,<extras>,flag`. Failed rows carry `nan` and their
/// failure category in `flag`; successful rows say `ok`.
pub fn write_csv<W: Write>(table: &ScenarioTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x_m", "y_m", "value"];
    header.extend(table.extra_columns.iter().copied());
    header.push("flag");
    w.write_record(&header).map_err(csv_err)?;
    for r in &table.rows {
        let mut rec = vec![fmt(r.x_m), fmt(r.y_m), fmt(r.value)];
        rec.extend(r.extras.iter().map(|&v| fmt(v)));
        rec.push(r.flag.clone().unwrap_or_else(|| "ok".into()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => std::io::Error::new(std::io::ErrorKind::Other, format!("{other:?}")).into(),
    }
}

pub fn write_csv_file(table: &ScenarioTable, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(table, std::io::BufWriter::new(f))
}

/// Contents of `<out>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub kind: String,
    pub config_sha256: String,
    pub seed: u64,
    pub seed_overridden: bool,
    pub version: String,
    pub wall_time_s: f64,
    pub threads: usize,
    /// Independent RNG shards; one per cell.
    pub shards: usize,
    pub cells: usize,
    pub failed_cells: usize,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_meta(meta: &RunMeta, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).expect("metadata serialises");
    std::fs::write(path, text + "\n")?;
    Ok(())
}
