//! On-disk snapshot series: a TOML manifest plus one CSV file per snapshot.
//!
//! Snapshot files carry the header `i,j,v_x,v_r,T,X_fuel,X_prod,X_ox` and one
//! row per cell with `i` outermost. Floats are written in Rust's shortest
//! round-trip form, so reading a file back reproduces every bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GridSpec, PhysicalParams, Snapshot, Variable, NUM_VARS};
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "fvmn-series/1";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesManifest {
    pub format: String,
    pub grid: GridSpec,
    pub variables: Vec<String>,
    pub params: PhysicalParams,
    pub snapshots: Vec<SnapshotEntry>,
}

impl SeriesManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

pub fn csv_header() -> String {
    let mut h = String::from("i,j");
    for v in Variable::ALL {
        h.push(',');
        h.push_str(v.name());
    }
    h
}

pub fn snapshot_to_csv(s: &Snapshot) -> String {
    let mut out = csv_header();
    out.push('\n');
    for i in 0..s.m() {
        for j in 0..s.n() {
            write!(out, "{i},{j}").unwrap();
            for v in s.cell(i, j) {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn snapshot_from_csv(text: &str, m: usize, n: usize, time: f64) -> std::result::Result<Snapshot, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == csv_header() => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut s = Snapshot::zeros(m, n, time);
    let mut seen = 0usize;
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + NUM_VARS {
            return Err(format!("row {row}: expected {} fields, got {}", 2 + NUM_VARS, fields.len()));
        }
        let i: usize = fields[0].parse().map_err(|e| format!("row {row}: {e}"))?;
        let j: usize = fields[1].parse().map_err(|e| format!("row {row}: {e}"))?;
        if i >= m || j >= n {
            return Err(format!("row {row}: cell ({i}, {j}) outside {m}x{n} grid"));
        }
        let cell = s.cell_mut(i, j);
        for (k, f) in fields[2..].iter().enumerate() {
            cell[k] = f.parse().map_err(|e| format!("row {row}: {e}"))?;
        }
        seen += 1;
    }
    if seen != m * n {
        return Err(format!("expected {} rows, got {seen}", m * n));
    }
    Ok(s)
}

/// Writes `series` into `dir`, returning the manifest path.
pub fn write_series(dir: &Path, grid: &GridSpec, params: &PhysicalParams, series: &[Snapshot]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(series.len());
    for (k, s) in series.iter().enumerate() {
        s.check_grid(grid)?;
        let file = format!("snapshot_{k:05}.csv");
        let path = dir.join(&file);
        fs::write(&path, snapshot_to_csv(s)).map_err(|e| Error::io(&path, e))?;
        entries.push(SnapshotEntry { file, time: s.time });
    }
    let manifest = SeriesManifest {
        format: MANIFEST_FORMAT.to_string(),
        grid: *grid,
        variables: Variable::ALL.iter().map(|v| v.name().to_string()).collect(),
        params: *params,
        snapshots: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<SeriesManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = SeriesManifest::from_toml(&text).map_err(|e| Error::parse(path, e))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::parse(path, format!("unsupported format {:?}", manifest.format)));
    }
    let expected: Vec<&str> = Variable::ALL.iter().map(|v| v.name()).collect();
    if manifest.variables != expected {
        return Err(Error::parse(path, format!("unexpected variables {:?}", manifest.variables)));
    }
    Ok(manifest)
}

/// Reads a manifest and every snapshot it lists.
pub fn read_series(path: &Path) -> Result<(SeriesManifest, Vec<Snapshot>)> {
    let manifest = read_manifest(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let g = manifest.grid;
    let mut series = Vec::with_capacity(manifest.snapshots.len());
    for entry in &manifest.snapshots {
        let p = dir.join(&entry.file);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let s = snapshot_from_csv(&text, g.m, g.n, entry.time).map_err(|e| Error::parse(&p, e))?;
        series.push(s);
    }
    Ok((manifest, series))
}
