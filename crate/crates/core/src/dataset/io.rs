//! Columnar text form of a [`DatasetSplit`].
//!
//! ```text
//! # fvmn-dataset/1
//! # variables = 6
//! # input_mode = tier
//! # ...
//! split,i,j,time,x0,...,x29,target
//! train,16,0,0.6,...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DatasetSplit, InputMode, OutputMode, Standardizer, TierSample};
use crate::error::{Error, Result};
use crate::solver::{Variable, NUM_VARS};

pub const DATASET_FORMAT: &str = "fvmn-dataset/1";

/// Grid facts recorded alongside the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetProvenance {
    pub m: usize,
    pub n: usize,
    pub m_star: usize,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn split_floats(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"))).collect()
}

pub fn dataset_to_text(split: &DatasetSplit, prov: &DatasetProvenance) -> String {
    let mut out = String::new();
    writeln!(out, "# {DATASET_FORMAT}").unwrap();
    writeln!(out, "# variables = {NUM_VARS}").unwrap();
    writeln!(out, "# input_mode = {}", split.input_mode.as_str()).unwrap();
    writeln!(out, "# output_mode = {}", split.output_mode.as_str()).unwrap();
    writeln!(out, "# variable = {}", split.variable.name()).unwrap();
    writeln!(out, "# grid = {}x{}", prov.m, prov.n).unwrap();
    writeln!(out, "# m_star = {}", prov.m_star).unwrap();
    writeln!(out, "# seed = {}", split.seed).unwrap();
    writeln!(out, "# split_fraction = {}", split.split_fraction).unwrap();
    writeln!(out, "# input_mean = {}", join(&split.input_scaler.mean)).unwrap();
    writeln!(out, "# input_std = {}", join(&split.input_scaler.std)).unwrap();
    writeln!(out, "# target_mean = {}", join(&split.target_scaler.mean)).unwrap();
    writeln!(out, "# target_std = {}", join(&split.target_scaler.std)).unwrap();
    let width = split.input_mode.width();
    out.push_str("split,i,j,time");
    for k in 0..width {
        write!(out, ",x{k}").unwrap();
    }
    out.push_str(",target\n");
    for (name, samples) in [("train", &split.train), ("validation", &split.validation)] {
        for s in samples {
            write!(out, "{name},{},{},{}", s.cell.0, s.cell.1, s.time).unwrap();
            for x in &s.input {
                write!(out, ",{x}").unwrap();
            }
            writeln!(out, ",{}", s.target).unwrap();
        }
    }
    out
}

pub fn dataset_from_text(text: &str) -> std::result::Result<(DatasetSplit, DatasetProvenance), String> {
    let mut header = BTreeMap::new();
    let mut lines = text.lines().peekable();
    match lines.next() {
        Some(l) if l.trim() == format!("# {DATASET_FORMAT}") => {}
        other => return Err(format!("missing format line, got {other:?}")),
    }
    while let Some(line) = lines.peek() {
        let Some(rest) = line.strip_prefix('#') else { break };
        let (k, v) = rest.split_once('=').ok_or_else(|| format!("bad header line {line:?}"))?;
        header.insert(k.trim().to_string(), v.trim().to_string());
        lines.next();
    }
    let get = |k: &str| header.get(k).cloned().ok_or_else(|| format!("missing header field {k}"));
    if get("variables")? != NUM_VARS.to_string() {
        return Err("unsupported variable count".into());
    }
    let input_mode: InputMode = get("input_mode")?.parse().map_err(|e: Error| e.to_string())?;
    let output_mode: OutputMode = get("output_mode")?.parse().map_err(|e: Error| e.to_string())?;
    let variable = Variable::parse(&get("variable")?).ok_or("unknown variable")?;
    let grid = get("grid")?;
    let (m, n) = grid.split_once('x').ok_or("bad grid")?;
    let prov = DatasetProvenance {
        m: m.parse().map_err(|_| "bad grid")?,
        n: n.parse().map_err(|_| "bad grid")?,
        m_star: get("m_star")?.parse().map_err(|_| "bad m_star")?,
    };
    let seed = get("seed")?.parse().map_err(|_| "bad seed")?;
    let split_fraction = get("split_fraction")?.parse().map_err(|_| "bad split_fraction")?;
    let input_scaler = Standardizer { mean: split_floats(&get("input_mean")?)?, std: split_floats(&get("input_std")?)? };
    let target_scaler = Standardizer { mean: split_floats(&get("target_mean")?)?, std: split_floats(&get("target_std")?)? };
    let width = input_mode.width();
    lines.next().ok_or("missing column header")?;
    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 + width + 1 {
            return Err(format!("row {row}: expected {} fields, got {}", 5 + width, f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("row {row}: {e}"));
        let idx = |s: &str| s.parse::<usize>().map_err(|e| format!("row {row}: {e}"));
        let sample = TierSample {
            cell: (idx(f[1])?, idx(f[2])?),
            time: num(f[3])?,
            input: f[4..4 + width].iter().map(|s| num(s)).collect::<std::result::Result<_, _>>()?,
            target: num(f[4 + width])?,
        };
        match f[0] {
            "train" => train.push(sample),
            "validation" => validation.push(sample),
            other => return Err(format!("row {row}: unknown split {other:?}")),
        }
    }
    Ok((
        DatasetSplit { variable, input_mode, output_mode, train, validation, split_fraction, seed, input_scaler, target_scaler },
        prov,
    ))
}

pub fn write_dataset(path: &Path, split: &DatasetSplit, prov: &DatasetProvenance) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, dataset_to_text(split, prov)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<(DatasetSplit, DatasetProvenance)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dataset_from_text(&text).map_err(|e| Error::parse(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, DatasetOptions, DomainPartition};
    use crate::solver::Snapshot;

    #[test]
    fn text_round_trip_preserves_scalers_bitwise() {
        let p = DomainPartition::new(8, 2).unwrap();
        let w: Vec<Snapshot> = (0..3)
            .map(|t| {
                Snapshot::from_fn(8, 3, 0.6 + t as f64 * 1e-3, |i, j| {
                    let x = (i * 3 + j + t) as f64;
                    [0.02 / (1.0 + j as f64), 0.0, 300.0 + x.powf(1.7), 0.05 / (1.0 + x), 0.0, 0.2]
                })
            })
            .collect();
        let split = build_dataset(&w, &p, Variable::Fuel, &DatasetOptions::default(), 1e-3).unwrap();
        let prov = DatasetProvenance { m: 8, n: 3, m_star: 2 };
        let text = dataset_to_text(&split, &prov);
        let (back, prov_back) = dataset_from_text(&text).unwrap();
        assert_eq!(prov_back, prov);
        assert_eq!(back.train, split.train);
        assert_eq!(back.validation, split.validation);
        for (a, b) in back.input_scaler.std.iter().zip(&split.input_scaler.std) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.target_scaler, split.target_scaler);
        assert_eq!(back.variable, Variable::Fuel);
    }
}
