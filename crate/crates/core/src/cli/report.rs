//! Aggregation of a run directory into one summary plus plot-data files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::ablate::{AblationResult, Variant};
use super::commands::{
    read_rollout, rollout_file, write_text, SpeedupAccounting, TrainSummary, ABLATION_DIR, ABLATION_FILE, CONFIG_ECHO,
    DATA_DIR, MACNET_DIR, MODEL_DIR, REPORT_DIR, ROLLOUT_DIR, SPEEDUP_FILE, TRACE_FILE, TRAIN_REPORT_FILE,
};
use crate::dataset::DomainPartition;
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::macnet::{validate_trace, MacnetTrace};
use crate::rollout::{RolloutMode, RolloutReport};
use crate::solver::series::{read_series, MANIFEST_FILE};
use crate::solver::{Snapshot, Variable};

pub const HISTOGRAM_FILE: &str = "target_histogram.csv";
pub const ERROR_VS_STEP_FILE: &str = "error_vs_step.csv";
pub const HYPERPARAMETER_FILE: &str = "hyperparameters.csv";
pub const VARIANTS_FILE: &str = "variants.csv";
pub const SUMMARY_DOC: &str = "summary.md";
pub const HISTOGRAM_BINS: usize = 40;

/// Equal-width bins over `[edges[0], edges[last]]`; the top edge is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins symmetric about zero, wide enough for every value.
    pub fn symmetric(values: &[f64], bins: usize) -> Self {
        let reach = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let reach = if reach > 0.0 { reach } else { 1.0 };
        let width = 2.0 * reach / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| -reach + k as f64 * width).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let k = (((v + reach) / width).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn mode_bin(&self) -> usize {
        (0..self.counts.len()).max_by_key(|&k| (self.counts[k], std::cmp::Reverse(k))).unwrap_or(0)
    }

    /// Counts never rise moving away from the fullest bin.
    pub fn is_unimodal(&self) -> bool {
        let m = self.mode_bin();
        self.counts[..=m].windows(2).all(|w| w[0] <= w[1]) && self.counts[m..].windows(2).all(|w| w[0] >= w[1])
    }

    /// Largest count beyond the first rise on either side of the fullest
    /// bin, relative to that bin. Zero for a unimodal histogram.
    pub fn secondary_peak_ratio(&self) -> f64 {
        let m = self.mode_bin();
        let peak = self.counts[m];
        if peak == 0 {
            return 0.0;
        }
        let mut worst = 0;
        for side in [self.counts[m..].to_vec(), self.counts[..=m].iter().rev().copied().collect()] {
            let mut rose = false;
            for w in side.windows(2) {
                rose |= w[1] > w[0];
                if rose {
                    worst = worst.max(w[1]);
                }
            }
        }
        worst as f64 / peak as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(out, "{:e},{:e},{c}", self.edges[k], self.edges[k + 1]).unwrap();
        }
        out
    }
}

/// One-step temperature changes of every flame cell over the first
/// `pairs` snapshot pairs: the distribution a derivative network learns.
pub fn temperature_increments(series: &[Snapshot], partition: &DomainPartition, pairs: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for w in series.windows(2).take(pairs) {
        let n = w[0].n();
        out.extend(partition.flame_cells(n).map(|(i, j)| w[1].get(i, j, Variable::T) - w[0].get(i, j, Variable::T)));
    }
    out
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            if p != root.join(REPORT_DIR) {
                collect_files(root, &p, out)?;
            }
        } else {
            out.push(p.strip_prefix(root).unwrap_or(&p).to_path_buf());
        }
    }
    Ok(())
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Writes `report/` under `run` and returns the summary path.
pub fn cmd_report(run: &Path) -> Result<PathBuf> {
    let mut artifacts = Vec::new();
    if run.is_dir() {
        collect_files(run, run, &mut artifacts)?;
    }
    if artifacts.is_empty() {
        return Err(Error::NotFound { what: "run artifacts", path: run.to_path_buf() });
    }
    let dir = run.join(REPORT_DIR);
    let mut doc = String::from("# Run summary\n\n");
    writeln!(doc, "Run directory: `{}`\n", run.display()).unwrap();
    let mut written: Vec<String> = Vec::new();

    let config_path = run.join(CONFIG_ECHO);
    let config: Option<ExperimentConfig> = if config_path.exists() { Some(ExperimentConfig::load(&config_path)?) } else { None };
    if let Some(cfg) = &config {
        writeln!(doc, "Seed {}, grid {}x{}, dt = {:e} s, flame strips M* = {}.\n", cfg.seed, cfg.grid.m, cfg.grid.n, cfg.grid.dt, cfg.dataset.m_star).unwrap();
    }

    let manifest = run.join(DATA_DIR).join(MANIFEST_FILE);
    if let (true, Some(cfg)) = (manifest.exists(), &config) {
        let (_, series) = read_series(&manifest)?;
        let dt = temperature_increments(&series, &cfg.partition()?, cfg.series.train_pairs);
        let hist = Histogram::symmetric(&dt, HISTOGRAM_BINS);
        write_text(&dir.join(HISTOGRAM_FILE), &hist.to_csv())?;
        written.push(HISTOGRAM_FILE.into());
        let near = dt.iter().filter(|v| v.abs() <= 2.5).count();
        let m = hist.mode_bin();
        doc.push_str("## Training-target distribution\n\n");
        writeln!(
            doc,
            "{} one-step temperature changes; fullest bin [{:.3}, {:.3}] K holds {}; {:.1}% lie within 2.5 K; strictly unimodal: {}; secondary peak ratio {:.4}.\n",
            hist.total(),
            hist.edges[m],
            hist.edges[m + 1],
            hist.counts[m],
            100.0 * near as f64 / dt.len().max(1) as f64,
            hist.is_unimodal(),
            hist.secondary_peak_ratio()
        )
        .unwrap();
    }

    let train_report = run.join(MODEL_DIR).join(TRAIN_REPORT_FILE);
    if train_report.exists() {
        let t: TrainSummary = read_toml(&train_report)?;
        doc.push_str("## Training\n\n");
        writeln!(doc, "Network {} ({} parameters), {} samples.\n", t.spec, t.parameters, t.samples).unwrap();
        doc.push_str("| variable | epochs | best epoch | best validation loss |\n|---|---|---|---|\n");
        for v in &t.variables {
            writeln!(doc, "| {} | {} | {} | {:.4e} |", v.variable, v.stopped_epoch, v.best_epoch, v.best_validation_loss).unwrap();
        }
        doc.push('\n');
    }

    let ablation = run.join(ABLATION_DIR).join(ABLATION_FILE);
    if ablation.exists() {
        let text = fs::read_to_string(&ablation).map_err(|e| Error::io(&ablation, e))?;
        let a = AblationResult::from_csv(&text).map_err(|e| Error::parse(&ablation, e))?;
        let mut hyper = String::from("case,spec,parameters,max_rel_err_t,mean_rel_err_t\n");
        let mut variants = String::from("case,variant,max_rel_err_t,mean_rel_err_t\n");
        for r in &a.rows {
            if r.variant == Variant::Fvmn {
                writeln!(hyper, "{},{},{},{:e},{:e}", r.case, r.spec, r.parameters, r.max_rel_err, r.mean_rel_err).unwrap();
            }
        }
        let variant_case = config.as_ref().map(|c| c.ablation.variant_case.clone());
        for r in a.rows.iter().filter(|r| variant_case.as_ref().is_none_or(|c| *c == r.case)) {
            writeln!(variants, "{},{},{:e},{:e}", r.case, r.variant.as_str(), r.max_rel_err, r.mean_rel_err).unwrap();
        }
        write_text(&dir.join(HYPERPARAMETER_FILE), &hyper)?;
        write_text(&dir.join(VARIANTS_FILE), &variants)?;
        written.extend([HYPERPARAMETER_FILE.to_string(), VARIANTS_FILE.to_string()]);
        doc.push_str("## Ablation (one-step temperature error)\n\n```text\n");
        doc.push_str(&a.ranking_text());
        doc.push_str("```\n\n");
    }

    let reports: Vec<RolloutReport> = RolloutMode::ALL
        .iter()
        .map(|&m| run.join(ROLLOUT_DIR).join(rollout_file(m)))
        .filter(|p| p.exists())
        .map(|p| read_rollout(&p))
        .collect::<Result<_>>()?;
    if !reports.is_empty() {
        let mut evs = String::from("step,mode,max_rel_err_t,mean_rel_err_t,scaled_residual\n");
        doc.push_str("## Rollout\n\n| mode | final max T error | final mean T error | residual first → last |\n|---|---|---|---|\n");
        for r in &reports {
            for s in &r.steps {
                let e = s.errors[Variable::T.index()];
                writeln!(evs, "{},{},{:e},{:e},{:e}", s.step, r.mode.as_str(), e.max, e.mean, s.scaled_residual).unwrap();
            }
            let res = r.residuals();
            writeln!(
                doc,
                "| {} | {:.4e} | {:.4e} | {:.4} → {:.4} |",
                r.mode.as_str(),
                r.final_max_error(Variable::T),
                r.mean_error(Variable::T).last().copied().unwrap_or(0.0),
                res.first().copied().unwrap_or(0.0),
                res.last().copied().unwrap_or(0.0)
            )
            .unwrap();
        }
        doc.push('\n');
        write_text(&dir.join(ERROR_VS_STEP_FILE), &evs)?;
        written.push(ERROR_VS_STEP_FILE.into());
    }

    let trace_path = run.join(MACNET_DIR).join(TRACE_FILE);
    if trace_path.exists() {
        let t: MacnetTrace = read_toml(&trace_path)?;
        doc.push_str("## MACnet\n\n");
        writeln!(
            doc,
            "{} phases over {} steps, surrogate fraction {:.3}, {} retrains, {} fallbacks; trace validator: {}.",
            t.phases.len(),
            t.horizon,
            t.ml_fraction,
            t.retrains.len(),
            t.fallbacks.len(),
            match validate_trace(&t) {
                Ok(()) => "pass".to_string(),
                Err(v) => format!("FAIL ({})", v.join("; ")),
            }
        )
        .unwrap();
        let speedup = run.join(MACNET_DIR).join(SPEEDUP_FILE);
        if speedup.exists() {
            let s: SpeedupAccounting = read_toml(&speedup)?;
            writeln!(doc, "Speedup over the pure solver, training included: {:.4}.", s.speedup).unwrap();
        }
        doc.push('\n');
    }

    doc.push_str("## Artifacts\n\n");
    for a in &artifacts {
        writeln!(doc, "- `{}`", a.display()).unwrap();
    }
    for w in &written {
        writeln!(doc, "- `{REPORT_DIR}/{w}`").unwrap();
    }
    let path = dir.join(SUMMARY_DOC);
    write_text(&path, &doc)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_every_value() {
        let values: Vec<f64> = (0..1000).map(|k| ((k as f64) * 0.37).sin() * 3.0).chain([3.0, -3.0]).collect();
        let h = Histogram::symmetric(&values, 12);
        assert_eq!(h.total(), values.len());
        assert_eq!(h.edges.len(), 13);
        assert_eq!(h.edges[0], -3.0);
        assert!((h.edges[12] - 3.0).abs() < 1e-12);
        let peaked = Histogram { edges: (0..=4).map(f64::from).collect(), counts: vec![1, 5, 3, 0] };
        assert!(peaked.is_unimodal());
        assert_eq!(peaked.mode_bin(), 1);
        assert_eq!(peaked.secondary_peak_ratio(), 0.0);
        let bumpy = Histogram { edges: vec![0.0; 6], counts: vec![3, 1, 8, 0, 2] };
        assert!(!bumpy.is_unimodal());
        assert_eq!(bumpy.secondary_peak_ratio(), 0.375);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(cmd_report(dir.path()), Err(Error::NotFound { .. })));
        assert!(cmd_report(&dir.path().join("missing")).is_err());
    }
}
