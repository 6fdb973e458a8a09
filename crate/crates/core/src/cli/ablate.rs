//! Network-size sweep and input/output variant comparison, scored by the
//! one-step temperature error on the step after the training window.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{input_into, DatasetSplit, InputMode, OutputMode, SampleTable};
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, NetworkChoice};
use crate::neural::{param_count, train, Network};
use crate::rollout::{relative_error, variable_seed, ErrorStats};
use crate::solver::{Snapshot, Variable};

/// Input/output combination under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Centre cell in, next value out.
    General,
    TierOnly,
    DerivativeOnly,
    /// Tier inputs with derivative outputs.
    Fvmn,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::General, Variant::TierOnly, Variant::DerivativeOnly, Variant::Fvmn];

    pub fn modes(self) -> (InputMode, OutputMode) {
        match self {
            Variant::General => (InputMode::CenterOnly, OutputMode::Absolute),
            Variant::TierOnly => (InputMode::Tier, OutputMode::Absolute),
            Variant::DerivativeOnly => (InputMode::CenterOnly, OutputMode::Derivative),
            Variant::Fvmn => (InputMode::Tier, OutputMode::Derivative),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::General => "general",
            Variant::TierOnly => "tier-only",
            Variant::DerivativeOnly => "derivative-only",
            Variant::Fvmn => "fvmn",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub case: String,
    pub variant: Variant,
    pub spec: String,
    pub parameters: usize,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub epochs: usize,
    pub best_validation_loss: f64,
}

/// One row per requested (case, variant).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
}

pub const ABLATION_HEADER: &str = "case,variant,spec,parameters,max_rel_err_t,mean_rel_err_t,epochs,best_validation_loss";

impl AblationResult {
    pub fn row(&self, case: &str, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.case == case && r.variant == variant)
    }

    /// Rows by increasing maximum error; ties keep table order.
    pub fn ranking(&self) -> Vec<&AblationRow> {
        let mut rows: Vec<&AblationRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err));
        rows
    }

    pub fn ranking_text(&self) -> String {
        let mut out = String::new();
        for (k, r) in self.ranking().iter().enumerate() {
            writeln!(out, "{:2}. case {} {:<15} max {:.4e} mean {:.4e} ({} parameters)", k + 1, r.case, r.variant.as_str(), r.max_rel_err, r.mean_rel_err, r.parameters).unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(ABLATION_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{:e},{:e},{},{:e}",
                r.case,
                r.variant.as_str(),
                r.spec,
                r.parameters,
                r.max_rel_err,
                r.mean_rel_err,
                r.epochs,
                r.best_validation_loss
            )
            .unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(ABLATION_HEADER) {
            return Err("unexpected ablation header".into());
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(format!("row {n}: expected 8 fields, got {}", f.len()));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|e| format!("row {n}: {s:?}: {e}"));
            let int = |s: &str| s.parse::<usize>().map_err(|e| format!("row {n}: {s:?}: {e}"));
            rows.push(AblationRow {
                case: f[0].to_string(),
                variant: f[1].parse().map_err(|e: Error| e.to_string())?,
                spec: f[2].to_string(),
                parameters: int(f[3])?,
                max_rel_err: float(f[4])?,
                mean_rel_err: float(f[5])?,
                epochs: int(f[6])?,
                best_validation_loss: float(f[7])?,
            });
        }
        Ok(AblationResult { rows })
    }
}

/// The configured case sweep (FVMN variant) followed by the four variants
/// at `ablation.variant_case`. Only the temperature network is trained.
pub fn run_ablation(cfg: &ExperimentConfig, series: &[Snapshot]) -> Result<AblationResult> {
    let mut requests: Vec<(String, Variant)> = cfg.ablation.cases.iter().map(|c| (c.clone(), Variant::Fvmn)).collect();
    for v in Variant::ALL {
        let r = (cfg.ablation.variant_case.clone(), v);
        if !requests.contains(&r) {
            requests.push(r);
        }
    }
    run_requests(cfg, series, &requests)
}

/// Scores each `(case, variant)` in order.
pub fn run_requests(cfg: &ExperimentConfig, series: &[Snapshot], requests: &[(String, Variant)]) -> Result<AblationResult> {
    let tp = cfg.series.train_pairs;
    if series.len() < tp + 2 {
        return Err(Error::Config(format!("ablation needs {} snapshots, series has {}", tp + 2, series.len())));
    }
    let partition = cfg.partition()?;
    let dt = cfg.grid.dt;
    let window = &series[..=tp];
    let mut tables: HashMap<(InputMode, OutputMode), SampleTable> = HashMap::new();
    let mut result = AblationResult::default();
    for (case, variant) in requests {
        let (input_mode, output_mode) = variant.modes();
        let opts = crate::dataset::DatasetOptions { input_mode, output_mode, ..cfg.dataset_options() };
        if !tables.contains_key(&(input_mode, output_mode)) {
            tables.insert((input_mode, output_mode), SampleTable::build(window, &partition, &opts, dt)?);
        }
        let split = DatasetSplit::from_table(&tables[&(input_mode, output_mode)], Variable::T, opts.split_fraction, opts.seed)?;
        let spec = NetworkChoice { case: case.clone(), ..cfg.network.clone() }.spec(input_mode.width())?;
        let tcfg = cfg.ablation.train.with_seed(variable_seed(cfg.seed, Variable::T));
        let (net, report) = train(&split, &spec, &tcfg)?;
        let stats = one_step_error(&net, &split, &series[tp], &series[tp + 1], cfg)?;
        log::info!("ablation case {case} {}: max {:.4e} mean {:.4e}", variant.as_str(), stats.max, stats.mean);
        result.rows.push(AblationRow {
            case: case.clone(),
            variant: *variant,
            spec: spec.to_string().replace(' ', ""),
            parameters: param_count(&spec),
            max_rel_err: stats.max,
            mean_rel_err: stats.mean,
            epochs: report.stopped_epoch,
            best_validation_loss: report.best_validation_loss,
        });
    }
    Ok(result)
}

/// Temperature error of the network's flame-region prediction from `start`.
fn one_step_error(net: &Network, split: &DatasetSplit, start: &Snapshot, next: &Snapshot, cfg: &ExperimentConfig) -> Result<ErrorStats> {
    let partition = cfg.partition()?;
    let n = start.n();
    let width = split.input_mode.width();
    let mut x = Array2::zeros((partition.flame_cell_count(n), width));
    for (k, (i, j)) in partition.flame_cells(n).enumerate() {
        let mut row = x.row_mut(k);
        let slice = row.as_slice_mut().expect("standard layout");
        input_into(start, i, j, &partition, split.input_mode, cfg.dataset.wall_policy, slice)?;
        split.input_scaler.apply_in_place(slice);
    }
    let z = net.predict_batch(x.view())?;
    let mut pred = next.clone();
    for ((i, j), zk) in partition.flame_cells(n).zip(z.iter()) {
        let y = split.target_scaler.invert_scalar(*zk);
        let value = match split.output_mode {
            OutputMode::Derivative => start.get(i, j, Variable::T) + cfg.grid.dt * y,
            OutputMode::Absolute => y,
        };
        if !value.is_finite() {
            return Err(Error::Rollout { i, j, variable: Variable::T.name() });
        }
        pred.set(i, j, Variable::T, value);
    }
    relative_error(&pred, next, Variable::T, &partition)
}
