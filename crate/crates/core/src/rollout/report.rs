use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{fit_growth, ErrorStats, GrowthFit, RolloutMode, StepRecord};
use crate::error::{Error, Result};
use crate::solver::{Variable, NUM_VARS};

pub const REPORT_HEADER: &str = "step,mode,variable,max_rel_err,mean_rel_err,scaled_residual,ml_ms,cfd_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutReport {
    pub mode: RolloutMode,
    pub steps: Vec<StepRecord>,
}

impl RolloutReport {
    pub fn max_error(&self, var: Variable) -> Vec<f64> {
        self.steps.iter().map(|s| s.errors[var.index()].max).collect()
    }

    pub fn mean_error(&self, var: Variable) -> Vec<f64> {
        self.steps.iter().map(|s| s.errors[var.index()].mean).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.scaled_residual).collect()
    }

    pub fn final_max_error(&self, var: Variable) -> f64 {
        self.steps.last().map_or(0.0, |s| s.errors[var.index()].max)
    }

    /// One row per step and variable; timing columns stay empty unless
    /// they were recorded.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for s in &self.steps {
            for var in Variable::ALL {
                let e = s.errors[var.index()];
                writeln!(
                    out,
                    "{},{},{},{:e},{:e},{:e},{},{}",
                    s.step,
                    self.mode.as_str(),
                    var.name(),
                    e.max,
                    e.mean,
                    s.scaled_residual,
                    opt(s.ml_ms),
                    opt(s.cfd_ms)
                )
                .unwrap();
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(REPORT_HEADER) {
            return Err("unexpected rollout report header".into());
        }
        let mut mode = None;
        let mut steps: Vec<StepRecord> = Vec::new();
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(format!("row {row}: expected 8 fields, got {}", f.len()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("row {row}: {s:?}: {e}"));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            let m: RolloutMode = f[1].parse().map_err(|e: Error| e.to_string())?;
            if *mode.get_or_insert(m) != m {
                return Err(format!("row {row}: mixed modes"));
            }
            let step: usize = f[0].parse().map_err(|e| format!("row {row}: {e}"))?;
            let var = Variable::parse(f[2]).ok_or_else(|| format!("row {row}: unknown variable {:?}", f[2]))?;
            if steps.last().map(|s| s.step) != Some(step) {
                steps.push(StepRecord {
                    step,
                    errors: [ErrorStats::default(); NUM_VARS],
                    scaled_residual: num(f[5])?,
                    ml_ms: opt(f[6])?,
                    cfd_ms: opt(f[7])?,
                });
            }
            let rec = steps.last_mut().unwrap();
            rec.errors[var.index()].max = num(f[3])?;
            rec.errors[var.index()].mean = num(f[4])?;
        }
        Ok(RolloutReport { mode: mode.ok_or("empty rollout report")?, steps })
    }

    /// Mean recorded ML and CFD step times, when present.
    pub fn mean_timing(&self) -> Option<(f64, f64)> {
        let ml: Vec<f64> = self.steps.iter().filter_map(|s| s.ml_ms).collect();
        let cfd: Vec<f64> = self.steps.iter().filter_map(|s| s.cfd_ms).collect();
        if ml.is_empty() || cfd.is_empty() {
            return None;
        }
        Some((ml.iter().sum::<f64>() / ml.len() as f64, cfd.iter().sum::<f64>() / cfd.len() as f64))
    }
}

/// Final-step errors and temperature growth fits across modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub horizon: usize,
    pub modes: Vec<ModeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: String,
    pub final_max_rel_err_t: f64,
    pub final_mean_rel_err_t: f64,
    pub first_scaled_residual: f64,
    pub final_scaled_residual: f64,
    pub linear_rss: f64,
    pub quadratic_rss: f64,
    pub linear_aic: f64,
    pub quadratic_aic: f64,
    pub prefers_quadratic: bool,
}

impl RolloutSummary {
    pub fn from_reports(reports: &[RolloutReport]) -> Result<Self> {
        let horizon = reports.first().map_or(0, |r| r.steps.len());
        let mut modes = Vec::new();
        for r in reports {
            let k: Vec<f64> = r.steps.iter().map(|s| s.step as f64).collect();
            let max = r.max_error(Variable::T);
            let fit: Option<GrowthFit> = if k.len() >= 4 { Some(fit_growth(&k, &max)?) } else { None };
            let res = r.residuals();
            modes.push(ModeSummary {
                mode: r.mode.as_str().to_string(),
                final_max_rel_err_t: r.final_max_error(Variable::T),
                final_mean_rel_err_t: r.mean_error(Variable::T).last().copied().unwrap_or(0.0),
                first_scaled_residual: res.first().copied().unwrap_or(0.0),
                final_scaled_residual: res.last().copied().unwrap_or(0.0),
                linear_rss: fit.map_or(f64::NAN, |f| f.linear_rss),
                quadratic_rss: fit.map_or(f64::NAN, |f| f.quadratic_rss),
                linear_aic: fit.map_or(f64::NAN, |f| f.linear_aic),
                quadratic_aic: fit.map_or(f64::NAN, |f| f.quadratic_aic),
                prefers_quadratic: fit.is_some_and(|f| f.prefers_quadratic()),
            });
        }
        Ok(RolloutSummary { horizon, modes })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }
}
