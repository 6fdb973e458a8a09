use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::MacnetConfig;
use crate::error::{Error, Result};
use crate::solver::{continuity_residual, Snapshot, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    Cfd,
    Ml,
}

impl PhaseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseMode::Cfd => "cfd",
            PhaseMode::Ml => "ml",
        }
    }
}

/// Why a phase ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseEnd {
    /// A full solver window completed.
    Window,
    /// The next surrogate step had this scaled residual, above tolerance,
    /// and was discarded.
    Breach(f64),
    MaxSteps,
    Horizon,
}

/// Steps `start + 1 ..= end`, taking state `start` to state `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub mode: PhaseMode,
    pub start: usize,
    pub end: usize,
    pub end_reason: PhaseEnd,
    /// Scaled residual of each accepted surrogate step; empty for solver phases.
    pub residuals: Vec<f64>,
}

impl Phase {
    pub(super) fn cfd(start: usize, end: usize, end_reason: PhaseEnd) -> Self {
        Phase { mode: PhaseMode::Cfd, start, end, end_reason, residuals: Vec::new() }
    }

    pub(super) fn ml(start: usize, residuals: Vec<f64>, end_reason: PhaseEnd) -> Self {
        Phase { mode: PhaseMode::Ml, start, end: start + residuals.len(), end_reason, residuals }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Surrogates retrained on the solver window ending at `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrainEvent {
    pub step: usize,
    /// Continuity residual of the window's last pair.
    pub denominator: f64,
    /// Best validation loss per variable.
    pub validation_loss: Vec<f64>,
    pub epochs: Vec<usize>,
}

/// The first surrogate step after the solver window ending at `step`
/// breached the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallbackEvent {
    pub step: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacnetTrace {
    pub horizon: usize,
    pub cfd_window: usize,
    pub tolerance: f64,
    pub max_ml_steps: usize,
    /// Surrogate steps over the horizon.
    pub ml_fraction: f64,
    pub phases: Vec<Phase>,
    pub retrains: Vec<RetrainEvent>,
    pub fallbacks: Vec<FallbackEvent>,
}

impl MacnetTrace {
    pub(super) fn new(config: &MacnetConfig) -> Self {
        MacnetTrace {
            horizon: config.horizon,
            cfd_window: config.cfd_window,
            tolerance: config.tolerance,
            max_ml_steps: config.max_ml_steps,
            ml_fraction: 0.0,
            phases: Vec::new(),
            retrains: Vec::new(),
            fallbacks: Vec::new(),
        }
    }

    pub(super) fn finish(&mut self) {
        self.ml_fraction = self.ml_steps() as f64 / self.horizon.max(1) as f64;
    }

    pub fn ml_steps(&self) -> usize {
        self.phases.iter().filter(|p| p.mode == PhaseMode::Ml).map(Phase::len).sum()
    }

    /// Mode of step `k`, counted from 1.
    pub fn mode_of_step(&self, k: usize) -> Option<PhaseMode> {
        self.phases.iter().find(|p| p.start < k && k <= p.end).map(|p| p.mode)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("trace serializes")
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

pub const RESIDUALS_HEADER: &str = "step,kind,scaled_residual";

/// Accepted surrogate residuals (`ml`) and discarded breaching steps
/// (`rejected`), ordered by step.
pub fn residuals_to_csv(trace: &MacnetTrace) -> String {
    let mut rows: Vec<(usize, &str, f64)> = Vec::new();
    for p in trace.phases.iter().filter(|p| p.mode == PhaseMode::Ml) {
        rows.extend(p.residuals.iter().enumerate().map(|(k, r)| (p.start + k + 1, "ml", *r)));
        if let PhaseEnd::Breach(r) = p.end_reason {
            rows.push((p.end + 1, "rejected", r));
        }
    }
    rows.extend(trace.fallbacks.iter().map(|f| (f.step + 1, "rejected", f.residual)));
    rows.sort_by_key(|r| r.0);
    let mut out = String::from(RESIDUALS_HEADER);
    out.push('\n');
    for (step, kind, r) in rows {
        writeln!(out, "{step},{kind},{r:e}").unwrap();
    }
    out
}

/// Structural check of a trace against its own gate settings. Returns every
/// violated invariant.
pub fn validate_trace(trace: &MacnetTrace) -> std::result::Result<(), Vec<String>> {
    let mut bad = Vec::new();
    let tol = trace.tolerance;
    let breaches = |r: f64| r > tol || r == f64::INFINITY;

    // Tiling.
    let mut cursor = 0;
    for (n, p) in trace.phases.iter().enumerate() {
        if p.start != cursor {
            bad.push(format!("phase {n} starts at {} but the previous phase ended at {cursor}", p.start));
        }
        if p.end <= p.start {
            bad.push(format!("phase {n} is empty ({}..{})", p.start, p.end));
        }
        cursor = p.end;
    }
    if cursor != trace.horizon {
        bad.push(format!("phases cover 0..{cursor}, horizon is {}", trace.horizon));
    }

    for (n, p) in trace.phases.iter().enumerate() {
        let last = n + 1 == trace.phases.len();
        if p.end_reason == PhaseEnd::Horizon && p.end != trace.horizon {
            bad.push(format!("phase {n} claims the horizon but ends at {}", p.end));
        }
        match p.mode {
            PhaseMode::Cfd => {
                if !p.residuals.is_empty() {
                    bad.push(format!("solver phase {n} carries surrogate residuals"));
                }
                match p.end_reason {
                    PhaseEnd::Window if p.len() != trace.cfd_window => {
                        bad.push(format!("solver phase {n} has {} steps, window is {}", p.len(), trace.cfd_window))
                    }
                    PhaseEnd::Horizon if p.len() > trace.cfd_window => {
                        bad.push(format!("solver phase {n} is longer than the window"))
                    }
                    PhaseEnd::Window | PhaseEnd::Horizon => {}
                    other => bad.push(format!("solver phase {n} ended by {other:?}")),
                }
                // Every non-final window is followed by a retrain.
                if !last && !trace.retrains.iter().any(|r| r.step == p.end) {
                    bad.push(format!("no retrain after the solver window ending at {}", p.end));
                }
            }
            PhaseMode::Ml => {
                if n == 0 || trace.phases[n - 1].mode != PhaseMode::Cfd {
                    bad.push(format!("surrogate phase {n} does not follow a solver phase"));
                }
                if p.residuals.len() != p.len() {
                    bad.push(format!("surrogate phase {n} has {} residuals for {} steps", p.residuals.len(), p.len()));
                }
                if p.len() > trace.max_ml_steps {
                    bad.push(format!("surrogate phase {n} runs {} steps, limit {}", p.len(), trace.max_ml_steps));
                }
                if let Some(r) = p.residuals.iter().find(|r| !(**r <= tol)) {
                    bad.push(format!("surrogate phase {n} accepted residual {r} above tolerance {tol}"));
                }
                match p.end_reason {
                    PhaseEnd::Breach(r) => {
                        if !breaches(r) {
                            bad.push(format!("surrogate phase {n} ended by breach {r} within tolerance {tol}"));
                        }
                        if p.len() >= trace.max_ml_steps {
                            bad.push(format!("surrogate phase {n} breached after reaching the step limit"));
                        }
                    }
                    PhaseEnd::MaxSteps if p.len() != trace.max_ml_steps => {
                        bad.push(format!("surrogate phase {n} stopped at {} steps, limit {}", p.len(), trace.max_ml_steps))
                    }
                    PhaseEnd::MaxSteps | PhaseEnd::Horizon => {}
                    PhaseEnd::Window => bad.push(format!("surrogate phase {n} ended by a solver window")),
                }
                if !last && trace.phases[n + 1].mode != PhaseMode::Cfd {
                    bad.push(format!("surrogate phase {n} is followed by another surrogate phase"));
                }
            }
        }
        // Back-to-back solver windows need a fallback between them.
        if !last && p.mode == PhaseMode::Cfd && trace.phases[n + 1].mode == PhaseMode::Cfd && !trace.fallbacks.iter().any(|f| f.step == p.end) {
            bad.push(format!("solver phases meet at {} without a fallback", p.end));
        }
    }

    for f in &trace.fallbacks {
        if !breaches(f.residual) {
            bad.push(format!("fallback at {} with residual {} within tolerance", f.step, f.residual));
        }
        let before = trace.phases.iter().position(|p| p.end == f.step);
        match before {
            Some(k) if trace.phases[k].mode == PhaseMode::Cfd && trace.phases.get(k + 1).map(|p| p.mode) == Some(PhaseMode::Cfd) => {}
            _ => bad.push(format!("fallback at {} is not between two solver phases", f.step)),
        }
    }
    for r in &trace.retrains {
        if !trace.phases.iter().any(|p| p.mode == PhaseMode::Cfd && p.end == r.step) {
            bad.push(format!("retrain at {} does not follow a solver window", r.step));
        }
        if !(r.denominator > 0.0) {
            bad.push(format!("retrain at {} has non-positive denominator {}", r.step, r.denominator));
        }
    }

    let ml: usize = trace.phases.iter().filter(|p| p.mode == PhaseMode::Ml).map(|p| p.end - p.start).sum();
    let fraction = ml as f64 / trace.horizon.max(1) as f64;
    if trace.ml_fraction != fraction {
        bad.push(format!("ml_fraction {} but {ml} of {} steps are surrogate steps", trace.ml_fraction, trace.horizon));
    }

    if bad.is_empty() { Ok(()) } else { Err(bad) }
}

/// Replays a trace against its states: solver steps must match a fresh
/// solver step bit for bit and surrogate residuals must match a
/// recomputation with the preceding retrain's denominator.
pub fn replay_trace(trace: &MacnetTrace, states: &[Snapshot], solver: &Solver) -> Result<()> {
    if states.len() != trace.horizon + 1 {
        return Err(Error::Shape(format!("{} states for a horizon of {}", states.len(), trace.horizon)));
    }
    for p in &trace.phases {
        for k in p.start + 1..=p.end.min(trace.horizon) {
            match p.mode {
                PhaseMode::Cfd => {
                    if solver.step(&states[k - 1])? != states[k] {
                        return Err(Error::Consistency(format!("solver step {k} does not replay")));
                    }
                }
                PhaseMode::Ml => {
                    let retrain = trace
                        .retrains
                        .iter()
                        .rfind(|r| r.step <= p.start)
                        .ok_or_else(|| Error::Consistency(format!("no retrain before surrogate step {k}")))?;
                    let r = continuity_residual(&states[k], &states[k - 1], solver.grid(), solver.params())? / retrain.denominator;
                    if r != p.residuals[k - p.start - 1] {
                        return Err(Error::Consistency(format!("residual of surrogate step {k} does not replay")));
                    }
                }
            }
        }
    }
    Ok(())
}
