//! Alternating solver and surrogate phases. Each solver window is followed
//! by a retrain on that window and a surrogate phase that lasts while the
//! scaled continuity residual stays within tolerance.

mod audit;
mod trace;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetOptions, DomainPartition};
use crate::error::{Error, Result};
use crate::neural::{NetworkSpec, TrainConfig};
use crate::rollout::{predict_step, scaled_residual, SurrogateBundle};
use crate::solver::{continuity_residual, Snapshot, Solver};

pub use audit::{audit_to_csv, hybrid_error_audit, AuditRow, AUDIT_HEADER};
pub use trace::{
    replay_trace, residuals_to_csv, validate_trace, FallbackEvent, MacnetTrace, Phase, PhaseEnd, PhaseMode,
    RetrainEvent, RESIDUALS_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainPolicy {
    FromScratch,
    /// Continue from the previous bundle's parameters on the new window.
    #[default]
    WarmStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacnetConfig {
    pub cfd_window: usize,
    /// Scaled-residual threshold; `f64::INFINITY` disables the gate.
    pub tolerance: f64,
    pub max_ml_steps: usize,
    pub retrain: RetrainPolicy,
    pub horizon: usize,
    pub train: TrainConfig,
}

impl MacnetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cfd_window < 1 || self.max_ml_steps < 1 {
            return Err(Error::Config("cfd_window and max_ml_steps must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.horizon < self.cfd_window {
            return Err(Error::Config(format!("horizon {} is shorter than the cfd window {}", self.horizon, self.cfd_window)));
        }
        self.train.validate()
    }
}

/// Fixed problem pieces shared by every phase.
pub struct MacnetProblem<'a> {
    pub solver: &'a Solver,
    pub partition: DomainPartition,
    pub spec: NetworkSpec,
    pub dataset: DatasetOptions,
}

/// Wall-clock accounting; kept out of the trace so traces stay reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MacnetTiming {
    pub cfd_seconds: f64,
    pub ml_seconds: f64,
    pub train_seconds: f64,
}

impl MacnetTiming {
    pub fn total_seconds(&self) -> f64 {
        self.cfd_seconds + self.ml_seconds + self.train_seconds
    }
}

#[derive(Debug)]
pub struct MacnetRun {
    /// `states[k]` is the hybrid state after `k` steps.
    pub states: Vec<Snapshot>,
    pub trace: MacnetTrace,
    pub timing: MacnetTiming,
}

/// A run that stopped early, with the trace up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("hybrid run aborted after {} phases: {error}", trace.phases.len())]
pub struct MacnetFailure {
    pub trace: MacnetTrace,
    pub error: Error,
}

/// Runs the alternating loop from `initial` for `config.horizon` steps.
///
/// A surrogate step whose scaled residual exceeds the tolerance is
/// discarded and the solver resumes from the last accepted state. When
/// that happens on the first step of a phase the phase is dropped and a
/// fallback event is logged instead.
pub fn run(initial: &Snapshot, config: &MacnetConfig, problem: &MacnetProblem<'_>) -> Result<MacnetRun, MacnetFailure> {
    let mut trace = MacnetTrace::new(config);
    match run_into(initial, config, problem, &mut trace) {
        Ok((states, timing)) => {
            trace.finish();
            Ok(MacnetRun { states, trace, timing })
        }
        Err(error) => {
            trace.finish();
            Err(MacnetFailure { trace, error })
        }
    }
}

fn run_into(
    initial: &Snapshot,
    config: &MacnetConfig,
    problem: &MacnetProblem<'_>,
    trace: &mut MacnetTrace,
) -> Result<(Vec<Snapshot>, MacnetTiming)> {
    config.validate()?;
    let solver = problem.solver;
    solver.check_stability(initial)?;
    let (grid, params) = (solver.grid(), solver.params());
    let h = config.horizon;
    let mut states = vec![initial.clone()];
    let mut timing = MacnetTiming::default();
    let mut bundle: Option<SurrogateBundle> = None;

    while states.len() - 1 < h {
        let start = states.len() - 1;
        let end = start + config.cfd_window.min(h - start);
        let clock = Instant::now();
        for k in start + 1..=end {
            let next = solver.step(&states[k - 1]).map_err(|e| e.at_step(k))?;
            states.push(next);
        }
        timing.cfd_seconds += clock.elapsed().as_secs_f64();
        let reason = if end == h { PhaseEnd::Horizon } else { PhaseEnd::Window };
        trace.phases.push(Phase::cfd(start, end, reason));
        if end == h {
            break;
        }

        let clock = Instant::now();
        let warm = match config.retrain {
            RetrainPolicy::WarmStart => bundle.as_ref(),
            RetrainPolicy::FromScratch => None,
        };
        let (fresh, reports) = SurrogateBundle::train(
            &states[start..=end],
            &problem.partition,
            &problem.dataset,
            grid.dt,
            &problem.spec,
            &config.train,
            warm,
        )
        .map_err(|e| e.at_step(end))?;
        timing.train_seconds += clock.elapsed().as_secs_f64();
        let denominator = continuity_residual(&states[end], &states[end - 1], grid, params)?;
        trace.retrains.push(RetrainEvent {
            step: end,
            denominator,
            validation_loss: reports.iter().map(|r| r.best_validation_loss).collect(),
            epochs: reports.iter().map(|r| r.stopped_epoch).collect(),
        });
        log::debug!("retrained after step {end}; residual denominator {denominator:e}");

        let clock = Instant::now();
        let mut residuals = Vec::new();
        let reason = loop {
            let k = states.len() - 1;
            if k == h {
                break PhaseEnd::Horizon;
            }
            if residuals.len() == config.max_ml_steps {
                break PhaseEnd::MaxSteps;
            }
            let prev = &states[k];
            let next = match predict_step(&fresh, prev, &problem.partition, solver) {
                Ok(next) => next,
                // A non-finite prediction always breaches, whatever the tolerance.
                Err(Error::Rollout { .. }) => break PhaseEnd::Breach(f64::INFINITY),
                Err(e) => return Err(e.at_step(k + 1)),
            };
            let r = scaled_residual(&next, prev, grid, params, denominator)?;
            if !(r <= config.tolerance) {
                break PhaseEnd::Breach(if r.is_nan() { f64::INFINITY } else { r });
            }
            states.push(next);
            residuals.push(r);
        };
        timing.ml_seconds += clock.elapsed().as_secs_f64();
        match (residuals.is_empty(), reason) {
            (true, PhaseEnd::Breach(residual)) => {
                log::info!("first surrogate step after {end} breached ({residual:e}); falling back to the solver");
                trace.fallbacks.push(FallbackEvent { step: end, residual });
            }
            _ => trace.phases.push(Phase::ml(end, residuals, reason)),
        }
        bundle = Some(fresh);
    }
    Ok((states, timing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentConfig;

    /// Small, quickly trained version of the desk problem.
    fn quick() -> (ExperimentConfig, Snapshot) {
        let mut cfg = ExperimentConfig::desk();
        cfg.network.case = "custom".into();
        cfg.network.hidden = vec![8];
        cfg.macnet.train.max_epochs = 3;
        cfg.macnet.horizon = 12;
        cfg.macnet.max_ml_steps = 4;
        cfg.series.spinup_steps = 5;
        let solver = cfg.solver().unwrap();
        let mut s = cfg.initial_state();
        for _ in 0..cfg.series.spinup_steps {
            s = solver.step(&s).unwrap();
        }
        (cfg, s)
    }

    fn run_with(cfg: &ExperimentConfig, start: &Snapshot) -> MacnetRun {
        let solver = cfg.solver().unwrap();
        let problem = cfg.macnet_problem(&solver).unwrap();
        run(start, &cfg.macnet_config(), &problem).unwrap()
    }

    #[test]
    fn infinite_tolerance_is_one_window_then_surrogate() {
        let (mut cfg, start) = quick();
        cfg.macnet.tolerance = f64::INFINITY;
        cfg.macnet.max_ml_steps = cfg.macnet.horizon;
        let out = run_with(&cfg, &start);
        let t = &out.trace;
        assert_eq!(t.phases.len(), 2);
        assert_eq!((t.phases[0].mode, t.phases[0].start, t.phases[0].end), (PhaseMode::Cfd, 0, 2));
        assert_eq!((t.phases[1].mode, t.phases[1].end, t.phases[1].end_reason), (PhaseMode::Ml, 12, PhaseEnd::Horizon));
        assert_eq!(t.retrains.len(), 1);
        assert_eq!(out.states.len(), 13);
        validate_trace(t).unwrap();
    }

    #[test]
    fn vanishing_tolerance_never_accepts_a_surrogate_step() {
        let (mut cfg, start) = quick();
        cfg.macnet.tolerance = 1e-300;
        let out = run_with(&cfg, &start);
        let t = &out.trace;
        assert!(t.phases.iter().all(|p| p.mode == PhaseMode::Cfd));
        assert_eq!(t.ml_fraction, 0.0);
        assert_eq!(t.fallbacks.len(), 5);
        validate_trace(t).unwrap();
        // Pure solver trajectory.
        let solver = cfg.solver().unwrap();
        assert_eq!(out.states, solver.simulate(&start, 12).unwrap());
    }

    #[test]
    fn max_steps_bounds_every_phase_and_replay_agrees() {
        let (cfg, start) = quick();
        let out = run_with(&cfg, &start);
        validate_trace(&out.trace).unwrap();
        let solver = cfg.solver().unwrap();
        replay_trace(&out.trace, &out.states, &solver).unwrap();
        assert!(out.trace.phases.iter().all(|p| p.len() <= 4));
    }

    #[test]
    fn runs_are_deterministic() {
        let (cfg, start) = quick();
        let a = run_with(&cfg, &start);
        let b = run_with(&cfg, &start);
        assert_eq!(a.states, b.states);
        assert_eq!(a.trace.to_toml(), b.trace.to_toml());
    }

    #[test]
    fn invalid_config_is_rejected_with_empty_trace() {
        let (cfg, start) = quick();
        let solver = cfg.solver().unwrap();
        let problem = cfg.macnet_problem(&solver).unwrap();
        let mut mc = cfg.macnet_config();
        mc.tolerance = 0.0;
        let err = run(&start, &mc, &problem).unwrap_err();
        assert!(err.trace.phases.is_empty());
        assert!(matches!(err.error, Error::Config(_)));
    }
}
