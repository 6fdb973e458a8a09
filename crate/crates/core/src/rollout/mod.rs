//! Surrogate rollouts over the flame region with the solver advancing the
//! inlet and outlet strips, plus the error and residual metrics used to
//! judge them.

mod bundle;
mod metrics;
mod report;

use std::time::Instant;

use crate::dataset::DomainPartition;
use crate::error::{Error, Result};
use crate::solver::{continuity_residual, PhysicalParams, GridSpec, Snapshot, Solver, Variable, NUM_VARS};

pub use bundle::{checkpoint_name, variable_seed, SurrogateBundle, SCALERS_FILE};
pub use metrics::{error_field, fit_growth, relative_error, ErrorStats, GrowthFit, DENOMINATOR_FLOOR};
pub use report::{RolloutReport, RolloutSummary, REPORT_HEADER};

/// Anything that can advance the flame region by one step.
pub trait FlameModel {
    /// Writes next-step values of every flame cell of `state` into `out`.
    /// Cells outside the flame region must be left alone.
    fn advance_flame(&self, state: &Snapshot, partition: &DomainPartition, dt: f64, out: &mut Snapshot) -> Result<()>;
}

/// Exact solver derivatives on the flame region.
pub struct SolverOracle<'a> {
    pub solver: &'a Solver,
}

impl FlameModel for SolverOracle<'_> {
    fn advance_flame(&self, state: &Snapshot, partition: &DomainPartition, dt: f64, out: &mut Snapshot) -> Result<()> {
        let next = self.solver.step(state)?;
        for (i, j) in partition.flame_cells(state.n()) {
            for var in Variable::ALL {
                let d = (next.get(i, j, var) - state.get(i, j, var)) / dt;
                out.set(i, j, var, state.get(i, j, var) + dt * d);
            }
        }
        Ok(())
    }
}

/// One hybrid step: the solver on the inlet and outlet strips (fluxes read
/// the current flame values), `model` on the flame region.
pub fn predict_step(model: &dyn FlameModel, state: &Snapshot, partition: &DomainPartition, solver: &Solver) -> Result<Snapshot> {
    if partition.m() != state.m() {
        return Err(Error::Shape(format!("partition for {} rows, state has {}", partition.m(), state.m())));
    }
    let mut next = solver.step_rows(state, |i| !partition.is_flame(i))?;
    model.advance_flame(state, partition, solver.grid().dt, &mut next)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RolloutMode {
    Multi,
    Single,
    ConstantGradient,
}

impl RolloutMode {
    pub const ALL: [RolloutMode; 3] = [RolloutMode::Multi, RolloutMode::Single, RolloutMode::ConstantGradient];

    pub fn as_str(self) -> &'static str {
        match self {
            RolloutMode::Multi => "multi",
            RolloutMode::Single => "single",
            RolloutMode::ConstantGradient => "constant-gradient",
        }
    }
}

impl std::str::FromStr for RolloutMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multi" => Ok(RolloutMode::Multi),
            "single" => Ok(RolloutMode::Single),
            "constant-gradient" | "constant" => Ok(RolloutMode::ConstantGradient),
            other => Err(Error::Config(format!("unknown rollout mode {other:?}"))),
        }
    }
}

/// Metrics of one predicted step against its truth.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Indexed by [`Variable::index`].
    pub errors: [ErrorStats; NUM_VARS],
    pub scaled_residual: f64,
    pub ml_ms: Option<f64>,
    pub cfd_ms: Option<f64>,
}

/// Shared inputs of every evaluation mode.
pub struct RolloutContext<'a> {
    pub solver: &'a Solver,
    pub partition: DomainPartition,
    /// `truth[0]` is the start state; `truth[k]` the true state after `k` steps.
    pub truth: &'a [Snapshot],
    /// Residual of the last training pair.
    pub denominator: f64,
    pub record_timing: bool,
}

impl RolloutContext<'_> {
    fn check(&self, horizon: usize) -> Result<()> {
        if horizon == 0 {
            return Err(Error::Config("rollout horizon must be at least 1".into()));
        }
        if self.truth.len() < horizon + 1 {
            return Err(Error::Config(format!(
                "truth covers {} steps, horizon is {horizon}",
                self.truth.len().saturating_sub(1)
            )));
        }
        if !(self.denominator > 0.0) {
            return Err(Error::Config(format!("residual denominator must be positive, got {}", self.denominator)));
        }
        Ok(())
    }

    fn grid(&self) -> &GridSpec {
        self.solver.grid()
    }

    fn params(&self) -> &PhysicalParams {
        self.solver.params()
    }

    fn record(&self, step: usize, pred: &Snapshot, prev: &Snapshot, ml_ms: Option<f64>, cfd_ms: Option<f64>) -> Result<StepRecord> {
        let truth = &self.truth[step];
        let mut errors = [ErrorStats::default(); NUM_VARS];
        for var in Variable::ALL {
            errors[var.index()] = relative_error(pred, truth, var, &self.partition)?;
        }
        let scaled_residual = scaled_residual(pred, prev, self.grid(), self.params(), self.denominator)?;
        Ok(StepRecord { step, errors, scaled_residual, ml_ms, cfd_ms })
    }

    /// Wall time of a full solver step from `state`, when timing is on.
    fn time_solver(&self, state: &Snapshot) -> Result<Option<f64>> {
        if !self.record_timing {
            return Ok(None);
        }
        let t0 = Instant::now();
        let _ = self.solver.step(state)?;
        Ok(Some(t0.elapsed().as_secs_f64() * 1e3))
    }
}

fn timed<T>(on: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, Option<f64>)> {
    let t0 = Instant::now();
    let out = f()?;
    Ok((out, on.then(|| t0.elapsed().as_secs_f64() * 1e3)))
}

/// `continuity_residual(state, prev) / denominator`.
pub fn scaled_residual(state: &Snapshot, prev: &Snapshot, grid: &GridSpec, params: &PhysicalParams, denominator: f64) -> Result<f64> {
    if !(denominator > 0.0 && denominator.is_finite()) {
        return Err(Error::Config(format!("residual denominator must be positive, got {denominator}")));
    }
    Ok(continuity_residual(state, prev, grid, params)? / denominator)
}

/// Receives each predicted state with its step number.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &Snapshot);

/// Autoregressive rollout: every step consumes the previous prediction.
pub fn multi_step(model: &dyn FlameModel, ctx: &RolloutContext<'_>, horizon: usize) -> Result<RolloutReport> {
    multi_step_observed(model, ctx, horizon, &mut |_, _| {})
}

pub fn multi_step_observed(model: &dyn FlameModel, ctx: &RolloutContext<'_>, horizon: usize, observe: Observer<'_>) -> Result<RolloutReport> {
    ctx.check(horizon)?;
    let mut steps = Vec::with_capacity(horizon);
    let mut state = ctx.truth[0].clone();
    for k in 1..=horizon {
        let mut step = || -> Result<StepRecord> {
            let cfd_ms = ctx.time_solver(&state)?;
            let (next, ml_ms) = timed(ctx.record_timing, || predict_step(model, &state, &ctx.partition, ctx.solver))?;
            let rec = ctx.record(k, &next, &state, ml_ms, cfd_ms)?;
            observe(k, &next);
            state = next;
            Ok(rec)
        };
        steps.push(step().map_err(|e| e.at_step(k))?);
    }
    Ok(RolloutReport { mode: RolloutMode::Multi, steps })
}

/// Teacher-forced rollout: every step starts from the true state.
pub fn single_step(model: &dyn FlameModel, ctx: &RolloutContext<'_>, horizon: usize) -> Result<RolloutReport> {
    single_step_observed(model, ctx, horizon, &mut |_, _| {})
}

pub fn single_step_observed(model: &dyn FlameModel, ctx: &RolloutContext<'_>, horizon: usize, observe: Observer<'_>) -> Result<RolloutReport> {
    ctx.check(horizon)?;
    let mut steps = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let prev = &ctx.truth[k - 1];
        let mut step = || -> Result<StepRecord> {
            let cfd_ms = ctx.time_solver(prev)?;
            let (next, ml_ms) = timed(ctx.record_timing, || predict_step(model, prev, &ctx.partition, ctx.solver))?;
            let rec = ctx.record(k, &next, prev, ml_ms, cfd_ms)?;
            observe(k, &next);
            Ok(rec)
        };
        steps.push(step().map_err(|e| e.at_step(k))?);
    }
    Ok(RolloutReport { mode: RolloutMode::Single, steps })
}

/// Per-cell gradient `(next - prev) / dt` of a snapshot pair, all cells.
pub fn frozen_gradient(prev: &Snapshot, next: &Snapshot, dt: f64) -> Result<Vec<f64>> {
    if !prev.same_shape(next) {
        return Err(Error::Shape("gradient between differently shaped snapshots".into()));
    }
    Ok(prev.values().iter().zip(next.values()).map(|(a, b)| (b - a) / dt).collect())
}

/// Baseline `x^{t+k} = x^t + k dt g` on the flame region with the gradient
/// `g` frozen from the last training pair; the strips are solved as in
/// [`predict_step`].
pub fn constant_gradient(gradient: &[f64], ctx: &RolloutContext<'_>, horizon: usize) -> Result<RolloutReport> {
    constant_gradient_observed(gradient, ctx, horizon, &mut |_, _| {})
}

pub fn constant_gradient_observed(gradient: &[f64], ctx: &RolloutContext<'_>, horizon: usize, observe: Observer<'_>) -> Result<RolloutReport> {
    ctx.check(horizon)?;
    let base = &ctx.truth[0];
    if gradient.len() != base.values().len() {
        return Err(Error::Shape(format!("gradient of length {} for {} values", gradient.len(), base.values().len())));
    }
    let dt = ctx.grid().dt;
    let n = base.n();
    let mut steps = Vec::with_capacity(horizon);
    let mut state = base.clone();
    for k in 1..=horizon {
        let mut step = || -> Result<StepRecord> {
            let cfd_ms = ctx.time_solver(&state)?;
            let (next, ml_ms) = timed(ctx.record_timing, || {
                let mut next = ctx.solver.step_rows(&state, |i| !ctx.partition.is_flame(i))?;
                for (i, j) in ctx.partition.flame_cells(n) {
                    for var in Variable::ALL {
                        let idx = (i * n + j) * NUM_VARS + var.index();
                        next.set(i, j, var, base.values()[idx] + k as f64 * dt * gradient[idx]);
                    }
                }
                Ok(next)
            })?;
            let rec = ctx.record(k, &next, &state, ml_ms, cfd_ms)?;
            observe(k, &next);
            state = next;
            Ok(rec)
        };
        steps.push(step().map_err(|e| e.at_step(k))?);
    }
    Ok(RolloutReport { mode: RolloutMode::ConstantGradient, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentConfig;
    use crate::neural::{Activation, NetworkSpec};

    fn small() -> (ExperimentConfig, Solver, Vec<Snapshot>) {
        let mut cfg = ExperimentConfig::desk();
        cfg.grid.m = 40;
        cfg.grid.n = 10;
        cfg.dataset.m_star = 6;
        cfg.initial.kernel_center = 18.0;
        cfg.initial.kernel_radius = 5.0;
        cfg.series.spinup_steps = 5;
        let solver = cfg.solver().unwrap();
        let series = cfg.generate_series().unwrap();
        (cfg, solver, series)
    }

    #[test]
    fn zero_bundle_freezes_flame_region() {
        let (cfg, solver, series) = small();
        let p = cfg.partition().unwrap();
        let bundle = SurrogateBundle::zeros(&NetworkSpec::new(30, &[4], Activation::Relu), crate::dataset::InputMode::Tier).unwrap();
        let next = predict_step(&bundle, &series[0], &p, &solver).unwrap();
        let cfd = solver.step(&series[0]).unwrap();
        for i in 0..cfg.grid.m {
            for j in 0..cfg.grid.n {
                let want = if p.is_flame(i) { series[0].cell(i, j) } else { cfd.cell(i, j) };
                assert_eq!(next.cell(i, j), want, "cell ({i}, {j})");
            }
        }
        assert_eq!(next.time, cfd.time);
    }

    #[test]
    fn oracle_matches_solver_step() {
        let (cfg, solver, series) = small();
        let p = cfg.partition().unwrap();
        let oracle = SolverOracle { solver: &solver };
        let next = predict_step(&oracle, &series[0], &p, &solver).unwrap();
        let cfd = solver.step(&series[0]).unwrap();
        for (a, b) in next.values().iter().zip(cfd.values()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn oracle_rollout_and_mode_agreement() {
        let (cfg, solver, series) = small();
        let denominator = continuity_residual(&series[1], &series[0], &cfg.grid, &cfg.physics).unwrap();
        let ctx = RolloutContext { solver: &solver, partition: cfg.partition().unwrap(), truth: &series[1..], denominator, record_timing: false };
        let oracle = SolverOracle { solver: &solver };
        let multi = multi_step(&oracle, &ctx, 10).unwrap();
        let single = single_step(&oracle, &ctx, 10).unwrap();
        assert_eq!(multi.steps.len(), 10);
        assert_eq!(multi.steps[0], single.steps[0]);
        assert!(multi.max_error(Variable::T).iter().all(|e| *e < 1e-8));
        assert!(single.max_error(Variable::T).iter().all(|e| *e < 1e-8));
    }

    #[test]
    fn constant_gradient_is_exact_for_linear_truth() {
        let (cfg, _, series) = small();
        let mut physics = cfg.physics;
        physics.diffusivity = [0.0; 4];
        physics.arrhenius.pre_exponential = 0.0;
        let mut flow = cfg.flow;
        flow.u_max = 0.0;
        let solver = Solver::new(cfg.grid, physics).unwrap();
        let p = cfg.partition().unwrap();
        // Quiescent, inert truth with a prescribed linear temperature ramp.
        let g_cell = |i: usize, j: usize| 50.0 * (i as f64 + j as f64);
        let base = crate::experiment::initial_state(&cfg.grid, &physics, &flow, &cfg.initial);
        let truth: Vec<Snapshot> = (0..=4)
            .map(|k| {
                let mut s = base.clone();
                s.time = k as f64 * cfg.grid.dt;
                for (i, j) in p.flame_cells(cfg.grid.n) {
                    s.set(i, j, Variable::T, base.get(i, j, Variable::T) + k as f64 * cfg.grid.dt * g_cell(i, j));
                }
                s
            })
            .collect();
        let gradient = frozen_gradient(&truth[0], &truth[1], cfg.grid.dt).unwrap();
        let ctx = RolloutContext { solver: &solver, partition: p, truth: &truth, denominator: 1.0, record_timing: false };
        let rep = constant_gradient(&gradient, &ctx, 4).unwrap();
        for e in rep.max_error(Variable::T) {
            assert!(e < 1e-14, "{e}");
        }
        let _ = series;
    }

    #[test]
    fn rejects_short_truth_and_bad_denominator() {
        let (cfg, solver, series) = small();
        let oracle = SolverOracle { solver: &solver };
        let ctx = RolloutContext { solver: &solver, partition: cfg.partition().unwrap(), truth: &series[..3], denominator: 1.0, record_timing: false };
        assert!(multi_step(&oracle, &ctx, 3).is_err());
        let ctx = RolloutContext { denominator: 0.0, truth: &series, ..ctx };
        assert!(matches!(single_step(&oracle, &ctx, 1), Err(Error::Config(_))));
        assert!(scaled_residual(&series[1], &series[0], &cfg.grid, &cfg.physics, -1.0).is_err());
    }

    #[test]
    fn scaled_residual_of_denominator_pair_is_one() {
        let (cfg, _, series) = small();
        let d = continuity_residual(&series[1], &series[0], &cfg.grid, &cfg.physics).unwrap();
        assert_eq!(scaled_residual(&series[1], &series[0], &cfg.grid, &cfg.physics, d).unwrap(), 1.0);
    }
}
