//! Evaluates trained surrogates over the test window in the teacher-forced,
//! autoregressive and frozen-gradient modes, next to the exact-derivative
//! oracle.
//!
//! ```text
//! cargo run --release --example rollout_modes
//! ```

use fvmn::experiment::ExperimentConfig;
use fvmn::rollout::{
    constant_gradient, fit_growth, frozen_gradient, multi_step, single_step, RolloutContext, SolverOracle, SurrogateBundle,
};
use fvmn::solver::{continuity_residual, Variable};

fn main() -> fvmn::Result<()> {
    let cfg = ExperimentConfig::desk();
    let solver = cfg.solver()?;
    let series = cfg.generate_series()?;
    let partition = cfg.partition()?;
    let tp = cfg.series.train_pairs;

    let spec = cfg.network.spec(cfg.dataset.input_mode.width())?;
    let (bundle, _) =
        SurrogateBundle::train(&series[..=tp], &partition, &cfg.dataset_options(), cfg.grid.dt, &spec, &cfg.train_config(), None)?;

    let ctx = RolloutContext {
        solver: &solver,
        partition,
        truth: &series[tp..],
        denominator: continuity_residual(&series[tp], &series[tp - 1], &cfg.grid, &cfg.physics)?,
        record_timing: true,
    };
    let h = cfg.rollout.horizon;
    let multi = multi_step(&bundle, &ctx, h)?;
    let single = single_step(&bundle, &ctx, h)?;
    let frozen = constant_gradient(&frozen_gradient(&series[tp - 1], &series[tp], cfg.grid.dt)?, &ctx, h)?;
    let oracle = multi_step(&SolverOracle { solver: &solver }, &ctx, h)?;

    println!("step   multi T      single T     frozen T     oracle T     residual");
    for k in 0..h {
        println!(
            "{:>4}   {:.4e}   {:.4e}   {:.4e}   {:.4e}   {:.4}",
            k + 1,
            multi.steps[k].errors[Variable::T.index()].max,
            single.steps[k].errors[Variable::T.index()].max,
            frozen.steps[k].errors[Variable::T.index()].max,
            oracle.steps[k].errors[Variable::T.index()].max,
            multi.steps[k].scaled_residual,
        );
    }

    let steps: Vec<f64> = (1..=h).map(|k| k as f64).collect();
    let fit = fit_growth(&steps, &multi.max_error(Variable::T))?;
    println!("autoregressive growth: linear AIC {:.2}, quadratic AIC {:.2}", fit.linear_aic, fit.quadratic_aic);
    if let Some((ml, cfd)) = multi.mean_timing() {
        println!("mean hybrid step {ml:.3} ms, solver step {cfd:.3} ms");
    }
    Ok(())
}
