//! Alternates solver windows with residual-gated surrogate phases, then
//! checks the trace and audits the hybrid states against the pure solver.
//!
//! ```text
//! cargo run --release --example macnet_hybrid -- [TOLERANCE]
//! ```

use fvmn::experiment::ExperimentConfig;
use fvmn::macnet::{hybrid_error_audit, run, validate_trace, PhaseMode};
use fvmn::solver::Variable;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::desk();
    if let Some(t) = std::env::args().nth(1) {
        cfg.macnet.tolerance = t.parse()?;
    }
    let solver = cfg.solver()?;
    let start = cfg.spun_up_state()?;
    let problem = cfg.macnet_problem(&solver)?;
    let hybrid = run(&start, &cfg.macnet_config(), &problem)?;
    let trace = &hybrid.trace;

    for phase in &trace.phases {
        let worst = phase.residuals.iter().copied().fold(f64::NAN, f64::max);
        let note = if phase.mode == PhaseMode::Ml { format!(", max residual {worst:.4}") } else { String::new() };
        println!("{:>3} {:>3} steps from {:>3} ({:?}{note})", phase.mode.as_str(), phase.len(), phase.start, phase.end_reason);
    }
    println!("ML fraction {:.3}, {} retrains, {} fallbacks", trace.ml_fraction, trace.retrains.len(), trace.fallbacks.len());
    match validate_trace(trace) {
        Ok(()) => println!("trace invariants hold"),
        Err(v) => println!("trace violations: {v:?}"),
    }

    let truth = solver.simulate(&start, cfg.macnet.horizon)?;
    let audit = hybrid_error_audit(trace, &hybrid.states, &truth, &problem.partition)?;
    let last = audit.last().expect("horizon is at least one step");
    println!("final-step max temperature error {:.4e}", last.errors[Variable::T.index()].max);
    println!("time: solver {:.2} s, surrogate {:.2} s, training {:.2} s", hybrid.timing.cfd_seconds, hybrid.timing.ml_seconds, hybrid.timing.train_seconds);
    Ok(())
}
