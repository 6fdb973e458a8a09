//! Spins up the desk flame, checks the explicit stability limits and writes
//! the snapshot series.
//!
//! ```text
//! cargo run --release --example generate_flame -- [OUT_DIR]
//! ```

use std::path::PathBuf;

use fvmn::experiment::ExperimentConfig;
use fvmn::solver::series::write_series;
use fvmn::solver::Variable;

fn main() -> fvmn::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/example-series".into()));
    let cfg = ExperimentConfig::desk();
    let solver = cfg.solver()?;

    let initial = cfg.initial_state();
    let (cfl, diffusion) = solver.stability_numbers(&initial);
    println!("grid {}x{}, CFL {cfl:.3} (limit 0.5), diffusion number {diffusion:.3} (limit 0.25)", cfg.grid.m, cfg.grid.n);

    let series = cfg.generate_series()?;
    let first = &series[0];
    let last = series.last().expect("series is never empty");
    println!("{} snapshots from t = {:.3} s to t = {:.3} s", series.len(), first.time, last.time);
    for var in Variable::ALL {
        let a = first.volume_integral(&cfg.grid, var);
        let b = last.volume_integral(&cfg.grid, var);
        println!("  {:<6} max |value| {:>10.4e}  volume integral {a:>11.4e} -> {b:>11.4e}", var.name(), last.max_abs(var));
    }

    let manifest = write_series(&out, &cfg.grid, &cfg.physics, &series)?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
