//! Scores the four input/output variants and a few network sizes by the
//! one-step temperature error after the training window.
//!
//! ```text
//! cargo run --release --example ablation_variants
//! ```

use fvmn::cli::ablate::{run_requests, Variant};
use fvmn::experiment::ExperimentConfig;

fn main() -> fvmn::Result<()> {
    let cfg = ExperimentConfig::desk();
    let series = cfg.generate_series()?;

    let mut requests: Vec<(String, Variant)> = Variant::ALL.iter().map(|&v| ("c".to_string(), v)).collect();
    requests.extend(["a", "e"].iter().map(|c| (c.to_string(), Variant::Fvmn)));
    let result = run_requests(&cfg, &series, &requests)?;
    print!("{}", result.ranking_text());

    let err = |v| result.row("c", v).expect("requested").max_rel_err;
    let (fvmn, general) = (err(Variant::Fvmn), err(Variant::General));
    println!("tier inputs with derivative outputs reach {:.1}% of the centre-only absolute error", 100.0 * fvmn / general);
    Ok(())
}
