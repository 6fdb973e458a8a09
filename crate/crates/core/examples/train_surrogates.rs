//! Builds the tier/derivative dataset from the training window and trains
//! the six per-variable networks.
//!
//! ```text
//! cargo run --release --example train_surrogates -- [MODEL_DIR]
//! ```

use std::path::PathBuf;

use fvmn::dataset::SampleTable;
use fvmn::experiment::ExperimentConfig;
use fvmn::neural::param_count;
use fvmn::rollout::SurrogateBundle;
use fvmn::solver::Variable;

fn main() -> fvmn::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/example-model".into()));
    let cfg = ExperimentConfig::desk();
    let series = cfg.generate_series()?;
    let partition = cfg.partition()?;
    let opts = cfg.dataset_options();
    let window = &series[..=cfg.series.train_pairs];

    let table = SampleTable::build(window, &partition, &opts, cfg.grid.dt)?;
    println!("{} samples of width {} from rows {:?}", table.len(), table.width(), partition.flame_rows());

    let spec = cfg.network.spec(opts.input_mode.width())?;
    let tcfg = cfg.train_config();
    let (bundle, reports) = SurrogateBundle::train(window, &partition, &opts, cfg.grid.dt, &spec, &tcfg, None)?;
    println!("six {spec} networks, {} parameters each", param_count(&spec));
    for (var, r) in Variable::ALL.iter().zip(&reports) {
        println!(
            "  {:<6} stopped at epoch {:>4}, best epoch {:>4}, best validation loss {:.4e}",
            var.name(),
            r.stopped_epoch,
            r.best_epoch,
            r.best_validation_loss
        );
    }

    for path in bundle.write(&out, cfg.seed, &tcfg.hash())? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
