use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FlameModel;
use crate::dataset::{
    input_into, DatasetOptions, DatasetSplit, DomainPartition, InputMode, OutputMode, SampleTable, Standardizer,
    WallPolicy,
};
use crate::error::{Error, Result};
use crate::neural::checkpoint::{read_checkpoint, write_checkpoint, CheckpointMeta};
use crate::neural::{train, train_from, Network, NetworkSpec, TrainConfig, TrainReport};
use crate::solver::{Snapshot, Variable, NUM_VARS};

pub const SCALERS_FILE: &str = "scalers.toml";

/// Six per-variable networks sharing one input standardizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateBundle {
    /// Indexed by [`Variable::index`].
    pub networks: Vec<Network>,
    pub input_scaler: Standardizer,
    pub target_scalers: Vec<Standardizer>,
    pub input_mode: InputMode,
    pub output_mode: OutputMode,
    pub wall_policy: WallPolicy,
}

/// Seed of the network for `var` within a run seeded with `seed`.
pub fn variable_seed(seed: u64, var: Variable) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(var.index() as u64)
}

/// Scalers and mode flags stored next to the checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScalerFile {
    input_mode: InputMode,
    output_mode: OutputMode,
    wall_policy: WallPolicy,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    target_mean: Vec<f64>,
    target_std: Vec<f64>,
}

impl SurrogateBundle {
    pub fn validate(&self) -> Result<()> {
        if self.networks.len() != NUM_VARS || self.target_scalers.len() != NUM_VARS {
            return Err(Error::Shape(format!("bundle needs {NUM_VARS} networks and target scalers")));
        }
        let width = self.input_mode.width();
        if self.input_scaler.dim() != width || self.networks.iter().any(|n| n.input_dim() != width) {
            return Err(Error::Shape(format!("bundle inputs must all be {width} wide")));
        }
        if self.target_scalers.iter().any(|s| s.dim() != 1) {
            return Err(Error::Shape("target scalers must be one-dimensional".into()));
        }
        Ok(())
    }

    /// Zero-weight networks with identity scalers: every predicted
    /// derivative is exactly zero.
    pub fn zeros(spec: &NetworkSpec, input_mode: InputMode) -> Result<Self> {
        Ok(SurrogateBundle {
            networks: (0..NUM_VARS).map(|_| Network::zeros(spec)).collect::<Result<_>>()?,
            input_scaler: Standardizer::identity(input_mode.width()),
            target_scalers: vec![Standardizer::identity(1); NUM_VARS],
            input_mode,
            output_mode: OutputMode::Derivative,
            wall_policy: WallPolicy::ZeroNeumann,
        })
    }

    /// Builds the per-variable datasets of `window` and trains six networks
    /// in parallel. With `warm`, each network continues from the matching
    /// network of that bundle.
    pub fn train(
        window: &[Snapshot],
        partition: &DomainPartition,
        opts: &DatasetOptions,
        dt: f64,
        spec: &NetworkSpec,
        config: &TrainConfig,
        warm: Option<&SurrogateBundle>,
    ) -> Result<(SurrogateBundle, Vec<TrainReport>)> {
        let table = SampleTable::build(window, partition, opts, dt)?;
        let splits: Vec<DatasetSplit> = Variable::ALL
            .iter()
            .map(|&var| DatasetSplit::from_table(&table, var, opts.split_fraction, opts.seed))
            .collect::<Result<_>>()?;
        Self::train_splits(&splits, opts.wall_policy, spec, config, warm)
    }

    /// Trains on prepared splits, one per variable in [`Variable::ALL`] order.
    pub fn train_splits(
        splits: &[DatasetSplit],
        wall_policy: WallPolicy,
        spec: &NetworkSpec,
        config: &TrainConfig,
        warm: Option<&SurrogateBundle>,
    ) -> Result<(SurrogateBundle, Vec<TrainReport>)> {
        if splits.len() != NUM_VARS || splits.iter().zip(Variable::ALL).any(|(s, v)| s.variable != v) {
            return Err(Error::Shape("one split per variable, in variable order".into()));
        }
        let results: Vec<Result<(Network, TrainReport)>> = splits
            .par_iter()
            .map(|split| {
                let cfg = TrainConfig { seed: variable_seed(config.seed, split.variable), ..config.clone() };
                match warm {
                    Some(w) => train_from(w.networks[split.variable.index()].clone(), split, &cfg),
                    None => train(split, spec, &cfg),
                }
            })
            .collect();
        let mut networks = Vec::with_capacity(NUM_VARS);
        let mut reports = Vec::with_capacity(NUM_VARS);
        for (r, var) in results.into_iter().zip(Variable::ALL) {
            let (net, rep) = r.map_err(|e| {
                log::error!("training the {} network failed", var.name());
                e
            })?;
            networks.push(net);
            reports.push(rep);
        }
        let first = &splits[0];
        let bundle = SurrogateBundle {
            networks,
            input_scaler: first.input_scaler.clone(),
            target_scalers: splits.iter().map(|s| s.target_scaler.clone()).collect(),
            input_mode: first.input_mode,
            output_mode: first.output_mode,
            wall_policy,
        };
        bundle.validate()?;
        Ok((bundle, reports))
    }

    /// Standardized input rows of every flame cell of `state`, row-major.
    pub fn flame_inputs(&self, state: &Snapshot, partition: &DomainPartition) -> Result<Array2<f64>> {
        let n = state.n();
        let width = self.input_mode.width();
        let mut x = Array2::zeros((partition.flame_cell_count(n), width));
        for (k, (i, j)) in partition.flame_cells(n).enumerate() {
            let mut row = x.row_mut(k);
            let slice = row.as_slice_mut().expect("standard layout");
            input_into(state, i, j, partition, self.input_mode, self.wall_policy, slice)?;
            self.input_scaler.apply_in_place(slice);
        }
        Ok(x)
    }

    pub fn write(&self, dir: &Path, seed: u64, train_config_hash: &str) -> Result<Vec<PathBuf>> {
        self.validate()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let scalers = ScalerFile {
            input_mode: self.input_mode,
            output_mode: self.output_mode,
            wall_policy: self.wall_policy,
            input_mean: self.input_scaler.mean.clone(),
            input_std: self.input_scaler.std.clone(),
            target_mean: self.target_scalers.iter().map(|s| s.mean[0]).collect(),
            target_std: self.target_scalers.iter().map(|s| s.std[0]).collect(),
        };
        let path = dir.join(SCALERS_FILE);
        std::fs::write(&path, toml::to_string(&scalers).expect("scalers serialize")).map_err(|e| Error::io(&path, e))?;
        let mut paths = Vec::with_capacity(NUM_VARS);
        for (net, var) in self.networks.iter().zip(Variable::ALL) {
            let path = dir.join(checkpoint_name(var));
            let meta = CheckpointMeta {
                variable: Some(var.name().to_string()),
                scalers: SCALERS_FILE.to_string(),
                seed: variable_seed(seed, var),
                train_config_hash: train_config_hash.to_string(),
            };
            write_checkpoint(&path, net, &meta)?;
            paths.push(path);
        }
        Ok(paths)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SCALERS_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let s: ScalerFile = toml::from_str(&text).map_err(|e| Error::parse(&path, e))?;
        if s.target_mean.len() != NUM_VARS || s.target_std.len() != NUM_VARS {
            return Err(Error::parse(&path, format!("expected {NUM_VARS} target scalers")));
        }
        let mut networks = Vec::with_capacity(NUM_VARS);
        for var in Variable::ALL {
            let path = dir.join(checkpoint_name(var));
            let (net, meta) = read_checkpoint(&path)?;
            if meta.variable.as_deref() != Some(var.name()) {
                return Err(Error::parse(&path, format!("checkpoint is for {:?}, expected {}", meta.variable, var.name())));
            }
            networks.push(net);
        }
        let bundle = SurrogateBundle {
            networks,
            input_scaler: Standardizer { mean: s.input_mean, std: s.input_std },
            target_scalers: s
                .target_mean
                .iter()
                .zip(&s.target_std)
                .map(|(m, sd)| Standardizer { mean: vec![*m], std: vec![*sd] })
                .collect(),
            input_mode: s.input_mode,
            output_mode: s.output_mode,
            wall_policy: s.wall_policy,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

pub fn checkpoint_name(var: Variable) -> String {
    format!("{}.ckpt", var.slug())
}

impl FlameModel for SurrogateBundle {
    fn advance_flame(&self, state: &Snapshot, partition: &DomainPartition, dt: f64, out: &mut Snapshot) -> Result<()> {
        let x = self.flame_inputs(state, partition)?;
        let n = state.n();
        for var in Variable::ALL {
            let k = var.index();
            let z = self.networks[k].predict_batch(x.view())?;
            let scaler = &self.target_scalers[k];
            for ((i, j), zk) in partition.flame_cells(n).zip(z.iter()) {
                let y = scaler.invert_scalar(*zk);
                let value = match self.output_mode {
                    OutputMode::Derivative => state.get(i, j, var) + dt * y,
                    OutputMode::Absolute => y,
                };
                if !value.is_finite() {
                    return Err(Error::Rollout { i, j, variable: var.name() });
                }
                out.set(i, j, var, value);
            }
        }
        Ok(())
    }
}
