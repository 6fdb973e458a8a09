use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Adam, Network, NetworkSpec, Optimizer, OptimizerKind, Sgd};
use crate::dataset::{DatasetSplit, Standardizer, TierSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 128,
            max_epochs: 2000,
            patience: 50,
            min_delta: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.batch_size < 1 || self.max_epochs < 1 {
            return Err(Error::Config("batch size and max epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon < 0.0 {
            return Err(Error::Config("adam betas must lie in [0, 1) and epsilon must be non-negative".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::Config("min-delta must be non-negative".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("train config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn optimizer(&self) -> Box<dyn Optimizer> {
        match self.optimizer {
            OptimizerKind::Sgd => Box::new(Sgd::new(self.learning_rate)),
            OptimizerKind::Adam => Box::new(Adam::new(self.learning_rate, self.beta1, self.beta2, self.epsilon)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub stopped_epoch: usize,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    /// Leading 16 hex digits of the SHA-256 of the returned parameters.
    pub snapshot_id: String,
}

fn snapshot_id(net: &Network) -> String {
    let mut h = Sha256::new();
    for p in net.params() {
        h.update(p.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())[..16].to_string()
}

fn mean_squared(net: &Network, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    let pred = net.predict_batch(x)?;
    Ok(pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64)
}

/// Mini-batch optimisation of `net` on already-scaled arrays.
///
/// The training rows are reshuffled every epoch from a generator seeded with
/// `config.seed`. Returns the parameters of the epoch with the lowest
/// validation MSE.
pub fn fit(
    mut net: Network,
    train_x: ArrayView2<'_, f64>,
    train_y: ArrayView1<'_, f64>,
    val_x: ArrayView2<'_, f64>,
    val_y: ArrayView1<'_, f64>,
    config: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    config.validate()?;
    let n = train_x.nrows();
    if n == 0 || val_x.nrows() == 0 {
        return Err(Error::Config("training needs nonempty training and validation sets".into()));
    }
    if train_y.len() != n || val_y.len() != val_x.nrows() {
        return Err(Error::Shape("input rows and targets differ in length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = config.optimizer();
    let mut order: Vec<usize> = (0..n).collect();
    let mut train_loss = Vec::new();
    let mut validation_loss = Vec::new();
    let mut best = (f64::INFINITY, 0usize, net.clone());
    let mut waited = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut acc = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let bx = train_x.select(Axis(0), chunk);
            let by: Vec<f64> = chunk.iter().map(|&k| train_y[k]).collect();
            let cache = net.forward_batch(bx.view())?;
            let (loss, grads) = net.backward(&cache, &by)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            acc += loss * chunk.len() as f64;
            opt.update(&mut net, &grads);
        }
        let tl = acc / n as f64;
        let vl = mean_squared(&net, val_x, val_y)?;
        if !vl.is_finite() {
            return Err(Error::Divergence { epoch, loss: vl });
        }
        train_loss.push(tl);
        validation_loss.push(vl);
        if vl < best.0 - config.min_delta {
            best = (vl, epoch, net.clone());
            waited = 0;
        } else {
            waited += 1;
            if waited >= config.patience {
                break;
            }
        }
        log::trace!("epoch {epoch}: train {tl:.3e} validation {vl:.3e}");
    }
    let (best_validation_loss, best_epoch, best_net) = best;
    let report = TrainReport {
        stopped_epoch: train_loss.len(),
        train_loss,
        validation_loss,
        best_epoch,
        best_validation_loss,
        snapshot_id: snapshot_id(&best_net),
    };
    Ok((best_net, report))
}

/// Rows of standardized inputs and targets.
pub(crate) fn scaled_arrays(samples: &[TierSample], input: &Standardizer, target: &Standardizer) -> (Array2<f64>, Array1<f64>) {
    let width = input.dim();
    let mut x = Array2::zeros((samples.len(), width));
    let mut y = Array1::zeros(samples.len());
    for (k, s) in samples.iter().enumerate() {
        let mut row = x.row_mut(k);
        let slice = row.as_slice_mut().expect("standard layout");
        slice.copy_from_slice(&s.input);
        input.apply_in_place(slice);
        y[k] = target.apply_scalar(s.target);
    }
    (x, y)
}

/// Trains a freshly initialised network (seeded with `config.seed`) on a
/// dataset split, in the split's standardized coordinates.
pub fn train(split: &DatasetSplit, spec: &NetworkSpec, config: &TrainConfig) -> Result<(Network, TrainReport)> {
    if spec.input_dim != split.input_mode.width() {
        return Err(Error::Shape(format!(
            "network input {} for {}-wide samples",
            spec.input_dim,
            split.input_mode.width()
        )));
    }
    train_from(Network::init(spec, config.seed)?, split, config)
}

/// Continues training from existing parameters.
pub fn train_from(net: Network, split: &DatasetSplit, config: &TrainConfig) -> Result<(Network, TrainReport)> {
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(Error::Config("training needs nonempty training and validation sets".into()));
    }
    let (tx, ty) = scaled_arrays(&split.train, &split.input_scaler, &split.target_scaler);
    let (vx, vy) = scaled_arrays(&split.validation, &split.input_scaler, &split.target_scaler);
    fit(net, tx.view(), ty.view(), vx.view(), vy.view(), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Activation;

    fn synthetic(n: usize, f: impl Fn(&[f64]) -> f64, seed: u64) -> (Array2<f64>, Array1<f64>) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0));
        let y = x.rows().into_iter().map(|r| f(r.as_slice().unwrap())).collect();
        (x, y)
    }

    #[test]
    fn recovers_linear_weight() {
        let (tx, ty) = synthetic(400, |x| 3.0 * x[0], 1);
        let (vx, vy) = synthetic(100, |x| 3.0 * x[0], 2);
        let spec = NetworkSpec::new(3, &[], Activation::Relu);
        let cfg = TrainConfig { learning_rate: 0.01, batch_size: 32, max_epochs: 3000, patience: 100, min_delta: 0.0, ..Default::default() };
        let (net, report) = fit(Network::init(&spec, 0).unwrap(), tx.view(), ty.view(), vx.view(), vy.view(), &cfg).unwrap();
        let w = net.layers[0].weights[[0, 0]];
        assert!((w - 3.0).abs() < 1e-3, "weight {w}");
        assert!(net.layers[0].weights[[0, 1]].abs() < 1e-3);
        assert_eq!(report.train_loss.len(), report.stopped_epoch);
        assert_eq!(report.validation_loss.len(), report.stopped_epoch);
    }

    #[test]
    fn constant_target_is_fitted_by_bias() {
        let (tx, _) = synthetic(200, |_| 0.0, 3);
        let (vx, _) = synthetic(50, |_| 0.0, 4);
        let ty = Array1::from_elem(200, 0.7);
        let vy = Array1::from_elem(50, 0.7);
        let spec = NetworkSpec::new(3, &[], Activation::Relu);
        let cfg = TrainConfig { learning_rate: 0.01, batch_size: 50, max_epochs: 4000, patience: 200, min_delta: 0.0, ..Default::default() };
        let (net, report) = fit(Network::zeros(&spec).unwrap(), tx.view(), ty.view(), vx.view(), vy.view(), &cfg).unwrap();
        assert!(report.best_validation_loss < 1e-12, "{}", report.best_validation_loss);
        assert!((net.layers[0].bias[0] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn training_is_deterministic() {
        let (tx, ty) = synthetic(300, |x| (2.0 * x[0]).sin() + x[1] * x[2], 5);
        let (vx, vy) = synthetic(60, |x| (2.0 * x[0]).sin() + x[1] * x[2], 6);
        let spec = NetworkSpec::new(3, &[16, 16], Activation::Relu);
        let cfg = TrainConfig { max_epochs: 30, seed: 9, ..Default::default() };
        let run = || fit(Network::init(&spec, 9).unwrap(), tx.view(), ty.view(), vx.view(), vy.view(), &cfg).unwrap();
        let (a, ra) = run();
        let (b, rb) = run();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&ra.train_loss), bits(&rb.train_loss));
    }

    #[test]
    fn returns_best_validation_epoch() {
        let (tx, ty) = synthetic(200, |x| x[0] * x[1], 7);
        let (vx, vy) = synthetic(40, |x| -x[0] * x[1], 8);
        let spec = NetworkSpec::new(3, &[8], Activation::Relu);
        let cfg = TrainConfig { learning_rate: 0.01, max_epochs: 200, patience: 10, ..Default::default() };
        let (net, report) = fit(Network::init(&spec, 1).unwrap(), tx.view(), ty.view(), vx.view(), vy.view(), &cfg).unwrap();
        let min = report.validation_loss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_validation_loss, min);
        assert_eq!(report.validation_loss[report.best_epoch - 1], min);
        assert_eq!(mean_squared(&net, vx.view(), vy.view()).unwrap(), min);
        assert!(report.stopped_epoch <= report.best_epoch + cfg.patience);
    }

    #[test]
    fn divergence_reports_epoch() {
        let (tx, ty) = synthetic(100, |x| 1e3 * x[0], 10);
        let (vx, vy) = synthetic(20, |x| 1e3 * x[0], 11);
        let spec = NetworkSpec::new(3, &[], Activation::Relu);
        let cfg = TrainConfig { optimizer: OptimizerKind::Sgd, learning_rate: 10.0, max_epochs: 500, patience: 500, ..Default::default() };
        let err = fit(Network::init(&spec, 0).unwrap(), tx.view(), ty.view(), vx.view(), vy.view(), &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch, .. } if epoch >= 1), "{err}");
    }

    #[test]
    fn rejects_bad_config() {
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { patience: 0, ..Default::default() }.validate().is_err());
        assert_ne!(TrainConfig::default().hash(), TrainConfig { seed: 1, ..Default::default() }.hash());
    }
}
