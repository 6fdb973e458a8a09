//! Fully connected regression networks with hand-written backpropagation.
//!
//! Hidden layers apply the configured activation; the output layer is
//! linear. All arithmetic is `f64`. Forward and backward passes work on
//! row-major batches (`batch x features`), a single sample being a batch of
//! one.

pub mod checkpoint;
mod optim;
mod train;

use std::fmt;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use optim::{Adam, Optimizer, OptimizerKind, Sgd};
pub use train::{fit, train, train_from, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and the output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    #[serde(default = "one")]
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
}

fn one() -> usize {
    1
}

/// Hyperparameter cases of the architecture sweep, `a` through `h`.
pub const SWEEP_CASES: [char; 8] = ['a', 'b', 'c', 'd', 'e', 'f', 'g', 'h'];

impl NetworkSpec {
    pub fn new(input_dim: usize, hidden: &[usize], activation: Activation) -> Self {
        NetworkSpec { input_dim, hidden: hidden.to_vec(), output_dim: 1, activation }
    }

    /// Architecture of sweep case `a`-`h` for the given input width.
    pub fn sweep_case(case: char, input_dim: usize) -> Result<Self> {
        use Activation::*;
        let (hidden, act): (&[usize], Activation) = match case.to_ascii_lowercase() {
            'a' => (&[64], Relu),
            'b' => (&[64, 64], Relu),
            'c' => (&[64, 64, 64], Relu),
            'd' => (&[64, 64, 64, 64], Relu),
            'e' => (&[64, 64, 64], Sigmoid),
            'f' => (&[128, 128, 128], Relu),
            'g' => (&[256, 256, 256], Relu),
            'h' => (&[64, 32, 16], Relu),
            other => return Err(Error::Config(format!("unknown sweep case {other:?} (expected a-h)"))),
        };
        Ok(NetworkSpec::new(input_dim, hidden, act))
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(format!("every layer width must be at least 1: {self}")));
        }
        if self.output_dim != 1 {
            return Err(Error::Config("networks have a single scalar output".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for every layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend(&self.hidden);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.input_dim)?;
        for h in &self.hidden {
            write!(f, "-{h}")?;
        }
        write!(f, "-{} ({})", self.output_dim, self.activation.as_str())
    }
}

/// `sum_l fan_in * fan_out + fan_out`.
pub fn param_count(spec: &NetworkSpec) -> usize {
    spec.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
}

/// Dense layer `a_out = W a_in + b` with `W` stored `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    pub layers: Vec<Layer>,
}

/// Per-layer pre- and post-activation values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("at least one layer")
    }
}

/// Loss gradients with the same layout as [`Network::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    /// Flattened in the same order as [`Network::params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

impl Network {
    /// Seeded uniform initialisation: bound `sqrt(6 / fan_in)` for ReLU
    /// networks, `sqrt(6 / (fan_in + fan_out))` for sigmoid; zero biases.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = match spec.activation {
                    Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                    Activation::Sigmoid => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                };
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..bound));
                Layer { weights, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(Network { spec: spec.clone(), layers })
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| Layer { weights: Array2::zeros((fan_out, fan_in)), bias: Array1::zeros(fan_out) })
            .collect();
        Ok(Network { spec: spec.clone(), layers })
    }

    /// Rebuilds a network from explicit layers, checking that shapes chain.
    pub fn from_layers(spec: &NetworkSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::Shape(format!("{} layers for a {}-layer spec", layers.len(), shapes.len())));
        }
        for (l, (fan_in, fan_out)) in layers.iter().zip(&shapes) {
            if l.weights.dim() != (*fan_out, *fan_in) || l.bias.len() != *fan_out {
                return Err(Error::Shape(format!(
                    "layer {:?}/{} does not match {fan_out}x{fan_in}",
                    l.weights.dim(),
                    l.bias.len()
                )));
            }
        }
        Ok(Network { spec: spec.clone(), layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    /// Number of allocated weights and biases.
    pub fn allocated_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weights then bias of each layer, flattened row-major.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.allocated_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.allocated_params() {
            return Err(Error::Shape(format!("{} parameters for a {}-parameter network", flat.len(), self.allocated_params())));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    /// Forward pass over a batch, keeping every intermediate for backprop.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        if x.ncols() != self.spec.input_dim {
            return Err(Error::Shape(format!("input width {} for a {}-input network", x.ncols(), self.spec.input_dim)));
        }
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let a_in = if l == 0 { x } else { post[l - 1].view() };
            let z = a_in.dot(&layer.weights.t()) + &layer.bias;
            let a = if l == last { z.clone() } else { z.mapv(|v| self.spec.activation.apply(v)) };
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardCache { input: x.to_owned(), pre, post })
    }

    /// Outputs for a batch without keeping intermediates.
    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.spec.input_dim {
            return Err(Error::Shape(format!("input width {} for a {}-input network", x.ncols(), self.spec.input_dim)));
        }
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t()) + &layer.bias;
            if l != last {
                let act = self.spec.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        Ok(a.index_axis_move(Axis(1), 0))
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache)> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite network input".into()));
        }
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Shape(e.to_string()))?;
        let cache = self.forward_batch(view)?;
        Ok((cache.output()[[0, 0]], cache))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.0)
    }

    /// Gradients of the batch MSE `(1/B) sum (z - target)^2` with respect to
    /// every weight and bias, plus the loss itself.
    pub fn backward(&self, cache: &ForwardCache, targets: &[f64]) -> Result<(f64, Gradients)> {
        let out = cache.output();
        let batch = out.nrows();
        if targets.len() != batch {
            return Err(Error::Shape(format!("{} targets for a batch of {batch}", targets.len())));
        }
        let scale = 2.0 / batch as f64;
        let mut loss = 0.0;
        let mut delta = Array2::zeros((batch, 1));
        for (k, t) in targets.iter().enumerate() {
            let e = out[[k, 0]] - t;
            loss += e * e;
            delta[[k, 0]] = scale * e;
        }
        loss /= batch as f64;

        let n_layers = self.layers.len();
        let mut dw = vec![Array2::zeros((0, 0)); n_layers];
        let mut db = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            let a_in = if l == 0 { cache.input.view() } else { cache.post[l - 1].view() };
            dw[l] = delta.t().dot(&a_in);
            db[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut d_prev = delta.dot(&self.layers[l].weights);
                let act = self.spec.activation;
                ndarray::Zip::from(&mut d_prev)
                    .and(&cache.pre[l - 1])
                    .and(&cache.post[l - 1])
                    .for_each(|d, &z, &a| *d *= act.derivative(z, a));
                delta = d_prev;
            }
        }
        Ok((loss, Gradients { weights: dw, biases: db }))
    }

    /// Loss and gradients for a single `(x, target)` pair.
    pub fn sample_gradients(&self, x: &[f64], target: f64) -> Result<(f64, Gradients)> {
        let (_, cache) = self.forward(x)?;
        self.backward(&cache, &[target])
    }
}

/// `(1/n) sum (prediction - target)^2`.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(Error::Shape(format!(
            "mse over {} predictions and {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sweep_parameter_counts() {
        let expected = [2_049, 6_209, 10_369, 14_529, 10_369, 37_121, 139_777, 4_609];
        for (case, want) in SWEEP_CASES.iter().zip(expected) {
            let spec = NetworkSpec::sweep_case(*case, 30).unwrap();
            assert_eq!(param_count(&spec), want, "case {case}");
            assert_eq!(Network::zeros(&spec).unwrap().allocated_params(), want, "case {case}");
        }
        assert_eq!(param_count(&NetworkSpec::new(1, &[], Activation::Relu)), 2);
        assert!(NetworkSpec::sweep_case('z', 30).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::zeros(&NetworkSpec::new(4, &[8, 3], Activation::Relu)).unwrap();
        assert_eq!(net.predict(&[1.0, -2.0, 3.0, 9.0]).unwrap(), 0.0);
    }

    #[test]
    fn relu_clamps_negative_preactivations() {
        let spec = NetworkSpec::new(2, &[3], Activation::Relu);
        let mut net = Network::zeros(&spec).unwrap();
        net.layers[0].weights.fill(-1.0);
        net.layers[0].bias.fill(-0.5);
        net.layers[1].weights.fill(4.0);
        net.layers[1].bias[0] = 0.75;
        assert_eq!(net.predict(&[1.0, 2.0]).unwrap(), 0.75);
    }

    /// Explicit summation form of a network with one hidden layer.
    fn loop_forward(net: &Network, x: &[f64]) -> f64 {
        let (w1, b1) = (&net.layers[0].weights, &net.layers[0].bias);
        let (w2, b2) = (&net.layers[1].weights, &net.layers[1].bias);
        let mut z = b2[0];
        for j in 0..w1.nrows() {
            let mut y = b1[j];
            for i in 0..x.len() {
                y += w1[[j, i]] * x[i];
            }
            z += w2[[0, j]] * y.max(0.0);
        }
        z
    }

    #[test]
    fn vectorised_forward_matches_summation_form() {
        let spec = NetworkSpec::new(7, &[11], Activation::Relu);
        for seed in 0..20 {
            let mut net = Network::init(&spec, seed).unwrap();
            net.layers[0].bias.iter_mut().enumerate().for_each(|(k, b)| *b = 0.1 * k as f64 - 0.4);
            net.layers[1].bias[0] = 0.3;
            let x: Vec<f64> = (0..7).map(|k| ((k as f64 + seed as f64) * 0.77).sin()).collect();
            let got = net.predict(&x).unwrap();
            let want = loop_forward(&net, &x);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn forward_rejects_bad_shapes() {
        let net = Network::zeros(&NetworkSpec::new(3, &[2], Activation::Relu)).unwrap();
        assert!(matches!(net.predict(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0], &[2.0]).unwrap(), 4.0);
        assert!(mse_loss(&[0.0], &[1.0, 2.0]).is_err());
        assert!(mse_loss(&[], &[]).is_err());
        let p: Vec<f64> = (0..50).map(|k| (k as f64 * 0.3).cos()).collect();
        let t: Vec<f64> = (0..50).map(|k| (k as f64 * 0.11).sin()).collect();
        // Two-pass reference: residuals first, then their mean square.
        let resid: Vec<f64> = p.iter().zip(&t).map(|(a, b)| a - b).collect();
        let mut acc = 0.0;
        for r in &resid {
            acc += r * r;
        }
        let want = acc / 50.0;
        assert!((mse_loss(&p, &t).unwrap() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn zero_network_gradients_vanish_except_output_bias_path() {
        let net = Network::zeros(&NetworkSpec::new(3, &[4], Activation::Relu)).unwrap();
        let (loss, g) = net.sample_gradients(&[1.0, 2.0, 3.0], 0.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flat().iter().all(|v| *v == 0.0));
        let (_, g) = net.sample_gradients(&[1.0, 2.0, 3.0], 1.5).unwrap();
        assert_eq!(g.biases[1][0], -3.0);
        let nonzero = g.flat().iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn single_linear_neuron_gradient() {
        let spec = NetworkSpec::new(3, &[], Activation::Relu);
        let mut net = Network::zeros(&spec).unwrap();
        net.set_params(&[0.5, -1.0, 2.0, 0.25]).unwrap();
        let x = [1.0, 3.0, -2.0];
        let z = 0.5 - 3.0 - 4.0 + 0.25;
        let target = 1.0;
        let (_, g) = net.sample_gradients(&x, target).unwrap();
        for i in 0..3 {
            assert_eq!(g.weights[0][[0, i]], 2.0 * (z - target) * x[i]);
        }
        assert_eq!(g.biases[0][0], 2.0 * (z - target));
    }

    /// Central finite differences of the single-sample loss.
    pub(crate) fn fd_gradient(net: &Network, x: &[f64], target: f64, h: f64) -> Vec<f64> {
        let base = net.params();
        let mut probe = net.clone();
        let mut out = Vec::with_capacity(base.len());
        let mut p = base.clone();
        for k in 0..base.len() {
            p[k] = base[k] + h;
            probe.set_params(&p).unwrap();
            let up = (probe.predict(x).unwrap() - target).powi(2);
            p[k] = base[k] - h;
            probe.set_params(&p).unwrap();
            let down = (probe.predict(x).unwrap() - target).powi(2);
            p[k] = base[k];
            out.push((up - down) / (2.0 * h));
        }
        out
    }

    #[test]
    fn backprop_matches_finite_differences_small_nets() {
        for (seed, act) in [(1u64, Activation::Relu), (2, Activation::Sigmoid), (3, Activation::Relu)] {
            let spec = NetworkSpec::new(5, &[6, 4], act);
            let net = Network::init(&spec, seed).unwrap();
            let x: Vec<f64> = (0..5).map(|k| ((k + 1) as f64 * 0.9 + seed as f64).sin()).collect();
            let (_, g) = net.sample_gradients(&x, 0.3).unwrap();
            let fd = fd_gradient(&net, &x, 0.3, 1e-6);
            for (a, b) in g.flat().iter().zip(&fd) {
                let scale = a.abs().max(b.abs()).max(1e-3);
                assert!((a - b).abs() / scale < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn forward_is_pure() {
        let net = Network::init(&NetworkSpec::sweep_case('h', 30).unwrap(), 5).unwrap();
        let x: Vec<f64> = (0..30).map(|k| k as f64 * 0.01).collect();
        let a = net.predict(&x).unwrap();
        for _ in 0..5 {
            assert_eq!(net.predict(&x).unwrap().to_bits(), a.to_bits());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sgd_step_decreases_sample_loss(seed in 0u64..1000, target in -2.0f64..2.0) {
            let spec = NetworkSpec::new(4, &[8], Activation::Relu);
            let mut net = Network::init(&spec, seed).unwrap();
            let x = [0.3, -0.7, 1.1, 0.2];
            let (loss, g) = net.sample_gradients(&x, target).unwrap();
            prop_assume!(loss > 1e-12 && g.flat().iter().any(|v| *v != 0.0));
            let mut sgd = Sgd::new(1e-6);
            sgd.update(&mut net, &g);
            let (after, _) = net.sample_gradients(&x, target).unwrap();
            prop_assert!(after < loss);
        }

        #[test]
        fn adam_without_moments_follows_gradient_sign(seed in 0u64..1000) {
            let spec = NetworkSpec::new(3, &[5], Activation::Relu);
            let net = Network::init(&spec, seed).unwrap();
            let (_, g) = net.sample_gradients(&[0.5, -0.25, 1.0], 0.7).unwrap();
            let mut sgd_net = net.clone();
            Sgd::new(1e-3).update(&mut sgd_net, &g);
            let mut adam_net = net.clone();
            Adam::new(1e-3, 0.0, 0.0, 1e-300).update(&mut adam_net, &g);
            let base = net.params();
            for ((s, a), b) in sgd_net.params().iter().zip(adam_net.params()).zip(&base) {
                prop_assert_eq!((s - b).signum() * ((s - b) != 0.0) as i32 as f64,
                                (a - b).signum() * ((a - b) != 0.0) as i32 as f64);
            }
        }
    }
}
