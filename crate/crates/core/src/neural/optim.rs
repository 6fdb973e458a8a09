use serde::{Deserialize, Serialize};

use super::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

pub trait Optimizer {
    fn update(&mut self, net: &mut Network, grads: &Gradients);
}

/// Plain gradient descent `p <- p - lr * g`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
}

impl Sgd {
    pub fn new(learning_rate: f64) -> Self {
        Sgd { learning_rate }
    }
}

impl Optimizer for Sgd {
    fn update(&mut self, net: &mut Network, grads: &Gradients) {
        let lr = self.learning_rate;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            layer.weights.scaled_add(-lr, &grads.weights[l]);
            layer.bias.scaled_add(-lr, &grads.biases[l]);
        }
    }
}

/// Adam with bias-corrected first and second moments. Moment buffers are
/// allocated lazily on the first update.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Option<Gradients>,
    v: Option<Gradients>,
}

impl Adam {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam { learning_rate, beta1, beta2, epsilon, step: 0, m: None, v: None }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }
}

fn adam_update(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (b1, b2, eps, lr): (f64, f64, f64, f64),
    (c1, c2): (f64, f64),
) {
    for k in 0..p.len() {
        m[k] = b1 * m[k] + (1.0 - b1) * g[k];
        v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
        let m_hat = m[k] / c1;
        let v_hat = v[k] / c2;
        p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

impl Optimizer for Adam {
    fn update(&mut self, net: &mut Network, grads: &Gradients) {
        let m = self.m.get_or_insert_with(|| Gradients::zeros_like(net));
        let v = self.v.get_or_insert_with(|| Gradients::zeros_like(net));
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let hyper = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            adam_update(
                layer.weights.as_slice_mut().expect("standard layout"),
                grads.weights[l].as_slice().expect("standard layout"),
                m.weights[l].as_slice_mut().expect("standard layout"),
                v.weights[l].as_slice_mut().expect("standard layout"),
                hyper,
                (c1, c2),
            );
            adam_update(
                layer.bias.as_slice_mut().expect("standard layout"),
                grads.biases[l].as_slice().expect("standard layout"),
                m.biases[l].as_slice_mut().expect("standard layout"),
                v.biases[l].as_slice_mut().expect("standard layout"),
                hyper,
                (c1, c2),
            );
        }
    }
}
