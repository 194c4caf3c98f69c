//! Fully connected networks trained with Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Relu,
    /// Leaky ReLU with the given negative slope.
    LeakyRelu(f64),
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    z
                } else {
                    s * z
                }
            }
        }
    }

    /// Derivative expressed through the activation output.
    fn slope_at_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(a > 0.0)),
            Activation::LeakyRelu(s) => {
                if a > 0.0 {
                    1.0
                } else {
                    s
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fit regression targets in z-score space and map predictions back.
    pub standardize_targets: bool,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layers: vec![128, 128, 128],
            activation: Activation::Relu,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            standardize_targets: true,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if let Activation::LeakyRelu(s) = self.activation {
            if !s.is_finite() {
                return Err(Error::invalid("leaky ReLU slope must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    /// `in × out`
    weights: Array2<f64>,
    bias: Array1<f64>,
}

/// A feed-forward network with a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Dense>,
    activation: Activation,
}

/// Layer inputs recorded during a forward pass; `inputs[0]` is the batch.
pub(crate) struct Trace {
    inputs: Vec<Array2<f64>>,
    pub(crate) output: Array2<f64>,
}

pub(crate) struct Gradients(Vec<(Array2<f64>, Array1<f64>)>);

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-limit..limit)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Network { layers, activation })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = self.affine(0, x);
        for i in 1..=last {
            a.mapv_inplace(|z| self.activation.apply(z));
            a = self.affine(i, a.view());
        }
        a
    }

    fn affine(&self, i: usize, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let layer = &self.layers[i];
        let mut z = x.dot(&layer.weights);
        z += &layer.bias;
        z
    }

    pub(crate) fn forward_trace(&self, x: ArrayView2<'_, f64>) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_owned());
        for i in 0..self.layers.len() - 1 {
            let mut a = self.affine(i, inputs[i].view());
            a.mapv_inplace(|z| self.activation.apply(z));
            inputs.push(a);
        }
        let output = self.affine(self.layers.len() - 1, inputs[inputs.len() - 1].view());
        Trace { inputs, output }
    }

    /// Backpropagates `grad_output` (∂loss/∂output). Returns parameter
    /// gradients and ∂loss/∂input.
    pub(crate) fn backward(&self, trace: &Trace, grad_output: Array2<f64>, want_params: bool) -> (Gradients, Array2<f64>) {
        let mut grads = Vec::with_capacity(if want_params { self.layers.len() } else { 0 });
        let mut delta = grad_output;
        for i in (0..self.layers.len()).rev() {
            let input = &trace.inputs[i];
            if want_params {
                grads.push((input.t().dot(&delta), delta.sum_axis(Axis(0))));
            }
            let mut upstream = delta.dot(&self.layers[i].weights.t());
            if i > 0 {
                upstream.zip_mut_with(input, |g, &a| *g *= self.activation.slope_at_output(a));
            }
            delta = upstream;
        }
        grads.reverse();
        (Gradients(grads), delta)
    }

    /// ∂(Σ grad_output ⊙ f(x))/∂x for a batch.
    pub fn input_gradient(&self, x: ArrayView2<'_, f64>, grad_output: Array2<f64>) -> Array2<f64> {
        let trace = self.forward_trace(x);
        self.backward(&trace, grad_output, false).1
    }
}

pub(crate) struct Adam {
    lr: f64,
    step: i32,
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Adam {
    pub(crate) fn new(net: &Network, lr: f64) -> Self {
        let zeros: Vec<_> = net
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
            .collect();
        Adam {
            lr,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub(crate) fn update(&mut self, net: &mut Network, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let lr = self.lr;
        let apply = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        };
        for (((layer, (gw, gb)), (mw, mb)), (vw, vb)) in net
            .layers
            .iter_mut()
            .zip(&grads.0)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            ndarray::Zip::from(&mut layer.weights)
                .and(gw)
                .and(mw)
                .and(vw)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(gb)
                .and(mb)
                .and(vb)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Loss {
    /// Mean over batch and outputs of squared error.
    Mse,
    /// Mean over batch of softmax cross-entropy.
    CrossEntropy,
}

pub(crate) enum BatchTargets {
    Values(Array2<f64>),
    Labels(Vec<usize>),
}

pub(crate) fn loss_and_gradient(loss: Loss, output: &Array2<f64>, targets: &BatchTargets) -> (f64, Array2<f64>) {
    let b = output.nrows() as f64;
    match (loss, targets) {
        (Loss::Mse, BatchTargets::Values(t)) => {
            let diff = output - t;
            let scale = output.len() as f64;
            let value = diff.iter().map(|d| d * d).sum::<f64>() / scale;
            (value, diff * (2.0 / scale))
        }
        (Loss::CrossEntropy, BatchTargets::Labels(labels)) => {
            let mut grad = output.clone();
            let mut value = 0.0;
            for (mut row, &label) in grad.rows_mut().into_iter().zip(labels) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.mapv_inplace(|z| (z - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|e| e / sum);
                value -= row[label].max(f64::MIN_POSITIVE).ln();
                row[label] -= 1.0;
            }
            grad /= b;
            (value / b, grad)
        }
        _ => unreachable!("loss and target kinds are paired by the caller"),
    }
}

/// Mini-batch Adam over `n` samples. `make_batch` turns a list of sample
/// indices into network inputs and targets; it may draw from the generator
/// (anchors, latent noise).
pub(crate) fn fit<F>(net: &mut Network, cfg: &MlpConfig, n: usize, loss: Loss, rng: &mut Rng, mut make_batch: F) -> Result<()>
where
    F: FnMut(&Network, &[usize], &mut Rng) -> (Array2<f64>, BatchTargets),
{
    let mut adam = Adam::new(net, cfg.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let (x, targets) = make_batch(net, chunk, rng);
            let trace = net.forward_trace(x.view());
            let (value, grad) = loss_and_gradient(loss, &trace.output, &targets);
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, loss: value });
            }
            let (grads, _) = net.backward(&trace, grad, true);
            adam.update(net, &grads);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    fn numeric_input_grad(net: &Network, x: &Array2<f64>, w: &Array2<f64>) -> Array2<f64> {
        let h = 1e-6;
        let mut out = Array2::zeros(x.raw_dim());
        for idx in ndarray::indices(x.raw_dim()) {
            let mut xp = x.clone();
            xp[idx] += h;
            let mut xm = x.clone();
            xm[idx] -= h;
            let fp = (net.forward(xp.view()) * w).sum();
            let fm = (net.forward(xm.view()) * w).sum();
            out[idx] = (fp - fm) / (2.0 * h);
        }
        out
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = seeded(3);
        for act in [Activation::Relu, Activation::LeakyRelu(0.2)] {
            let net = Network::new(&[3, 8, 8, 2], act, &mut rng).unwrap();
            let x = array![[0.3, -0.7, 1.1], [-0.2, 0.5, 0.05]];
            let w = array![[1.0, -0.5], [0.25, 2.0]];
            let analytic = net.input_gradient(x.view(), w.clone());
            let numeric = numeric_input_grad(&net, &x, &w);
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!((a - n).abs() < 1e-5, "{a} vs {n}");
            }
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let mut rng = seeded(4);
        let mut net = Network::new(&[2, 5, 1], Activation::Relu, &mut rng).unwrap();
        let x = array![[0.4, -0.3], [1.0, 0.2], [-0.6, 0.9]];
        let t = BatchTargets::Values(array![[0.5], [-1.0], [0.1]]);
        let trace = net.forward_trace(x.view());
        let (_, g) = loss_and_gradient(Loss::Mse, &trace.output, &t);
        let (grads, _) = net.backward(&trace, g, true);
        let h = 1e-6;
        for (r, c) in [(0, 0), (1, 3), (0, 4)] {
            let orig = net.layers[0].weights[[r, c]];
            net.layers[0].weights[[r, c]] = orig + h;
            let lp = loss_and_gradient(Loss::Mse, &net.forward(x.view()), &t).0;
            net.layers[0].weights[[r, c]] = orig - h;
            let lm = loss_and_gradient(Loss::Mse, &net.forward(x.view()), &t).0;
            net.layers[0].weights[[r, c]] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            assert!((grads.0[0].0[[r, c]] - numeric).abs() < 1e-6);
        }
    }

    #[test]
    fn cross_entropy_gradient_sums_to_zero_per_row() {
        let out = array![[1.0, 2.0, 0.5], [0.0, 0.0, 0.0]];
        let (loss, g) = loss_and_gradient(Loss::CrossEntropy, &out, &BatchTargets::Labels(vec![1, 2]));
        assert!(loss > 0.0);
        for row in g.rows() {
            assert!(row.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn glorot_bounds() {
        let net = Network::new(&[10, 20], Activation::Relu, &mut seeded(0)).unwrap();
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(net.layers[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(net.layers[0].bias.iter().all(|b| *b == 0.0));
        assert_eq!(net.parameter_count(), 220);
    }

    #[test]
    fn config_validation() {
        assert!(MlpConfig { hidden_layers: vec![0], ..Default::default() }.validate().is_err());
        assert!(MlpConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(MlpConfig::default().validate().is_ok());
    }
}
