//! Small feed-forward value network: rectifier hidden layers, identity
//! output, trained on weighted squared temporal-difference error.
//!
//! The implementation is deliberately plain — nested `Vec<f64>` weights,
//! explicit backpropagation — so gradients can be audited against central
//! finite differences parameter by parameter.

use rand::Rng;

use crate::error::{Error, Result};

/// Multi-layer perceptron mapping state features to per-action values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    widths: Vec<usize>,
    /// Per layer: `widths[l+1] x widths[l]` weights, row-major by output unit.
    weights: Vec<Vec<f64>>,
    /// Per layer: one bias per output unit.
    biases: Vec<Vec<f64>>,
}

impl ValueNet {
    /// Zero-valued network with the given layer widths (input first).
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidParameter(
                "a network needs an input and an output width".into(),
            ));
        }
        if widths.iter().any(|w| *w == 0) {
            return Err(Error::InvalidParameter("layer widths must be positive".into()));
        }
        let weights = widths
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = widths[1..].iter().map(|w| vec![0.0; *w]).collect();
        Ok(Self {
            widths: widths.to_vec(),
            weights,
            biases,
        })
    }

    /// Uniform Glorot initialization, biases zero.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        for (l, w) in net.weights.iter_mut().enumerate() {
            let limit = (6.0 / (widths[l] + widths[l + 1]) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// (output units, input units) of one layer.
    pub fn layer_shape(&self, layer: usize) -> (usize, usize) {
        (self.widths[layer + 1], self.widths[layer])
    }

    pub fn layer_weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn layer_biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn set_layer(&mut self, layer: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<()> {
        let (rows, cols) = self.layer_shape(layer);
        if weights.len() != rows * cols || biases.len() != rows {
            return Err(Error::InvalidParameter(format!(
                "layer {layer} expects {}x{} weights and {} biases",
                rows, cols, rows
            )));
        }
        self.weights[layer] = weights;
        self.biases[layer] = biases;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter view: all weight matrices in layer order, then all bias
    /// vectors in layer order.
    pub fn get_param(&self, index: usize) -> f64 {
        let mut i = index;
        for w in &self.weights {
            if i < w.len() {
                return w[i];
            }
            i -= w.len();
        }
        for b in &self.biases {
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let mut i = index;
        for w in &mut self.weights {
            if i < w.len() {
                w[i] = value;
                return;
            }
            i -= w.len();
        }
        for b in &mut self.biases {
            if i < b.len() {
                b[i] = value;
                return;
            }
            i -= b.len();
        }
        panic!("parameter index {index} out of range");
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim() {
            return Err(Error::Domain(format!(
                "feature vector has length {}, network expects {}",
                features.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Deterministic forward pass; hidden layers rectified, output linear.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_input(features)?;
        let mut h = features.to_vec();
        for layer in 0..self.n_layers() {
            h = self.layer_out(layer, &h, layer + 1 < self.n_layers());
        }
        Ok(h)
    }

    fn layer_out(&self, layer: usize, input: &[f64], rectify: bool) -> Vec<f64> {
        let (rows, cols) = self.layer_shape(layer);
        let w = &self.weights[layer];
        let mut out = self.biases[layer].clone();
        for r in 0..rows {
            let row = &w[r * cols..(r + 1) * cols];
            let mut acc = 0.0;
            for (x, wv) in input.iter().zip(row) {
                acc += x * wv;
            }
            out[r] += acc;
            if rectify && out[r] < 0.0 {
                out[r] = 0.0;
            }
        }
        out
    }

    /// Forward pass keeping every layer's post-activation output; index 0 is
    /// the input itself.
    fn forward_trace(&self, features: &[f64]) -> Vec<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.n_layers() + 1);
        trace.push(features.to_vec());
        for layer in 0..self.n_layers() {
            let next = self.layer_out(layer, trace.last().unwrap(), layer + 1 < self.n_layers());
            trace.push(next);
        }
        trace
    }
}

/// Parameter gradients with the same shapes as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &ValueNet) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Flat view matching [`ValueNet::get_param`] ordering.
    pub fn get(&self, index: usize) -> f64 {
        let mut i = index;
        for w in &self.weights {
            if i < w.len() {
                return w[i];
            }
            i -= w.len();
        }
        for b in &self.biases {
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("gradient index {index} out of range");
    }
}

/// One training example: features, the action whose value is regressed, the
/// bootstrap target, and an importance weight.
#[derive(Debug, Clone)]
pub struct TdSample {
    pub features: Vec<f64>,
    pub action: usize,
    pub target: f64,
    pub weight: f64,
}

fn check_samples(net: &ValueNet, samples: &[TdSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Domain("empty training batch".into()));
    }
    for s in samples {
        net.check_input(&s.features)?;
        if s.action >= net.output_dim() {
            return Err(Error::Domain(format!(
                "action {} out of range (outputs = {})",
                s.action,
                net.output_dim()
            )));
        }
        if !s.target.is_finite() || !s.weight.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite training sample (target {}, weight {})",
                s.target, s.weight
            )));
        }
    }
    Ok(())
}

/// Weighted mean squared TD error:
/// `(1/N) Σ_j w_j (q(s_j)[a_j] - y_j)²`. Forward passes only, used both for
/// reporting and as the reference path for finite-difference checks.
pub fn td_loss(net: &ValueNet, samples: &[TdSample]) -> Result<f64> {
    check_samples(net, samples)?;
    let mut total = 0.0;
    for s in samples {
        let out = net.forward(&s.features)?;
        let err = out[s.action] - s.target;
        total += s.weight * err * err;
    }
    let loss = total / samples.len() as f64;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("training loss is not finite ({loss})")));
    }
    Ok(loss)
}

/// Loss and analytic parameter gradients by backpropagation.
pub fn td_loss_gradients(net: &ValueNet, samples: &[TdSample]) -> Result<(f64, Gradients)> {
    check_samples(net, samples)?;
    let n = samples.len() as f64;
    let mut grads = Gradients::zeros_like(net);
    let mut total = 0.0;

    for s in samples {
        let trace = net.forward_trace(&s.features);
        let out = trace.last().unwrap();
        let err = out[s.action] - s.target;
        total += s.weight * err * err;

        // Output layer is linear: d(loss_j)/d(out[k]) is nonzero only at the
        // regressed action.
        let mut delta = vec![0.0; net.output_dim()];
        delta[s.action] = 2.0 * s.weight * err / n;

        for layer in (0..net.n_layers()).rev() {
            let (rows, cols) = net.layer_shape(layer);
            let input = &trace[layer];
            let w = &net.weights[layer];
            let gw = &mut grads.weights[layer];
            let gb = &mut grads.biases[layer];
            let mut delta_prev = vec![0.0; cols];
            for r in 0..rows {
                let d = delta[r];
                if d != 0.0 {
                    gb[r] += d;
                    let grow = &mut gw[r * cols..(r + 1) * cols];
                    let wrow = &w[r * cols..(r + 1) * cols];
                    for c in 0..cols {
                        grow[c] += d * input[c];
                        delta_prev[c] += d * wrow[c];
                    }
                }
            }
            if layer > 0 {
                // Rectifier derivative: pass gradient only where the hidden
                // activation is strictly positive.
                for (dp, h) in delta_prev.iter_mut().zip(&trace[layer]) {
                    if *h <= 0.0 {
                        *dp = 0.0;
                    }
                }
                delta = delta_prev;
            }
        }
    }

    let loss = total / n;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("training loss is not finite ({loss})")));
    }
    Ok((loss, grads))
}

/// Adaptive moment estimation over the network parameters.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, net: &ValueNet) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; net.param_count()],
            v: vec![0.0; net.param_count()],
        }
    }

    pub fn apply(&mut self, net: &mut ValueNet, grads: &Gradients) {
        self.step += 1;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..net.param_count() {
            let g = grads.get(i);
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            let theta = net.get_param(i) - self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            net.set_param(i, theta);
        }
    }
}

/// One optimization step on a batch; returns the pre-update loss.
pub fn gradient_step(net: &mut ValueNet, opt: &mut Adam, samples: &[TdSample]) -> Result<f64> {
    let (loss, grads) = td_loss_gradients(net, samples)?;
    opt.apply(net, &grads);
    Ok(loss)
}
