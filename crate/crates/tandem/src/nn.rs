//! Minimal dense-network engine: forward/backward passes with batch
//! normalization, heteroscedastic-friendly output heads, and Adam.
//!
//! The layer stack is fixed (batch normalization feeding each affine layer,
//! then an activation), so gradients are hand-derived reverse-mode rather
//! than a general tape. Backward differentiates *through* the batch
//! statistics, which is what a finite-difference probe of the training loss
//! sees.
//!
//! Forward passes in train mode are pure: they return a [`Trace`] of cached
//! intermediates and leave the network untouched. The trainer decides when to
//! fold a trace's batch statistics into the running estimates
//! ([`DenseNet::absorb_batch_stats`]). Eval mode uses running statistics and
//! no trace. Because [`DenseNet::backward`] takes the trace as an explicit
//! argument, "backward without a prior forward" is unrepresentable.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Activation functions used by the model stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// max(0.2·z, z); the negative slope is fixed at 0.2.
    LeakyRelu,
    Softplus,
    Relu,
    Linear,
    Logistic,
}

pub const LEAKY_SLOPE: f64 = 0.2;

/// Numerically safe logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically safe softplus ln(1+e^z).
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z >= 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Softplus => softplus(z),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
            Activation::Logistic => logistic(z),
        }
    }

    /// dact/dz evaluated from the pre-activation value.
    pub fn grad(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z >= 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Softplus => logistic(z),
            Activation::Relu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
            Activation::Logistic => {
                let s = logistic(z);
                s * (1.0 - s)
            }
        }
    }
}

/// Batch-normalization parameters and running statistics for one layer input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPSILON: f64 = 1e-5;

impl BatchNorm {
    fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
        }
    }
}

/// One dense layer: optional batch norm on the input, then affine, then an
/// activation. Weights are stored (in, out).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
    pub batch_norm: Option<BatchNorm>,
}

/// A fully connected network with a fixed layer stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
}

/// Cached intermediates for one layer from a train-mode forward pass.
#[derive(Debug, Clone)]
struct LayerTrace {
    /// Input to the layer (= input to batch norm when present).
    input: Array2<f64>,
    /// Batch norm internals: (batch mean, batch var, normalized input).
    bn: Option<(Array1<f64>, Array1<f64>, Array2<f64>)>,
    /// Input to the affine transform (post-batch-norm output, or `input`).
    affine_in: Array2<f64>,
    /// Pre-activation values.
    pre_act: Array2<f64>,
}

/// Cached intermediates for a whole train-mode forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    layers: Vec<LayerTrace>,
    batch: usize,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone)]
pub struct Grads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    /// (dgamma, dbeta) when the layer has batch norm.
    pub bn: Option<(Array1<f64>, Array1<f64>)>,
}

impl Grads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Grads {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                    bn: l.batch_norm.as_ref().map(|bn| {
                        (Array1::zeros(bn.gamma.raw_dim()), Array1::zeros(bn.beta.raw_dim()))
                    }),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
            if let (Some((ga, ba)), Some((gb, bb))) = (a.bn.as_mut(), b.bn.as_ref()) {
                *ga += gb;
                *ba += bb;
            }
        }
    }

    /// Add `c`·(weights, biases) of `net` to the corresponding gradient
    /// blocks — the gradient of an L2 penalty on weights and biases only
    /// (batch-norm scale/shift parameters are not regularized).
    /// Adds `c` times every trainable parameter of `net` (weights, biases,
    /// and batch-norm scale/shift) — the gradient of `c/2 · ‖θ‖²`.
    pub fn add_scaled_params(&mut self, net: &DenseNet, c: f64) {
        for (g, l) in self.layers.iter_mut().zip(&net.layers) {
            g.weight.scaled_add(c, &l.weight);
            g.bias.scaled_add(c, &l.bias);
            if let (Some((ga, gb)), Some(bn)) = (g.bn.as_mut(), l.batch_norm.as_ref()) {
                ga.scaled_add(c, &bn.gamma);
                gb.scaled_add(c, &bn.beta);
            }
        }
    }

    /// Error if any component is non-finite, naming the offending block.
    pub fn check_finite(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            let bad = |name: &str| {
                Err(Error::Divergence {
                    epoch: 0,
                    detail: format!("non-finite gradient in layer {i} {name}"),
                })
            };
            if !l.weight.iter().all(|v| v.is_finite()) {
                return bad("weights");
            }
            if !l.bias.iter().all(|v| v.is_finite()) {
                return bad("biases");
            }
            if let Some((g, b)) = &l.bn {
                if !g.iter().all(|v| v.is_finite()) || !b.iter().all(|v| v.is_finite()) {
                    return bad("batch-norm scale/shift");
                }
            }
        }
        Ok(())
    }
}

impl DenseNet {
    /// Build a network with the given layer widths: `dims = [in, h1, ..., out]`.
    ///
    /// Hidden layers use `hidden` activation, the last layer `output`. When
    /// `batch_norm` is set every affine layer is fed through batch
    /// normalization first (the model stack used throughout the toolkit).
    ///
    /// Weights are drawn uniform in ±sqrt(6/(fan_in+fan_out)), biases zero.
    pub fn new(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        batch_norm: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::argument("a network needs at least one layer"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::argument("layer widths must be positive"));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut w = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_in * fan_out {
                w.push(rand::Rng::random_range(rng, -bound..bound));
            }
            layers.push(Layer {
                weight: Array2::from_shape_vec((fan_in, fan_out), w)
                    .expect("shape matches element count"),
                bias: Array1::zeros(fan_out),
                activation: if i + 2 == dims.len() { output } else { hidden },
                batch_norm: batch_norm.then(|| BatchNorm::new(fan_in)),
            });
        }
        Ok(DenseNet {
            layers,
            input_dim: dims[0],
            output_dim: *dims.last().expect("nonempty dims"),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::Shape {
                expected: format!("batch with {} columns", self.input_dim),
                actual: format!("{} columns", x.ncols()),
            });
        }
        Ok(())
    }

    /// Eval-mode forward pass: batch norm uses running statistics.
    pub fn forward_eval(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            if let Some(bn) = &layer.batch_norm {
                for mut row in h.rows_mut() {
                    for j in 0..row.len() {
                        let inv = 1.0 / (bn.running_var[j] + bn.epsilon).sqrt();
                        row[j] = bn.gamma[j] * (row[j] - bn.running_mean[j]) * inv + bn.beta[j];
                    }
                }
            }
            let mut a = h.dot(&layer.weight);
            a += &layer.bias;
            h = a.mapv(|z| layer.activation.apply(z));
        }
        Ok(h)
    }

    /// Train-mode forward pass: batch norm uses the batch's own statistics.
    ///
    /// Pure — running statistics are only updated when the caller passes the
    /// returned trace to [`DenseNet::absorb_batch_stats`].
    pub fn forward_train(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Trace)> {
        self.check_input(x)?;
        if x.nrows() == 0 {
            return Err(Error::argument("empty batch"));
        }
        let n = x.nrows();
        let mut h = x.clone();
        let mut traces = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = h.clone();
            let (bn_cache, affine_in) = match &layer.batch_norm {
                Some(bn) => {
                    let mean = input.mean_axis(Axis(0)).expect("nonempty batch");
                    // Population variance; matches the normalization used in
                    // the backward pass.
                    let mut var = Array1::<f64>::zeros(input.ncols());
                    for row in input.rows() {
                        for j in 0..row.len() {
                            let d = row[j] - mean[j];
                            var[j] += d * d;
                        }
                    }
                    var.mapv_inplace(|v| v / n as f64);
                    let mut zhat = input.clone();
                    for mut row in zhat.rows_mut() {
                        for j in 0..row.len() {
                            row[j] = (row[j] - mean[j]) / (var[j] + bn.epsilon).sqrt();
                        }
                    }
                    let mut out = zhat.clone();
                    for mut row in out.rows_mut() {
                        for j in 0..row.len() {
                            row[j] = bn.gamma[j] * row[j] + bn.beta[j];
                        }
                    }
                    (Some((mean, var, zhat)), out)
                }
                None => (None, input.clone()),
            };
            let mut a = affine_in.dot(&layer.weight);
            a += &layer.bias;
            h = a.mapv(|z| layer.activation.apply(z));
            traces.push(LayerTrace { input, bn: bn_cache, affine_in, pre_act: a });
        }
        Ok((h, Trace { layers: traces, batch: n }))
    }

    /// Fold a trace's batch statistics into the running estimates:
    /// `running = momentum·running + (1−momentum)·batch`. The running
    /// variance uses the unbiased batch variance when the batch has more than
    /// one row.
    pub fn absorb_batch_stats(&mut self, trace: &Trace) {
        let n = trace.batch as f64;
        for (layer, lt) in self.layers.iter_mut().zip(&trace.layers) {
            if let (Some(bn), Some((mean, var, _))) = (layer.batch_norm.as_mut(), lt.bn.as_ref()) {
                let m = bn.momentum;
                let correction = if trace.batch > 1 { n / (n - 1.0) } else { 1.0 };
                for j in 0..bn.running_mean.len() {
                    bn.running_mean[j] = m * bn.running_mean[j] + (1.0 - m) * mean[j];
                    bn.running_var[j] = m * bn.running_var[j] + (1.0 - m) * var[j] * correction;
                }
            }
        }
    }

    /// Reverse-mode gradients for the traced forward pass.
    ///
    /// `grad_out` is dL/d(output), shaped like the forward output. Returns
    /// parameter gradients and dL/d(input) (needed when networks are
    /// composed). Differentiates through the batch statistics.
    pub fn backward(&self, trace: &Trace, grad_out: &Array2<f64>) -> (Grads, Array2<f64>) {
        assert_eq!(trace.layers.len(), self.layers.len(), "trace does not match network");
        let n = trace.batch as f64;
        let mut g = grad_out.clone();
        let mut grads = Grads::zeros_like(self);
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let lt = &trace.layers[idx];
            // Through the activation.
            let mut gz = g;
            for (mut grow, arow) in gz.rows_mut().into_iter().zip(lt.pre_act.rows()) {
                for j in 0..grow.len() {
                    grow[j] *= layer.activation.grad(arow[j]);
                }
            }
            // Through the affine transform.
            grads.layers[idx].weight = lt.affine_in.t().dot(&gz);
            grads.layers[idx].bias = gz.sum_axis(Axis(0));
            let gh = gz.dot(&layer.weight.t());
            // Through batch norm (including the batch statistics).
            g = match (&layer.batch_norm, &lt.bn) {
                (Some(bn), Some((mean, var, zhat))) => {
                    let dim = gh.ncols();
                    let mut dgamma = Array1::<f64>::zeros(dim);
                    let mut dbeta = Array1::<f64>::zeros(dim);
                    for (grow, zrow) in gh.rows().into_iter().zip(zhat.rows()) {
                        for j in 0..dim {
                            dgamma[j] += grow[j] * zrow[j];
                            dbeta[j] += grow[j];
                        }
                    }
                    let inv_std: Array1<f64> =
                        var.mapv(|v| 1.0 / (v + bn.epsilon).sqrt());
                    // dzhat = gh * gamma.
                    // dvar = Σ_i dzhat_i (z_i − m) · (−½)(v+ε)^{−3/2}
                    // dmean = Σ_i dzhat_i · (−1/√(v+ε)) + dvar · (−2/n)Σ_i(z_i − m)
                    // dz_i = dzhat_i/√(v+ε) + dvar·2(z_i − m)/n + dmean/n
                    let mut dvar = Array1::<f64>::zeros(dim);
                    let mut dmean = Array1::<f64>::zeros(dim);
                    let mut centered_sum = Array1::<f64>::zeros(dim);
                    for (grow, zrow) in gh.rows().into_iter().zip(lt.input.rows()) {
                        for j in 0..dim {
                            let dzhat = grow[j] * bn.gamma[j];
                            let centered = zrow[j] - mean[j];
                            dvar[j] += dzhat * centered;
                            dmean[j] -= dzhat * inv_std[j];
                            centered_sum[j] += centered;
                        }
                    }
                    for j in 0..dim {
                        dvar[j] *= -0.5 * inv_std[j].powi(3);
                        dmean[j] += dvar[j] * (-2.0 / n) * centered_sum[j];
                    }
                    let mut dz = Array2::<f64>::zeros(gh.raw_dim());
                    for ((mut drow, grow), zrow) in
                        dz.rows_mut().into_iter().zip(gh.rows()).zip(lt.input.rows())
                    {
                        for j in 0..dim {
                            let dzhat = grow[j] * bn.gamma[j];
                            drow[j] = dzhat * inv_std[j]
                                + dvar[j] * 2.0 * (zrow[j] - mean[j]) / n
                                + dmean[j] / n;
                        }
                    }
                    grads.layers[idx].bn = Some((dgamma, dbeta));
                    dz
                }
                _ => gh,
            };
        }
        (grads, g)
    }

    /// Number of trainable scalars (weights, biases, batch-norm scale/shift).
    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weight.len()
                    + l.bias.len()
                    + l.batch_norm.as_ref().map_or(0, |bn| bn.gamma.len() + bn.beta.len())
            })
            .sum()
    }

    /// Flatten all trainable parameters in canonical order (per layer:
    /// weights row-major, biases, then batch-norm gamma and beta).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
            if let Some(bn) = &l.batch_norm {
                out.extend(bn.gamma.iter());
                out.extend(bn.beta.iter());
            }
        }
        out
    }

    /// Write back a flat parameter vector in canonical order.
    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter length mismatch");
        let mut it = flat.iter();
        for l in &mut self.layers {
            for v in l.weight.iter_mut() {
                *v = *it.next().expect("length checked");
            }
            for v in l.bias.iter_mut() {
                *v = *it.next().expect("length checked");
            }
            if let Some(bn) = &mut l.batch_norm {
                for v in bn.gamma.iter_mut() {
                    *v = *it.next().expect("length checked");
                }
                for v in bn.beta.iter_mut() {
                    *v = *it.next().expect("length checked");
                }
            }
        }
    }

    /// Flatten gradients in the same canonical order as [`params_flat`].
    ///
    /// [`params_flat`]: DenseNet::params_flat
    pub fn grads_flat(&self, grads: &Grads) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (l, g) in self.layers.iter().zip(&grads.layers) {
            out.extend(g.weight.iter());
            out.extend(g.bias.iter());
            if l.batch_norm.is_some() {
                let (dg, db) = g.bn.as_ref().expect("bn grads present for bn layer");
                out.extend(dg.iter());
                out.extend(db.iter());
            }
        }
        out
    }

    /// Sum of squared weights and biases (batch-norm parameters excluded);
    /// the L2 penalty term.
    /// Squared L2 norm of every trainable parameter: weights, biases, and
    /// batch-norm scale/shift. Batch-norm parameters count because a scale
    /// left out of the norm lets a layer grow its output through γ while its
    /// regularized weights stay small.
    pub fn l2_params(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weight.iter().map(|v| v * v).sum::<f64>()
                    + l.bias.iter().map(|v| v * v).sum::<f64>()
                    + l.batch_norm.as_ref().map_or(0.0, |bn| {
                        bn.gamma.iter().map(|v| v * v).sum::<f64>()
                            + bn.beta.iter().map(|v| v * v).sum::<f64>()
                    })
            })
            .sum()
    }

    /// Zero the output layer's weights and biases, making the network
    /// compute the constant zero function while keeping hidden layers (and
    /// their gradients) alive. Used to start correction networks at "no
    /// correction".
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.len() - 1;
        self.layers[last].weight.fill(0.0);
        self.layers[last].bias.fill(0.0);
    }

    /// Set every trainable parameter to zero (batch-norm scale included),
    /// making the network compute the constant zero function.
    pub fn zero_params(&mut self) {
        for l in &mut self.layers {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
            if let Some(bn) = &mut l.batch_norm {
                bn.gamma.fill(0.0);
                bn.beta.fill(0.0);
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weight.iter().all(|v| v.is_finite())
                && l.bias.iter().all(|v| v.is_finite())
                && l.batch_norm.as_ref().is_none_or(|bn| {
                    bn.gamma.iter().all(|v| v.is_finite())
                        && bn.beta.iter().all(|v| v.is_finite())
                })
        })
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    /// Canonical Adam defaults apart from the caller-supplied learning rate.
    pub fn new(net: &DenseNet, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; net.n_params()],
            v: vec![0.0; net.n_params()],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `net` from `grads`.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Grads) -> Result<()> {
        grads.check_finite()?;
        let g = net.grads_flat(grads);
        assert_eq!(g.len(), self.m.len(), "optimizer state does not match network");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut p = net.params_flat();
        for i in 0..g.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            p[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
        }
        net.set_params_flat(&p);
        Ok(())
    }
}
