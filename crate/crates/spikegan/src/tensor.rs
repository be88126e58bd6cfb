//! Minimal dense-array math and hand-written forward/backward layers.
//!
//! This is all the "deep learning" the discriminators and the TSTR/TRTS
//! classifiers need: dense and 1-D convolutional layers with a handful of
//! activations, a gradient tape for one forward pass, manual backprop, the
//! GAN loss pair, and plain SGD. No autodiff graph, no batching inside a
//! layer; batches are loops over samples.

use rand::Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Column vector from a slice.
    pub fn column(data: &[f64]) -> Self {
        Matrix { rows: data.len(), cols: 1, data: data.to_vec() }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Pointwise nonlinearity applied after each layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation value.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One layer of the network.
///
/// Dense consumes a column vector (`in_dim x 1`) and emits `out_dim x 1`.
/// Conv1d consumes `in_channels x L` and emits `out_channels x L'` with
/// `L' = (L - kernel) / stride + 1`. Flatten turns `ch x w` into a column
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense {
        in_dim: usize,
        out_dim: usize,
        /// out_dim x in_dim
        weights: Matrix,
        bias: Vec<f64>,
        activation: Activation,
    },
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        /// flat, indexed [out_ch][in_ch][k]
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    },
    Flatten,
}

impl Layer {
    pub fn dense(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Matrix {
            rows: out_dim,
            cols: in_dim,
            data: (0..out_dim * in_dim).map(|_| rng.gen_range(-limit..limit)).collect(),
        };
        Layer::Dense { in_dim, out_dim, weights, bias: vec![0.0; out_dim], activation }
    }

    pub fn conv1d(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_channels * kernel;
        let fan_out = out_channels * kernel;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = out_channels * in_channels * kernel;
        Layer::Conv1d {
            in_channels,
            out_channels,
            kernel,
            stride,
            weights: (0..n).map(|_| rng.gen_range(-limit..limit)).collect(),
            bias: vec![0.0; out_channels],
            activation,
        }
    }

    fn n_params(&self) -> usize {
        match self {
            Layer::Dense { weights, bias, .. } => weights.data.len() + bias.len(),
            Layer::Conv1d { weights, bias, .. } => weights.len() + bias.len(),
            Layer::Flatten => 0,
        }
    }
}

/// Full parameter set of a feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnParams {
    pub layers: Vec<Layer>,
}

impl AnnParams {
    pub fn new(layers: Vec<Layer>) -> Self {
        AnnParams { layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    /// Flat view of every trainable scalar, layer by layer, weights then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            match layer {
                Layer::Dense { weights, bias, .. } => {
                    out.extend_from_slice(&weights.data);
                    out.extend_from_slice(bias);
                }
                Layer::Conv1d { weights, bias, .. } => {
                    out.extend_from_slice(weights);
                    out.extend_from_slice(bias);
                }
                Layer::Flatten => {}
            }
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Usage(format!(
                "flat parameter vector length {} != {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut i = 0;
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { weights, bias, .. } => {
                    let wn = weights.data.len();
                    weights.data.copy_from_slice(&flat[i..i + wn]);
                    i += wn;
                    let bn = bias.len();
                    bias.copy_from_slice(&flat[i..i + bn]);
                    i += bn;
                }
                Layer::Conv1d { weights, bias, .. } => {
                    let wn = weights.len();
                    weights.copy_from_slice(&flat[i..i + wn]);
                    i += wn;
                    let bn = bias.len();
                    bias.copy_from_slice(&flat[i..i + bn]);
                    i += bn;
                }
                Layer::Flatten => {}
            }
        }
        Ok(())
    }
}

/// Gradients with the same layer structure as [`AnnParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnGrads {
    /// per layer: (weight grads flat, bias grads); empty for Flatten
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AnnGrads {
    pub fn zeros_like(params: &AnnParams) -> Self {
        AnnGrads {
            layers: params
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Dense { weights, bias, .. } => {
                        (vec![0.0; weights.data.len()], vec![0.0; bias.len()])
                    }
                    Layer::Conv1d { weights, bias, .. } => {
                        (vec![0.0; weights.len()], vec![0.0; bias.len()])
                    }
                    Layer::Flatten => (Vec::new(), Vec::new()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &AnnGrads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (a, x) in w.iter_mut().zip(ow) {
                *a += x;
            }
            for (a, x) in b.iter_mut().zip(ob) {
                *a += x;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            for a in w.iter_mut() {
                *a *= s;
            }
            for a in b.iter_mut() {
                *a *= s;
            }
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite()))
    }
}

/// Cached inputs and pre-activations from one forward pass.
#[derive(Debug)]
pub struct GradientTape {
    caches: Vec<LayerCache>,
    consumed: bool,
}

#[derive(Debug)]
struct LayerCache {
    input: Matrix,
    preact: Matrix,
}

pub fn conv1d_out_len(input_len: usize, kernel: usize, stride: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 || kernel > input_len {
        return Err(Error::Config(format!(
            "conv1d kernel {} / stride {} invalid for input length {}",
            kernel, stride, input_len
        )));
    }
    Ok((input_len - kernel) / stride + 1)
}

/// One forward pass, caching what backward() needs.
pub fn forward(params: &AnnParams, input: &Matrix) -> Result<(Matrix, GradientTape)> {
    let mut caches = Vec::with_capacity(params.layers.len());
    let mut x = input.clone();
    for layer in &params.layers {
        match layer {
            Layer::Dense { in_dim, out_dim, weights, bias, activation } => {
                if x.rows != *in_dim || x.cols != 1 {
                    return Err(Error::Config(format!(
                        "dense layer expects {}x1 input, got {}x{}",
                        in_dim, x.rows, x.cols
                    )));
                }
                let mut pre = Matrix::zeros(*out_dim, 1);
                for o in 0..*out_dim {
                    let mut acc = bias[o];
                    let wrow = &weights.data[o * in_dim..(o + 1) * in_dim];
                    for (wi, xi) in wrow.iter().zip(&x.data) {
                        acc += wi * xi;
                    }
                    pre.data[o] = acc;
                }
                let out = Matrix {
                    rows: *out_dim,
                    cols: 1,
                    data: pre.data.iter().map(|&v| activation.apply(v)).collect(),
                };
                caches.push(LayerCache { input: x, preact: pre });
                x = out;
            }
            Layer::Conv1d { in_channels, out_channels, kernel, stride, weights, bias, activation } => {
                if x.rows != *in_channels {
                    return Err(Error::Config(format!(
                        "conv1d expects {} input channels, got {}",
                        in_channels, x.rows
                    )));
                }
                let out_len = conv1d_out_len(x.cols, *kernel, *stride)?;
                let mut pre = Matrix::zeros(*out_channels, out_len);
                for oc in 0..*out_channels {
                    for t in 0..out_len {
                        let start = t * stride;
                        let mut acc = bias[oc];
                        for ic in 0..*in_channels {
                            let wbase = (oc * in_channels + ic) * kernel;
                            for k in 0..*kernel {
                                acc += weights[wbase + k] * x.get(ic, start + k);
                            }
                        }
                        pre.set(oc, t, acc);
                    }
                }
                let out = Matrix {
                    rows: *out_channels,
                    cols: out_len,
                    data: pre.data.iter().map(|&v| activation.apply(v)).collect(),
                };
                caches.push(LayerCache { input: x, preact: pre });
                x = out;
            }
            Layer::Flatten => {
                let flat = Matrix { rows: x.rows * x.cols, cols: 1, data: x.data.clone() };
                caches.push(LayerCache { input: x, preact: Matrix::zeros(0, 0) });
                x = flat;
            }
        }
    }
    if !x.is_finite() {
        return Err(Error::Numeric("non-finite forward output".into()));
    }
    Ok((x, GradientTape { caches, consumed: false }))
}

/// Backprop through one recorded forward pass.
pub fn backward(
    params: &AnnParams,
    tape: &mut GradientTape,
    output_grad: &Matrix,
) -> Result<AnnGrads> {
    if tape.consumed {
        return Err(Error::Usage("gradient tape already consumed".into()));
    }
    if tape.caches.len() != params.layers.len() {
        return Err(Error::Usage("tape does not match network".into()));
    }
    tape.consumed = true;

    let mut grads = AnnGrads::zeros_like(params);
    let mut up = output_grad.clone();
    for (idx, layer) in params.layers.iter().enumerate().rev() {
        let cache = &tape.caches[idx];
        match layer {
            Layer::Dense { in_dim, out_dim, weights, activation, .. } => {
                // delta = up ⊙ act'(pre)
                let mut delta = vec![0.0; *out_dim];
                for o in 0..*out_dim {
                    delta[o] = up.data[o] * activation.deriv(cache.preact.data[o]);
                }
                let (gw, gb) = &mut grads.layers[idx];
                let mut down = Matrix::zeros(*in_dim, 1);
                for o in 0..*out_dim {
                    gb[o] += delta[o];
                    for i in 0..*in_dim {
                        gw[o * in_dim + i] += delta[o] * cache.input.data[i];
                        down.data[i] += delta[o] * weights.data[o * in_dim + i];
                    }
                }
                up = down;
            }
            Layer::Conv1d { in_channels, out_channels, kernel, stride, weights, activation, .. } => {
                let out_len = cache.preact.cols;
                let (gw, gb) = &mut grads.layers[idx];
                let mut down = Matrix::zeros(cache.input.rows, cache.input.cols);
                for oc in 0..*out_channels {
                    for t in 0..out_len {
                        let delta = up.get(oc, t) * activation.deriv(cache.preact.get(oc, t));
                        if delta == 0.0 {
                            continue;
                        }
                        gb[oc] += delta;
                        let start = t * stride;
                        for ic in 0..*in_channels {
                            let wbase = (oc * in_channels + ic) * kernel;
                            for k in 0..*kernel {
                                gw[wbase + k] += delta * cache.input.get(ic, start + k);
                                let v = down.get(ic, start + k)
                                    + delta * weights[wbase + k];
                                down.set(ic, start + k, v);
                            }
                        }
                    }
                }
                up = down;
            }
            Layer::Flatten => {
                up = Matrix { rows: cache.input.rows, cols: cache.input.cols, data: up.data };
            }
        }
    }
    Ok(grads)
}

/// Generator loss flavour for the minimax game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanMode {
    Saturating,
    NonSaturating,
}

pub const PROB_EPS: f64 = 1e-7;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Discriminator and generator losses for one (real, synthetic) probability pair.
pub fn gan_losses(d_real: f64, d_synth: f64, mode: GanMode) -> (f64, f64) {
    let dr = clamp_prob(d_real);
    let ds = clamp_prob(d_synth);
    let disc_loss = -(dr.ln() + (1.0 - ds).ln());
    let gen_loss = match mode {
        GanMode::Saturating => (1.0 - ds).ln(),
        GanMode::NonSaturating => -ds.ln(),
    };
    (disc_loss, gen_loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepDirection {
    Ascent,
    Descent,
}

/// One plain SGD step over every parameter.
pub fn sgd_step(
    params: &mut AnnParams,
    grads: &AnnGrads,
    learning_rate: f64,
    direction: StepDirection,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient in sgd_step".into()));
    }
    let sign = match direction {
        StepDirection::Ascent => 1.0,
        StepDirection::Descent => -1.0,
    };
    for (layer, (gw, gb)) in params.layers.iter_mut().zip(&grads.layers) {
        match layer {
            Layer::Dense { weights, bias, .. } => {
                for (w, g) in weights.data.iter_mut().zip(gw) {
                    *w += sign * learning_rate * g;
                }
                for (b, g) in bias.iter_mut().zip(gb) {
                    *b += sign * learning_rate * g;
                }
            }
            Layer::Conv1d { weights, bias, .. } => {
                for (w, g) in weights.iter_mut().zip(gw) {
                    *w += sign * learning_rate * g;
                }
                for (b, g) in bias.iter_mut().zip(gb) {
                    *b += sign * learning_rate * g;
                }
            }
            Layer::Flatten => {}
        }
    }
    Ok(())
}
