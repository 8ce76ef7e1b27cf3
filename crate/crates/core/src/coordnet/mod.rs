//! One-hidden-layer feed-forward network that maps the wind farm output, the
//! synchronous machine speeds and the running frequency error to the
//! governor coordination offset.

mod dataset;
mod train;


pub use dataset::{generate_dataset, Dataset, DatasetError};
pub use train::{split_dataset, split_indices, train, TrainConfig, TrainError, TrainReport};

use crate::sim::CoordinationPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected} values for {what}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("zero target variance")]
    ZeroVariance,
    #[error("unsupported activation `{0}`")]
    Activation(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("weights file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("weights file: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-feature min/max normalization onto [-1, 1].
///
/// An input feature with zero range is only centered. A target with zero
/// range maps to 0 and unscales to the constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn identity(n: usize) -> Self {
        Self { min: vec![-1.0; n], max: vec![1.0; n] }
    }

    /// Fits the column ranges of a row-major `rows x n` block.
    pub fn fit(data: &[f64], n: usize) -> Self {
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for row in data.chunks_exact(n) {
            for j in 0..n {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        if data.is_empty() {
            return Self::identity(n);
        }
        Self { min, max }
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    fn mid_half(&self, j: usize) -> (f64, f64) {
        (0.5 * (self.min[j] + self.max[j]), 0.5 * (self.max[j] - self.min[j]))
    }

    pub fn scale_input(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..x.len() {
            let (mid, half) = self.mid_half(j);
            out[j] = if half > 0.0 { (x[j] - mid) / half } else { x[j] - mid };
        }
    }

    pub fn scale_target(&self, y: &[f64], out: &mut [f64]) {
        for j in 0..y.len() {
            let (mid, half) = self.mid_half(j);
            out[j] = if half > 0.0 { (y[j] - mid) / half } else { 0.0 };
        }
    }

    pub fn unscale_target(&self, o: &[f64], out: &mut [f64]) {
        for j in 0..o.len() {
            let (mid, half) = self.mid_half(j);
            out[j] = mid + half * o[j];
        }
    }
}

/// `tanh` hidden layer, linear output. Weights are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    /// `n_hidden x n_in`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `n_out x n_hidden`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub input_scaler: Scaler,
    pub target_scaler: Scaler,
}

/// Gradient of the batch cost, laid out like the [`Mlp`] weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros(m: &Mlp) -> Self {
        Self {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }
}

impl Mlp {
    /// Zero weights and identity scalers.
    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_hidden,
            n_out,
            w1: vec![0.0; n_hidden * n_in],
            b1: vec![0.0; n_hidden],
            w2: vec![0.0; n_out * n_hidden],
            b2: vec![0.0; n_out],
            input_scaler: Scaler::identity(n_in),
            target_scaler: Scaler::identity(n_out),
        }
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn new(n_in: usize, n_hidden: usize, n_out: usize, seed: u64) -> Self {
        let mut m = Self::zeros(n_in, n_hidden, n_out);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = 1.0 / (n_in as f64).sqrt();
        let a2 = 1.0 / (n_hidden as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.gen_range(-a1..a1));
        m.w2.iter_mut().for_each(|w| *w = rng.gen_range(-a2..a2));
        m
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let checks = [
            ("W1", self.n_hidden * self.n_in, self.w1.len()),
            ("b1", self.n_hidden, self.b1.len()),
            ("W2", self.n_out * self.n_hidden, self.w2.len()),
            ("b2", self.n_out, self.b2.len()),
            ("input scaler min", self.n_in, self.input_scaler.min.len()),
            ("input scaler max", self.n_in, self.input_scaler.max.len()),
            ("target scaler min", self.n_out, self.target_scaler.min.len()),
            ("target scaler max", self.n_out, self.target_scaler.max.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(NetError::Dimension { what, expected, got });
            }
        }
        let all = self
            .w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .chain(&self.input_scaler.min)
            .chain(&self.input_scaler.max)
            .chain(&self.target_scaler.min)
            .chain(&self.target_scaler.max);
        for v in all {
            if !v.is_finite() {
                return Err(NetError::NonFinite("weights"));
            }
        }
        Ok(())
    }

    /// Forward pass on already scaled inputs. `h` receives the hidden
    /// activations, `o` the scaled outputs.
    pub(crate) fn forward_scaled(&self, s: &[f64], h: &mut [f64], o: &mut [f64]) {
        for k in 0..self.n_hidden {
            let row = &self.w1[k * self.n_in..(k + 1) * self.n_in];
            let a = row.iter().zip(s).fold(self.b1[k], |acc, (w, x)| acc + w * x);
            h[k] = a.tanh();
        }
        for m in 0..self.n_out {
            let row = &self.w2[m * self.n_hidden..(m + 1) * self.n_hidden];
            o[m] = row.iter().zip(h.iter()).fold(self.b2[m], |acc, (w, x)| acc + w * x);
        }
    }

    /// Adds the gradient of `|o - t|^2` for one scaled sample, times `weight`.
    pub(crate) fn accumulate(&self, s: &[f64], t: &[f64], weight: f64, g: &mut Gradients, h: &mut [f64], o: &mut [f64]) {
        self.forward_scaled(s, h, o);
        for m in 0..self.n_out {
            let d = 2.0 * weight * (o[m] - t[m]);
            g.b2[m] += d;
            for k in 0..self.n_hidden {
                g.w2[m * self.n_hidden + k] += d * h[k];
            }
        }
        for k in 0..self.n_hidden {
            let mut back = 0.0;
            for m in 0..self.n_out {
                back += 2.0 * weight * (o[m] - t[m]) * self.w2[m * self.n_hidden + k];
            }
            let da = back * (1.0 - h[k] * h[k]);
            g.b1[k] += da;
            for j in 0..self.n_in {
                g.w1[k * self.n_in + j] += da * s[j];
            }
        }
    }

    pub(crate) fn step(&mut self, g: &Gradients, lr: f64) {
        let upd = |w: &mut [f64], d: &[f64]| w.iter_mut().zip(d).for_each(|(w, d)| *w -= lr * d);
        upd(&mut self.w1, &g.w1);
        upd(&mut self.b1, &g.b1);
        upd(&mut self.w2, &g.w2);
        upd(&mut self.b2, &g.b2);
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NetError> {
        if x.len() != self.n_in {
            return Err(NetError::Dimension { what: "input", expected: self.n_in, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFinite("input"));
        }
        Ok(())
    }

    fn check_data(&self, data: &Dataset) -> Result<(), NetError> {
        if data.n_in() != self.n_in {
            return Err(NetError::Dimension { what: "dataset inputs", expected: self.n_in, got: data.n_in() });
        }
        if data.n_out() != self.n_out {
            return Err(NetError::Dimension { what: "dataset targets", expected: self.n_out, got: data.n_out() });
        }
        Ok(())
    }
}

/// `y = unscale(W2 tanh(W1 scale(x) + b1) + b2)`
pub fn mlp_forward(mlp: &Mlp, x: &[f64]) -> Result<Vec<f64>, NetError> {
    mlp.check_input(x)?;
    let mut s = vec![0.0; mlp.n_in];
    let mut h = vec![0.0; mlp.n_hidden];
    let mut o = vec![0.0; mlp.n_out];
    mlp.input_scaler.scale_input(x, &mut s);
    mlp.forward_scaled(&s, &mut h, &mut o);
    let mut y = vec![0.0; mlp.n_out];
    mlp.target_scaler.unscale_target(&o, &mut y);
    Ok(y)
}

/// Mean over samples of the squared error norm. Both slices hold `k` rows
/// of `n_out` values.
pub fn mse_cost(preds: &[f64], targets: &[f64], n_out: usize) -> Result<f64, NetError> {
    if preds.len() != targets.len() {
        return Err(NetError::Dimension { what: "predictions", expected: targets.len(), got: preds.len() });
    }
    if n_out == 0 || targets.is_empty() || targets.len() % n_out != 0 {
        return Err(NetError::EmptyBatch);
    }
    let k = targets.len() / n_out;
    let sum: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / k as f64)
}

/// `sqrt(1 - MSE(preds) / MSE(mean))`, radicand clamped at 0.
pub fn regression_r(preds: &[f64], targets: &[f64]) -> Result<f64, NetError> {
    if preds.len() != targets.len() {
        return Err(NetError::Dimension { what: "predictions", expected: targets.len(), got: preds.len() });
    }
    if targets.len() < 2 {
        return Err(NetError::EmptyBatch);
    }
    let k = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / k;
    let mse_mean = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / k;
    if mse_mean == 0.0 {
        return Err(NetError::ZeroVariance);
    }
    let mse = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / k;
    Ok((1.0 - mse / mse_mean).max(0.0).sqrt())
}

/// Predictions for the given rows, flattened row-major.
pub fn predict(mlp: &Mlp, data: &Dataset, rows: &[usize]) -> Result<Vec<f64>, NetError> {
    mlp.check_data(data)?;
    let mut out = Vec::with_capacity(rows.len() * mlp.n_out);
    for &r in rows {
        out.extend(mlp_forward(mlp, data.input(r))?);
    }
    Ok(out)
}

/// Cost minimized by training: mean squared error of the batch measured in
/// scaled target units.
pub fn batch_cost(mlp: &Mlp, data: &Dataset, rows: &[usize]) -> Result<f64, NetError> {
    mlp.check_data(data)?;
    if rows.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let mut s = vec![0.0; mlp.n_in];
    let mut t = vec![0.0; mlp.n_out];
    let mut h = vec![0.0; mlp.n_hidden];
    let mut o = vec![0.0; mlp.n_out];
    let mut sum = 0.0;
    for &r in rows {
        mlp.input_scaler.scale_input(data.input(r), &mut s);
        mlp.target_scaler.scale_target(data.target(r), &mut t);
        mlp.forward_scaled(&s, &mut h, &mut o);
        sum += o.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(sum / rows.len() as f64)
}

/// Analytic gradient of [`batch_cost`] with respect to every weight and bias.
pub fn backprop_gradients(mlp: &Mlp, data: &Dataset, rows: &[usize]) -> Result<Gradients, NetError> {
    mlp.check_data(data)?;
    if rows.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let mut g = Gradients::zeros(mlp);
    let mut s = vec![0.0; mlp.n_in];
    let mut t = vec![0.0; mlp.n_out];
    let mut h = vec![0.0; mlp.n_hidden];
    let mut o = vec![0.0; mlp.n_out];
    let w = 1.0 / rows.len() as f64;
    for &r in rows {
        mlp.input_scaler.scale_input(data.input(r), &mut s);
        mlp.target_scaler.scale_target(data.target(r), &mut t);
        mlp.accumulate(&s, &t, w, &mut g, &mut h, &mut o);
    }
    Ok(g)
}

impl CoordinationPolicy for Mlp {
    fn evaluate(&self, inputs: &[f64]) -> f64 {
        let mut s = [0.0; 16];
        let mut h = vec![0.0; self.n_hidden];
        let mut o = [0.0; 1];
        if inputs.len() != self.n_in || self.n_out != 1 || self.n_in > s.len() {
            return f64::NAN;
        }
        self.input_scaler.scale_input(inputs, &mut s[..self.n_in]);
        self.forward_scaled(&s[..self.n_in], &mut h, &mut o);
        let mut y = [0.0];
        self.target_scaler.unscale_target(&o, &mut y);
        y[0]
    }
}

#[derive(Serialize, Deserialize)]
struct ScalerPair {
    input: Scaler,
    target: Scaler,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct WeightsFile {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    activation: String,
    scalers: ScalerPair,
    W1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    W2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

fn rows_of(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    if width == 0 {
        return Vec::new();
    }
    flat.chunks(width).map(<[f64]>::to_vec).collect()
}

fn flatten(what: &'static str, rows: Vec<Vec<f64>>, n_rows: usize, width: usize) -> Result<Vec<f64>, NetError> {
    if rows.len() != n_rows {
        return Err(NetError::Dimension { what, expected: n_rows, got: rows.len() });
    }
    let mut out = Vec::with_capacity(n_rows * width);
    for r in rows {
        if r.len() != width {
            return Err(NetError::Dimension { what, expected: width, got: r.len() });
        }
        out.extend(r);
    }
    Ok(out)
}

impl Mlp {
    pub fn to_json(&self) -> Result<String, NetError> {
        let file = WeightsFile {
            n_in: self.n_in,
            n_hidden: self.n_hidden,
            n_out: self.n_out,
            activation: "tanh".into(),
            scalers: ScalerPair { input: self.input_scaler.clone(), target: self.target_scaler.clone() },
            W1: rows_of(&self.w1, self.n_in),
            b1: self.b1.clone(),
            W2: rows_of(&self.w2, self.n_hidden),
            b2: self.b2.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let f: WeightsFile = serde_json::from_str(text)?;
        if f.activation != "tanh" {
            return Err(NetError::Activation(f.activation));
        }
        let m = Self {
            n_in: f.n_in,
            n_hidden: f.n_hidden,
            n_out: f.n_out,
            w1: flatten("W1", f.W1, f.n_hidden, f.n_in)?,
            b1: f.b1,
            w2: flatten("W2", f.W2, f.n_out, f.n_hidden)?,
            b2: f.b2,
            input_scaler: f.scalers.input,
            target_scaler: f.scalers.target,
        };
        m.validate()?;
        Ok(m)
    }
}

pub fn save_weights(mlp: &Mlp, path: &Path) -> Result<(), NetError> {
    std::fs::write(path, mlp.to_json()?)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<Mlp, NetError> {
    Mlp::from_json(&std::fs::read_to_string(path)?)
}
