//! Feature-space binary classifier.
//!
//! Architecture: `d → h1 (ReLU) → dropout → h2 (ReLU) → 1 (sigmoid)`, trained
//! on mean binary cross-entropy with Adam. MixUp mixes each mini-batch with a
//! shuffled copy of itself when `mixup_alpha > 0`.
//!
//! Dropout is inverted: kept units are scaled by `1 / (1 − rate)` at training
//! time so evaluation needs no correction.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabeledDataset};
use crate::seed::{self, BoxMuller};
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 − PROB_EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-7;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_sizes: [usize; 2],
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// 0 disables MixUp.
    pub mixup_alpha: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_sizes: [256, 128],
            dropout_rate: 0.2,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 50,
            mixup_alpha: 0.2,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.hidden_sizes.contains(&0) {
            return bad("classifier.hidden_sizes must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!(
                "classifier.dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("classifier.learning_rate must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("classifier.batch_size must be at least 1".into());
        }
        if !(self.mixup_alpha >= 0.0 && self.mixup_alpha.is_finite()) {
            return bad("classifier.mixup_alpha must be non-negative".into());
        }
        Ok(())
    }
}

/// All weights and biases in one flat buffer.
///
/// Layer `l` maps `dims[l]` inputs to `dims[l + 1]` outputs. Its weights are
/// stored input-major (`w[i · out + j]`), followed by its biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    dims: [usize; 4],
    values: Vec<f64>,
}

impl Parameters {
    pub fn zeros(input_dim: usize, hidden: [usize; 2]) -> Self {
        let dims = [input_dim, hidden[0], hidden[1], 1];
        let len = (0..3).map(|l| dims[l] * dims[l + 1] + dims[l + 1]).sum();
        Parameters {
            dims,
            values: vec![0.0; len],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn offset(&self, layer: usize) -> usize {
        (0..layer)
            .map(|l| self.dims[l] * self.dims[l + 1] + self.dims[l + 1])
            .sum()
    }

    /// Weights of `layer` (0, 1 or 2), input-major.
    pub fn weights(&self, layer: usize) -> &[f64] {
        let o = self.offset(layer);
        &self.values[o..o + self.dims[layer] * self.dims[layer + 1]]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let o = self.offset(layer) + self.dims[layer] * self.dims[layer + 1];
        &self.values[o..o + self.dims[layer + 1]]
    }

    fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let o = self.offset(layer);
        let wlen = self.dims[layer] * self.dims[layer + 1];
        let (w, rest) = self.values[o..].split_at_mut(wlen);
        (w, &mut rest[..self.dims[layer + 1]])
    }
}

/// He initialization for the ReLU layers, `sqrt(1 / fan_in)` for the output
/// layer, zero biases.
pub fn init_params(input_dim: usize, config: &MlpConfig, seed: u64) -> Parameters {
    let mut p = Parameters::zeros(input_dim, config.hidden_sizes);
    let mut rng = seed::rng(seed);
    let mut normal = BoxMuller::new();
    let dims = p.dims;
    for (layer, &fan_in) in dims[..3].iter().enumerate() {
        let fan_in = fan_in as f64;
        let std = if layer < 2 { (2.0 / fan_in).sqrt() } else { (1.0 / fan_in).sqrt() };
        let (w, _) = p.layer_mut(layer);
        for v in w {
            *v = std * normal.sample(&mut rng);
        }
    }
    p
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy with `p` clamped to `[1e−7, 1 − 1e−7]`. Accepts
/// fractional targets.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Eval,
    Train { dropout_rate: f64 },
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 − rate)`.
pub fn sample_dropout_mask(width: usize, rate: f64, rng: &mut seed::Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..width)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

struct Trace {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    p: f64,
}

fn dense(p: &Parameters, layer: usize, input: &[f64]) -> Vec<f64> {
    let out = p.dims[layer + 1];
    let w = p.weights(layer);
    let mut z = p.bias(layer).to_vec();
    for (i, &xi) in input.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * out..(i + 1) * out];
        for (zj, wij) in z.iter_mut().zip(row) {
            *zj += xi * wij;
        }
    }
    z
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

/// `a1` holds the post-dropout activations.
fn trace(p: &Parameters, x: &[f64], mask: Option<&[f64]>) -> Trace {
    let z1 = dense(p, 0, x);
    let mut a1 = relu(&z1);
    if let Some(mask) = mask {
        for (a, m) in a1.iter_mut().zip(mask) {
            *a *= m;
        }
    }
    let z2 = dense(p, 1, &a1);
    let a2 = relu(&z2);
    let z3 = dense(p, 2, &a2);
    Trace {
        z1,
        a1,
        z2,
        a2,
        p: sigmoid(z3[0]),
    }
}

fn check_dim(p: &Parameters, x: &[f32]) -> Result<()> {
    if x.len() == p.input_dim() {
        Ok(())
    } else {
        Err(Error::Dimension {
            row: None,
            expected: p.input_dim(),
            actual: x.len(),
        })
    }
}

fn widen(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| f64::from(v)).collect()
}

/// Probability that `x` is positive. Train mode draws a dropout mask from `rng`;
/// eval mode ignores it.
pub fn forward(params: &Parameters, x: &[f32], mode: Mode, rng: &mut seed::Rng) -> Result<f64> {
    check_dim(params, x)?;
    let mask = match mode {
        Mode::Eval => None,
        Mode::Train { dropout_rate } => {
            Some(sample_dropout_mask(params.dims[1], dropout_rate, rng))
        }
    };
    Ok(trace(params, &widen(x), mask.as_deref()).p)
}

/// Deterministic forward pass with no dropout.
pub fn forward_eval(params: &Parameters, x: &[f32]) -> Result<f64> {
    check_dim(params, x)?;
    Ok(trace(params, &widen(x), None).p)
}

/// Mean BCE over a batch and its exact gradient with the given dropout masks
/// held fixed. The output-layer error term is `p − y`.
pub fn loss_and_gradients(
    params: &Parameters,
    inputs: &[Vec<f64>],
    targets: &[f64],
    masks: Option<&[Vec<f64>]>,
) -> (f64, Parameters) {
    assert_eq!(inputs.len(), targets.len());
    assert!(!inputs.is_empty(), "batch must be non-empty");
    let [d, h1, h2, _] = params.dims;
    let scale = 1.0 / inputs.len() as f64;
    let mut grad = Parameters::zeros(d, [h1, h2]);
    let mut loss = 0.0;

    for (s, (x, &y)) in inputs.iter().zip(targets).enumerate() {
        let mask = masks.map(|m| m[s].as_slice());
        let t = trace(params, x, mask);
        loss += bce_loss(t.p, y);

        let dz3 = (t.p - y) * scale;
        let da2: Vec<f64> = params.weights(2).iter().map(|w| w * dz3).collect();
        {
            let (gw, gb) = grad.layer_mut(2);
            for (g, a) in gw.iter_mut().zip(&t.a2) {
                *g += a * dz3;
            }
            gb[0] += dz3;
        }

        let dz2: Vec<f64> = da2
            .iter()
            .zip(&t.z2)
            .map(|(g, &z)| if z > 0.0 { *g } else { 0.0 })
            .collect();
        let mut da1 = vec![0.0; h1];
        {
            let w2 = params.weights(1);
            let (gw, gb) = grad.layer_mut(1);
            for (i, (out, &a)) in da1.iter_mut().zip(&t.a1).enumerate() {
                let row = i * h2..(i + 1) * h2;
                let mut acc = 0.0;
                for ((g, w), dz) in gw[row.clone()].iter_mut().zip(&w2[row]).zip(&dz2) {
                    *g += a * dz;
                    acc += w * dz;
                }
                *out = acc;
            }
            for (g, dz) in gb.iter_mut().zip(&dz2) {
                *g += dz;
            }
        }

        let dz1: Vec<f64> = (0..h1)
            .map(|i| {
                let m = mask.map_or(1.0, |m| m[i]);
                if t.z1[i] > 0.0 {
                    da1[i] * m
                } else {
                    0.0
                }
            })
            .collect();
        let (gw, gb) = grad.layer_mut(0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (g, dz) in gw[i * h1..(i + 1) * h1].iter_mut().zip(&dz1) {
                *g += xi * dz;
            }
        }
        for (g, dz) in gb.iter_mut().zip(&dz1) {
            *g += dz;
        }
    }
    (loss * scale, grad)
}

/// A mini-batch after MixUp.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBatch {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub lambdas: Vec<f64>,
}

/// Mixes row `i` with row `partners[i]` using weight `lambdas[i]`.
pub fn mix_with(
    features: &[Vec<f64>],
    targets: &[f64],
    partners: &[usize],
    lambdas: &[f64],
) -> MixedBatch {
    let mixed = partners
        .iter()
        .zip(lambdas)
        .enumerate()
        .map(|(i, (&j, &lam))| {
            features[i]
                .iter()
                .zip(&features[j])
                .map(|(a, b)| lam * a + (1.0 - lam) * b)
                .collect()
        })
        .collect();
    let mixed_targets = partners
        .iter()
        .zip(lambdas)
        .enumerate()
        .map(|(i, (&j, &lam))| (lam * targets[i] + (1.0 - lam) * targets[j]).clamp(0.0, 1.0))
        .collect();
    MixedBatch {
        features: mixed,
        targets: mixed_targets,
        lambdas: lambdas.to_vec(),
    }
}

/// MixUp with partners from a random permutation of the batch and one
/// `λ ~ Beta(α, α)` per row. `α = 0` returns the batch unchanged.
pub fn mixup_batch(
    features: &[Vec<f64>],
    targets: &[f64],
    alpha: f64,
    rng: &mut seed::Rng,
) -> MixedBatch {
    let n = features.len();
    if alpha == 0.0 {
        return MixedBatch {
            features: features.to_vec(),
            targets: targets.to_vec(),
            lambdas: vec![1.0; n],
        };
    }
    let mut partners: Vec<usize> = (0..n).collect();
    partners.shuffle(rng);
    let beta = Beta::new(alpha, alpha).expect("alpha > 0");
    let lambdas: Vec<f64> = (0..n).map(|_| beta.sample(rng)).collect();
    mix_with(features, targets, &partners, &lambdas)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut Parameters, grad: &Parameters) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, g), m), v) in params
            .values
            .iter_mut()
            .zip(&grad.values)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub config: MlpConfig,
    pub params: Parameters,
    /// Mean training loss of each epoch.
    pub history: Vec<f64>,
}

/// Trains on a dataset containing both labels.
///
/// Randomness: initialization from `derive(seed, "init", 0)`, epoch `e`'s
/// shuffle, MixUp and dropout from `derive(seed, "epoch", e)`.
pub fn train(dataset: &LabeledDataset, config: &MlpConfig) -> Result<TrainedClassifier> {
    config.validate()?;
    let n = dataset.n();
    if n < 2 {
        return Err(Error::TrainingData(format!("need at least 2 samples, got {n}")));
    }
    for class in [0u8, 1] {
        if dataset.count(class) == 0 {
            return Err(Error::TrainingData(format!("no samples with label {class}")));
        }
    }

    let d = dataset.features.d();
    let mut params = init_params(d, config, seed::derive(config.seed, "init", 0));
    let inputs: Vec<Vec<f64>> = dataset.features.rows().map(widen).collect();
    let labels: Vec<f64> = dataset.labels.iter().map(|&l| f64::from(l)).collect();
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        let mut rng = seed::derived_rng(config.seed, "epoch", epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| labels[i]).collect();
            let batch = mixup_batch(&xs, &ys, config.mixup_alpha, &mut rng);
            let masks: Option<Vec<Vec<f64>>> = (config.dropout_rate > 0.0).then(|| {
                (0..chunk.len())
                    .map(|_| sample_dropout_mask(params.dims[1], config.dropout_rate, &mut rng))
                    .collect()
            });
            let (loss, grad) =
                loss_and_gradients(&params, &batch.features, &batch.targets, masks.as_deref());
            adam.step(&mut params, &grad);
            total += loss * chunk.len() as f64;
        }
        history.push(total / n as f64);
    }
    Ok(TrainedClassifier {
        config: config.clone(),
        params,
        history,
    })
}

impl TrainedClassifier {
    pub fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    pub fn predict(&self, x: &[f32]) -> Result<f64> {
        forward_eval(&self.params, x)
    }

    pub fn predict_batch(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        x.check_dim(self.input_dim())?;
        Ok(x.rows()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|row| trace(&self.params, &widen(row), None).p)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedClassifier = serde_json::from_str(text)?;
        model.config.validate()?;
        let expected = Parameters::zeros(model.params.dims[0], model.config.hidden_sizes);
        if expected.dims != model.params.dims || expected.len() != model.params.len() {
            return Err(Error::format(None, "parameter shapes do not match the config"));
        }
        if model.params.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(None, "non-finite parameter"));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Label 1 iff `p ≥ threshold`; a probability of exactly 0.5 is positive at
/// the default threshold.
pub fn classify(probabilities: &[f64], threshold: f64) -> Vec<u8> {
    probabilities.iter().map(|&p| u8::from(p >= threshold)).collect()
}
