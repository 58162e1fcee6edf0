//! Dense networks with hand-written backpropagation.
//!
//! Parameters of a network live in one flat `Vec<f64>` ([`ParamSet`]), layer
//! after layer, each layer storing its weight matrix (row per input unit)
//! followed by its bias. Gradients and Adam moments use the same layout, so
//! the optimizer is a plain elementwise loop.
//!
//! Dense layers skip zero inputs. Observations are one-hot grids with roughly
//! thirty nonzero entries out of 288, so the first layer is mostly free.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::{N_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    pub const fn new(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs }
    }

    pub const fn len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// A flat collection of layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    shapes: Vec<LayerShape>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl ParamSet {
    pub fn zeros(shapes: &[LayerShape]) -> Self {
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut total = 0;
        for s in shapes {
            offsets.push(total);
            total += s.len();
        }
        Self { shapes: shapes.to_vec(), offsets, values: vec![0.0; total] }
    }

    /// Weights drawn from `U(-b, b)` with `b = sqrt(2 / fan_in)`, biases zero.
    pub fn init(shapes: &[LayerShape], seed: u64) -> Self {
        let mut set = Self::zeros(shapes);
        let mut rng = SplitMix64::new(seed);
        for l in 0..shapes.len() {
            let bound = libm::sqrt(2.0 / shapes[l].inputs as f64);
            for w in set.weights_mut(l) {
                *w = rng.uniform(-bound, bound);
            }
        }
        set
    }

    pub fn zeros_like(&self) -> Self {
        Self { shapes: self.shapes.clone(), offsets: self.offsets.clone(), values: vec![0.0; self.values.len()] }
    }

    pub fn from_values(shapes: &[LayerShape], values: Vec<f64>) -> Result<Self> {
        let mut set = Self::zeros(shapes);
        if values.len() != set.values.len() {
            return Err(Error::ShapeMismatch { expected: set.values.len(), actual: values.len() });
        }
        set.values = values;
        Ok(set)
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let s = self.shapes[layer];
        let o = self.offsets[layer];
        &self.values[o..o + s.inputs * s.outputs]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let s = self.shapes[layer];
        let o = self.offsets[layer] + s.inputs * s.outputs;
        &self.values[o..o + s.outputs]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let s = self.shapes[layer];
        let o = self.offsets[layer];
        &mut self.values[o..o + s.inputs * s.outputs]
    }

    /// Mutable weight and bias slices of one layer.
    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let s = self.shapes[layer];
        let o = self.offsets[layer];
        let (w, rest) = self.values[o..o + s.len()].split_at_mut(s.inputs * s.outputs);
        (w, rest)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.values.fill(v);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    fn check_congruent(&self, other: &ParamSet) -> Result<()> {
        if self.shapes != other.shapes {
            return Err(Error::ShapeMismatch { expected: self.values.len(), actual: other.values.len() });
        }
        Ok(())
    }
}

/// Gradients share the parameter layout.
pub type GradientBundle = ParamSet;

/// `y = b + x W`, skipping zero entries of `x`.
pub fn dense_forward(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let n = y.len();
    y.copy_from_slice(b);
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * n..(i + 1) * n];
        for (yj, wij) in y.iter_mut().zip(row) {
            *yj += xi * wij;
        }
    }
}

/// Accumulates `dW += x^T dy`, `db += dy`, and writes `dx = dy W^T` when
/// requested.
pub fn dense_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n = dy.len();
    for (g, d) in db.iter_mut().zip(dy) {
        *g += d;
    }
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &mut dw[i * n..(i + 1) * n];
        for (g, d) in row.iter_mut().zip(dy) {
            *g += xi * d;
        }
    }
    if let Some(dx) = dx {
        for (i, dxi) in dx.iter_mut().enumerate() {
            let row = &w[i * n..(i + 1) * n];
            *dxi = row.iter().zip(dy).map(|(a, b)| a * b).sum();
        }
    }
}

pub fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Zeroes gradient entries whose pre-activation was not positive.
pub fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, z) in grad.iter_mut().zip(pre) {
        if *z <= 0.0 {
            *g = 0.0;
        }
    }
}

/// A categorical distribution over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub probs: Vec<f64>,
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Distribution {
    let mut probs = vec![0.0; logits.len()];
    softmax_into(logits, &mut probs);
    Distribution { probs }
}

pub fn softmax_into(logits: &[f64], probs: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, &z) in probs.iter_mut().zip(logits) {
        *p = libm::exp(z - max);
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
}

/// `log softmax(logits)[i]`, computed without forming the probabilities.
pub fn log_softmax_at(logits: &[f64], i: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| libm::exp(z - max)).sum();
    logits[i] - max - libm::log(sum)
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(dist: &Distribution) -> f64 {
    entropy_of(&dist.probs)
}

pub fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * libm::log(p)).sum();
    // Tiny negative values from rounding on near-degenerate inputs.
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyArch {
    pub obs_dim: usize,
    pub hidden: usize,
    pub n_actions: usize,
}

impl Default for PolicyArch {
    fn default() -> Self {
        Self { obs_dim: OBS_DIM, hidden: 64, n_actions: N_ACTIONS }
    }
}

impl PolicyArch {
    /// Trunk `obs -> hidden -> hidden`, then a logits head and a value head.
    pub fn shapes(&self) -> [LayerShape; 4] {
        [
            LayerShape::new(self.obs_dim, self.hidden),
            LayerShape::new(self.hidden, self.hidden),
            LayerShape::new(self.hidden, self.n_actions),
            LayerShape::new(self.hidden, 1),
        ]
    }
}

const TRUNK_1: usize = 0;
const TRUNK_2: usize = 1;
const LOGITS: usize = 2;
const VALUE: usize = 3;

/// Weights of the shared-trunk policy/value network.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub arch: PolicyArch,
    pub set: ParamSet,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct PolicyCache {
    pub pre1: Vec<f64>,
    pub h1: Vec<f64>,
    pub pre2: Vec<f64>,
    pub h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

impl PolicyCache {
    pub fn new(arch: &PolicyArch) -> Self {
        Self {
            pre1: vec![0.0; arch.hidden],
            h1: vec![0.0; arch.hidden],
            pre2: vec![0.0; arch.hidden],
            h2: vec![0.0; arch.hidden],
            logits: vec![0.0; arch.n_actions],
            value: 0.0,
        }
    }
}

/// Scratch space for [`PolicyParams::backward`].
#[derive(Debug, Clone)]
pub struct PolicyScratch {
    dh2: Vec<f64>,
    dh2_value: Vec<f64>,
    dh1: Vec<f64>,
}

impl PolicyScratch {
    pub fn new(arch: &PolicyArch) -> Self {
        Self { dh2: vec![0.0; arch.hidden], dh2_value: vec![0.0; arch.hidden], dh1: vec![0.0; arch.hidden] }
    }
}

impl PolicyParams {
    pub fn init(arch: PolicyArch, seed: u64) -> Self {
        Self { arch, set: ParamSet::init(&arch.shapes(), seed) }
    }

    pub fn zeros(arch: PolicyArch) -> Self {
        Self { arch, set: ParamSet::zeros(&arch.shapes()) }
    }

    pub fn from_set(arch: PolicyArch, set: ParamSet) -> Result<Self> {
        if set.shapes() != arch.shapes() {
            return Err(Error::ShapeMismatch { expected: ParamSet::zeros(&arch.shapes()).len(), actual: set.len() });
        }
        Ok(Self { arch, set })
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.arch.obs_dim {
            return Err(Error::ShapeMismatch { expected: self.arch.obs_dim, actual: obs.len() });
        }
        Ok(())
    }

    /// Returns `(logits, value)`.
    pub fn forward(&self, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut cache = PolicyCache::new(&self.arch);
        self.forward_cached(obs, &mut cache)?;
        Ok((cache.logits, cache.value))
    }

    pub fn forward_cached(&self, obs: &[f64], c: &mut PolicyCache) -> Result<()> {
        self.check_obs(obs)?;
        let s = &self.set;
        dense_forward(s.weights(TRUNK_1), s.bias(TRUNK_1), obs, &mut c.pre1);
        c.h1.copy_from_slice(&c.pre1);
        relu_in_place(&mut c.h1);
        dense_forward(s.weights(TRUNK_2), s.bias(TRUNK_2), &c.h1, &mut c.pre2);
        c.h2.copy_from_slice(&c.pre2);
        relu_in_place(&mut c.h2);
        dense_forward(s.weights(LOGITS), s.bias(LOGITS), &c.h2, &mut c.logits);
        let mut v = [0.0];
        dense_forward(s.weights(VALUE), s.bias(VALUE), &c.h2, &mut v);
        c.value = v[0];
        Ok(())
    }

    /// Accumulates into `grads` the parameter gradient of a scalar loss whose
    /// partials with respect to the logits and value are `dlogits`, `dvalue`.
    pub fn backward(
        &self,
        obs: &[f64],
        c: &PolicyCache,
        dlogits: &[f64],
        dvalue: f64,
        grads: &mut GradientBundle,
        scratch: &mut PolicyScratch,
    ) {
        let s = &self.set;
        let PolicyScratch { dh2, dh2_value, dh1 } = scratch;

        let (dw, db) = grads.layer_mut(LOGITS);
        dense_backward(s.weights(LOGITS), &c.h2, dlogits, dw, db, Some(dh2));
        let (dw, db) = grads.layer_mut(VALUE);
        dense_backward(s.weights(VALUE), &c.h2, &[dvalue], dw, db, Some(dh2_value));
        for (a, b) in dh2.iter_mut().zip(dh2_value.iter()) {
            *a += b;
        }
        relu_backward(&c.pre2, dh2);

        let (dw, db) = grads.layer_mut(TRUNK_2);
        dense_backward(s.weights(TRUNK_2), &c.h1, dh2, dw, db, Some(dh1));
        relu_backward(&c.pre1, dh1);

        let (dw, db) = grads.layer_mut(TRUNK_1);
        dense_backward(s.weights(TRUNK_1), obs, dh1, dw, db, None);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        Self { config, step: 0, first: vec![0.0; params.len()], second: vec![0.0; params.len()] }
    }

    /// In-place bias-corrected Adam update.
    pub fn apply(&mut self, params: &mut ParamSet, grads: &GradientBundle) -> Result<()> {
        params.check_congruent(grads)?;
        if self.first.len() != params.len() {
            return Err(Error::ShapeMismatch { expected: self.first.len(), actual: params.len() });
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(beta1, t);
        let c2 = 1.0 - libm::pow(beta2, t);
        let it = params.values.iter_mut().zip(&grads.values).zip(self.first.iter_mut().zip(self.second.iter_mut()));
        for ((p, &g), (m, v)) in it {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        }
        Ok(())
    }
}

/// Pure form of [`AdamState::apply`].
pub fn adam_step(params: &ParamSet, grads: &GradientBundle, opt: &AdamState) -> Result<(ParamSet, AdamState)> {
    let mut p = params.clone();
    let mut o = opt.clone();
    o.apply(&mut p, grads)?;
    Ok((p, o))
}

pub const POLICY_MAGIC: [u8; 4] = *b"PEOC";
pub const AUTOENCODER_MAGIC: [u8; 4] = *b"PAEB";
pub const BLOB_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Serializes parameters as a 16-byte header (magic, version `u32`, count
/// `u64`) followed by the values as little-endian `f64`, in layer order.
pub fn encode_params(magic: [u8; 4], params: &ParamSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    out.extend_from_slice(&magic);
    out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Inverse of [`encode_params`] for a known architecture.
pub fn decode_params(magic: [u8; 4], shapes: &[LayerShape], bytes: &[u8]) -> Result<ParamSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(alloc::format!("blob too short: {} bytes", bytes.len())));
    }
    if bytes[..4] != magic {
        return Err(Error::Format(alloc::format!("bad magic {:?}", &bytes[..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != BLOB_VERSION {
        return Err(Error::Format(alloc::format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count.saturating_mul(8) {
        return Err(Error::Format(alloc::format!("header says {count} values, body has {} bytes", body.len())));
    }
    let values: Vec<f64> =
        body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite parameter".into()));
    }
    ParamSet::from_values(shapes, values)
}
