//! Non-policy one-class baselines fitted on in-distribution observations
//! only: an autoencoder scored by reconstruction error and an exact k-NN
//! distance scorer.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::env::OBS_DIM;
use crate::error::{Error, Result};
use crate::nn::{
    decode_params, dense_backward, dense_forward, encode_params, relu_backward, relu_in_place, AdamConfig, AdamState,
    GradientBundle, LayerShape, ParamSet, AUTOENCODER_MAGIC,
};
use crate::peoc::Classifier;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeConfig {
    pub input: usize,
    pub hidden: usize,
    pub bottleneck: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self { input: OBS_DIM, hidden: 64, bottleneck: 16, epochs: 50, minibatch: 128, lr: 1e-3, seed: 0 }
    }
}

impl AeConfig {
    /// Encoder `input -> hidden -> bottleneck`, decoder back to `input`.
    /// ReLU on every hidden layer, linear output.
    pub fn shapes(&self) -> [LayerShape; 4] {
        [
            LayerShape::new(self.input, self.hidden),
            LayerShape::new(self.hidden, self.bottleneck),
            LayerShape::new(self.bottleneck, self.hidden),
            LayerShape::new(self.hidden, self.input),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    pub config: AeConfig,
    pub params: ParamSet,
    pub opt: AdamState,
    /// Mean training loss of every completed epoch.
    pub epoch_losses: Vec<f64>,
}

struct AeCache {
    pre: [Vec<f64>; 3],
    act: [Vec<f64>; 3],
    out: Vec<f64>,
}

impl AeCache {
    fn new(c: &AeConfig) -> Self {
        let sizes = [c.hidden, c.bottleneck, c.hidden];
        Self {
            pre: sizes.map(|n| vec![0.0; n]),
            act: sizes.map(|n| vec![0.0; n]),
            out: vec![0.0; c.input],
        }
    }
}

struct AeScratch {
    dout: Vec<f64>,
    d: [Vec<f64>; 3],
}

fn ae_forward(params: &ParamSet, x: &[f64], c: &mut AeCache) {
    let mut input = x;
    for l in 0..3 {
        dense_forward(params.weights(l), params.bias(l), input, &mut c.pre[l]);
        c.act[l].copy_from_slice(&c.pre[l]);
        relu_in_place(&mut c.act[l]);
        input = &c.act[l];
    }
    dense_forward(params.weights(3), params.bias(3), &c.act[2], &mut c.out);
}

fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean (over batch and dimensions) squared reconstruction error; the
/// gradient is accumulated into `grads` when given.
pub fn ae_loss(params: &ParamSet, config: &AeConfig, batch: &[&[f64]], mut grads: Option<&mut GradientBundle>) -> f64 {
    let mut cache = AeCache::new(config);
    let mut scratch = AeScratch {
        dout: vec![0.0; config.input],
        d: [vec![0.0; config.hidden], vec![0.0; config.bottleneck], vec![0.0; config.hidden]],
    };
    let scale = 1.0 / (batch.len() * config.input) as f64;
    let mut total = 0.0;
    for x in batch {
        ae_forward(params, x, &mut cache);
        total += squared_error(&cache.out, x);
        let Some(g) = grads.as_deref_mut() else { continue };
        for ((d, o), xi) in scratch.dout.iter_mut().zip(&cache.out).zip(x.iter()) {
            *d = 2.0 * scale * (o - xi);
        }
        let [d0, d1, d2] = &mut scratch.d;
        let (dw, db) = g.layer_mut(3);
        dense_backward(params.weights(3), &cache.act[2], &scratch.dout, dw, db, Some(d2));
        relu_backward(&cache.pre[2], d2);
        let (dw, db) = g.layer_mut(2);
        dense_backward(params.weights(2), &cache.act[1], d2, dw, db, Some(d1));
        relu_backward(&cache.pre[1], d1);
        let (dw, db) = g.layer_mut(1);
        dense_backward(params.weights(1), &cache.act[0], d1, dw, db, Some(d0));
        relu_backward(&cache.pre[0], d0);
        let (dw, db) = g.layer_mut(0);
        dense_backward(params.weights(0), x, d0, dw, db, None);
    }
    total * scale
}

/// Fits the autoencoder by minibatch Adam on mean squared reconstruction
/// error. `epochs = 0` returns the seeded initialization.
pub fn ae_fit(train: &[Vec<f64>], config: &AeConfig) -> Result<AeModel> {
    if train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if config.minibatch == 0 || !(config.lr > 0.0) {
        return Err(Error::InvalidConfig("autoencoder minibatch and lr must be positive".into()));
    }
    if let Some(bad) = train.iter().find(|x| x.len() != config.input) {
        return Err(Error::ShapeMismatch { expected: config.input, actual: bad.len() });
    }
    let shapes = config.shapes();
    let mut rng = SplitMix64::new(config.seed);
    let mut params = ParamSet::init(&shapes, rng.next_u64());
    let mut opt = AdamState::new(&params, AdamConfig { lr: config.lr, ..AdamConfig::default() });
    let mut grads = params.zeros_like();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut batch: Vec<&[f64]> = Vec::with_capacity(config.minibatch);

    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut weighted = 0.0;
        for chunk in order.chunks(config.minibatch) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].as_slice()));
            grads.fill(0.0);
            let loss = ae_loss(&params, config, &batch, Some(&mut grads));
            opt.apply(&mut params, &grads)?;
            weighted += loss * chunk.len() as f64;
        }
        epoch_losses.push(weighted / train.len() as f64);
    }
    Ok(AeModel { config: *config, params, opt, epoch_losses })
}

/// Mean squared reconstruction error of `obs`.
pub fn ae_score(model: &AeModel, obs: &[f64]) -> Result<f64> {
    if obs.len() != model.config.input {
        return Err(Error::ShapeMismatch { expected: model.config.input, actual: obs.len() });
    }
    let mut cache = AeCache::new(&model.config);
    ae_forward(&model.params, obs, &mut cache);
    Ok(squared_error(&cache.out, obs) / obs.len() as f64)
}

impl AeModel {
    /// Model weights in the shared parameter container (magic `PAEB`).
    pub fn to_bytes(&self) -> Vec<u8> {
        encode_params(AUTOENCODER_MAGIC, &self.params)
    }

    /// Restores weights; the optimizer state starts fresh.
    pub fn from_bytes(config: AeConfig, bytes: &[u8]) -> Result<Self> {
        let params = decode_params(AUTOENCODER_MAGIC, &config.shapes(), bytes)?;
        let opt = AdamState::new(&params, AdamConfig { lr: config.lr, ..AdamConfig::default() });
        Ok(Self { config, params, opt, epoch_losses: Vec::new() })
    }
}

pub struct Autoencoder {
    name: String,
    model: AeModel,
}

impl Autoencoder {
    pub fn new(name: impl Into<String>, model: AeModel) -> Self {
        Self { name: name.into(), model }
    }

    pub fn model(&self) -> &AeModel {
        &self.model
    }
}

impl Classifier for Autoencoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, obs: &[f64]) -> Result<f64> {
        ae_score(&self.model, obs)
    }
}

/// Exact k-nearest-neighbour index. Identical points are stored once with a
/// multiplicity, which keeps duplicates without paying for them at query
/// time.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnIndex {
    k: usize,
    dim: usize,
    points: Vec<(Vec<f64>, usize)>,
    total: usize,
}

pub fn knn_fit(train: &[Vec<f64>], k: usize) -> Result<KnnIndex> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if train.len() < k {
        return Err(Error::TooFewPoints { k, got: train.len() });
    }
    let dim = train[0].len();
    if let Some(bad) = train.iter().find(|x| x.len() != dim) {
        return Err(Error::ShapeMismatch { expected: dim, actual: bad.len() });
    }
    let mut counts: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    for x in train {
        *counts.entry(x.iter().map(|v| v.to_bits()).collect()).or_default() += 1;
    }
    let points = counts
        .into_iter()
        .map(|(bits, n)| (bits.into_iter().map(f64::from_bits).collect(), n))
        .collect();
    Ok(KnnIndex { k, dim, points, total: train.len() })
}

impl KnnIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of stored points, duplicates included.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn distinct_points(&self) -> usize {
        self.points.len()
    }
}

/// Euclidean distance from `obs` to its k-th nearest stored point.
pub fn knn_score(index: &KnnIndex, obs: &[f64]) -> Result<f64> {
    if obs.len() != index.dim {
        return Err(Error::ShapeMismatch { expected: index.dim, actual: obs.len() });
    }
    let mut dists: Vec<(f64, usize)> = index
        .points
        .iter()
        .map(|(p, n)| (libm::sqrt(squared_error(p, obs)), *n))
        .collect();
    dists.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut seen = 0;
    for (d, n) in dists {
        seen += n;
        if seen >= index.k {
            return Ok(d);
        }
    }
    unreachable!("index holds at least k points")
}

pub struct Knn {
    name: String,
    index: KnnIndex,
}

impl Knn {
    pub fn new(name: impl Into<String>, index: KnnIndex) -> Self {
        Self { name: name.into(), index }
    }
}

impl Classifier for Knn {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, obs: &[f64]) -> Result<f64> {
        knn_score(&self.index, obs)
    }
}
