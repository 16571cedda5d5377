//! Hashed n-gram logistic classifier trained with AdamW.
//!
//! Feature layout: `2^hash_bits` hashed slots followed by a dense block of
//! [`DENSE_LEN`] values `[overlap count, jaccard, length difference, bias]`.
//! Hashed keys are FNV-1a (64-bit) over `namespace 0x1F token[ 0x20 token]`,
//! masked to `hash_bits`; namespaces are `P` (premise), `H` (hypothesis) and
//! `S` (n-grams present on both sides).

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::SentencePair;

pub const DENSE_LEN: usize = 4;
pub const MODEL_FORMAT: &str = "wikilink-baseline";
pub const MODEL_VERSION: u32 = 1;
const MAX_HASH_BITS: u32 = 28;

const NS_PREMISE: u8 = b'P';
const NS_HYPOTHESIS: u8 = b'H';
const NS_SHARED: u8 = b'S';
const NS_SEP: u8 = 0x1f;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Hyper-parameters for the baseline.
///
/// `learning_rate` defaults to 0.01. The 2e-5 used for transformer
/// fine-tuning undertrains a linear model but can still be selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_tokens: usize,
    pub learning_rate: f64,
    pub adamw_eps: f64,
    pub adamw_beta1: f64,
    pub adamw_beta2: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hash_bits: u32,
    pub decision_threshold: f64,
}

/// Transformer fine-tuning learning rate, kept for reference.
pub const TRANSFORMER_LEARNING_RATE: f64 = 2e-5;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            max_tokens: 128,
            learning_rate: 0.01,
            adamw_eps: 1e-8,
            adamw_beta1: 0.9,
            adamw_beta2: 0.999,
            weight_decay: 0.01,
            epochs: 3,
            seed: 0,
            hash_bits: 18,
            decision_threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_owned()));
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if self.max_tokens == 0 {
            return fail("max_tokens must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be a positive real");
        }
        if !(self.adamw_eps.is_finite() && self.adamw_eps > 0.0) {
            return fail("adamw_eps must be a positive real");
        }
        if !open_unit(self.adamw_beta1) || !open_unit(self.adamw_beta2) {
            return fail("adamw betas must lie in (0, 1)");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return fail("weight_decay must be non-negative");
        }
        if self.epochs == 0 {
            return fail("epochs must be positive");
        }
        if self.hash_bits == 0 || self.hash_bits > MAX_HASH_BITS {
            return Err(Error::Config(format!("hash_bits must be in 1..={MAX_HASH_BITS}")));
        }
        if !open_unit(self.decision_threshold) {
            return fail("decision_threshold must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        dimension(self.hash_bits)
    }
}

pub fn dimension(hash_bits: u32) -> usize {
    (1usize << hash_bits) + DENSE_LEN
}

/// Sparse hashed features plus the dense block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    hash_bits: u32,
    /// Sorted by index, indices unique and `< 2^hash_bits`.
    sparse: Vec<(u32, f64)>,
    dense: [f64; DENSE_LEN],
}

impl FeatureVector {
    /// Builds a vector from raw parts, merging duplicate sparse indices.
    pub fn from_parts(hash_bits: u32, sparse: Vec<(u32, f64)>, dense: [f64; DENSE_LEN]) -> Result<Self> {
        let space = 1u64 << hash_bits;
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(sparse.len());
        let mut sorted = sparse;
        sorted.sort_by_key(|&(i, _)| i);
        for (i, v) in sorted {
            if u64::from(i) >= space {
                return Err(Error::Config(format!("feature index {i} outside hash space")));
            }
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => merged.push((i, v)),
            }
        }
        let fv = FeatureVector {
            hash_bits,
            sparse: merged,
            dense,
        };
        if let Some(index) = fv.iter().position(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "feature",
                index,
            });
        }
        Ok(fv)
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    pub fn sparse(&self) -> &[(u32, f64)] {
        &self.sparse
    }

    pub fn dense(&self) -> &[f64; DENSE_LEN] {
        &self.dense
    }

    pub fn dimension(&self) -> usize {
        dimension(self.hash_bits)
    }

    /// All non-structural entries as `(global index, value)`, sparse first.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let offset = 1usize << self.hash_bits;
        self.sparse
            .iter()
            .map(|&(i, v)| (i as usize, v))
            .chain(self.dense.iter().enumerate().map(move |(i, &v)| (offset + i, v)))
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.iter().map(|(i, v)| weights[i] * v).sum()
    }
}

fn feature_slot(namespace: u8, gram: &[&str], mask: u64) -> u32 {
    let mut key = Vec::with_capacity(2 + gram.iter().map(|t| t.len() + 1).sum::<usize>());
    key.push(namespace);
    key.push(NS_SEP);
    for (i, token) in gram.iter().enumerate() {
        if i > 0 {
            key.push(b' ');
        }
        key.extend_from_slice(token.as_bytes());
    }
    (fnv1a64(&key) & mask) as u32
}

fn grams(tokens: &[String]) -> impl Iterator<Item = Vec<&str>> + '_ {
    let unigrams = tokens.iter().map(|t| vec![t.as_str()]);
    let bigrams = tokens.windows(2).map(|w| vec![w[0].as_str(), w[1].as_str()]);
    unigrams.chain(bigrams)
}

pub fn featurize(pair: &SentencePair, hash_bits: u32) -> FeatureVector {
    let mask = (1u64 << hash_bits) - 1;
    let mut slots: HashMap<u32, f64> = HashMap::new();

    for (namespace, tokens) in [(NS_PREMISE, &pair.premise), (NS_HYPOTHESIS, &pair.hypothesis)] {
        for gram in grams(tokens) {
            *slots.entry(feature_slot(namespace, &gram, mask)).or_default() += 1.0;
        }
    }

    let premise_grams: BTreeSet<Vec<&str>> = grams(&pair.premise).collect();
    let hypothesis_grams: BTreeSet<Vec<&str>> = grams(&pair.hypothesis).collect();
    for gram in premise_grams.intersection(&hypothesis_grams) {
        *slots.entry(feature_slot(NS_SHARED, gram, mask)).or_default() += 1.0;
    }

    let premise_set: BTreeSet<&str> = pair.premise.iter().map(String::as_str).collect();
    let hypothesis_set: BTreeSet<&str> = pair.hypothesis.iter().map(String::as_str).collect();
    let overlap = premise_set.intersection(&hypothesis_set).count();
    let union = premise_set.union(&hypothesis_set).count();
    let jaccard = if union == 0 { 0.0 } else { overlap as f64 / union as f64 };
    let (lp, lh) = (pair.premise.len(), pair.hypothesis.len());
    let length_diff = match lp.max(lh) {
        0 => 0.0,
        longest => lp.abs_diff(lh) as f64 / longest as f64,
    };

    let mut sparse: Vec<(u32, f64)> = slots.into_iter().collect();
    sparse.sort_by_key(|&(i, _)| i);
    FeatureVector {
        hash_bits,
        sparse,
        dense: [overlap as f64, jaccard, length_diff, 1.0],
    }
}

/// A sparse gradient: sorted, unique indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    entries: Vec<(usize, f64)>,
}

impl Gradient {
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => merged.push((i, v)),
            }
        }
        Gradient { entries: merged }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Largest double below one; keeps probabilities strictly inside (0, 1).
const PROB_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

pub fn probability_from_logit(z: f64) -> f64 {
    sigmoid(z).clamp(f64::MIN_POSITIVE, PROB_MAX)
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean logistic loss over `batch` for `weights`.
pub fn batch_loss(weights: &[f64], batch: &[(FeatureVector, f64)]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch
        .iter()
        .map(|(x, y)| {
            let z = x.dot(weights);
            softplus(z) - y * z
        })
        .sum();
    total / batch.len() as f64
}

/// Mean over the batch of `(sigmoid(w.x) - y) x`.
///
/// Contributions are accumulated in batch order into a dense buffer.
pub fn batch_gradient(weights: &[f64], batch: &[(FeatureVector, f64)]) -> Gradient {
    if batch.is_empty() {
        return Gradient::default();
    }
    let mut acc: HashMap<usize, f64> = HashMap::new();
    for (x, y) in batch {
        let residual = sigmoid(x.dot(weights)) - y;
        for (i, v) in x.iter() {
            *acc.entry(i).or_default() += residual * v;
        }
    }
    let n = batch.len() as f64;
    Gradient::from_entries(acc.into_iter().map(|(i, g)| (i, g / n)).collect())
}

/// Linear logistic model with AdamW state. Weights start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    config: TrainConfig,
    weights: Vec<f64>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
}

impl BaselineModel {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let dim = config.dimension();
        Ok(BaselineModel {
            config,
            weights: vec![0.0; dim],
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn hash_bits(&self) -> u32 {
        self.config.hash_bits
    }

    pub fn bias_index(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Config("decision_threshold must lie in (0, 1)".into()));
        }
        self.config.decision_threshold = threshold;
        Ok(())
    }

    pub fn features(&self, pair: &SentencePair) -> FeatureVector {
        featurize(pair, self.config.hash_bits)
    }

    pub fn logit(&self, features: &FeatureVector) -> f64 {
        features.dot(&self.weights)
    }

    /// One AdamW update.
    ///
    /// Moments are updated with `beta1`/`beta2` and bias-corrected; the step is
    /// `lr * (m_hat / (sqrt(v_hat) + eps) + wd * w)` with the decay term
    /// skipped for the bias coordinate. The hyper-parameters come from
    /// `config`, not from the model's snapshot.
    pub fn adamw_step(&mut self, gradient: &Gradient, config: &TrainConfig) -> Result<()> {
        let dim = self.weights.len();
        for (index, &(i, g)) in gradient.entries.iter().enumerate() {
            if i >= dim {
                return Err(Error::Config(format!("gradient index {i} outside weight dimension {dim}")));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    what: "gradient",
                    index,
                });
            }
        }

        self.step += 1;
        let t = self.step as f64;
        let (beta1, beta2) = (config.adamw_beta1, config.adamw_beta2);
        let correction1 = 1.0 - beta1.powf(t);
        let correction2 = 1.0 - beta2.powf(t);
        let lr = config.learning_rate;
        let bias = self.bias_index();

        let mut entries = gradient.entries.iter().peekable();
        for i in 0..dim {
            let g = match entries.peek() {
                Some(&&(j, g)) if j == i => {
                    entries.next();
                    g
                }
                _ => 0.0,
            };
            let m = beta1 * self.first_moment[i] + (1.0 - beta1) * g;
            let v = beta2 * self.second_moment[i] + (1.0 - beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / correction1;
            let v_hat = v / correction2;
            let w = self.weights[i];
            let decay = if i == bias { 0.0 } else { config.weight_decay * w };
            let updated = w - lr * (m_hat / (v_hat.sqrt() + config.adamw_eps) + decay);
            if !updated.is_finite() {
                return Err(Error::NonFinite {
                    what: "weight",
                    index: i,
                });
            }
            self.weights[i] = updated;
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_VERSION,
            hash_bits: self.config.hash_bits,
            step: self.step,
            config: self.config.clone(),
            weights: self.weights.clone(),
        };
        serde_json::to_writer(&mut out, &file).map_err(|e| Error::Model(e.to_string()))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    /// Loads weights and config. Optimizer moments are not stored, so they
    /// restart at zero.
    pub fn load<R: Read>(input: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(input).map_err(|e| Error::Model(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!("unknown format {:?}", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported version {}", file.version)));
        }
        if file.hash_bits != file.config.hash_bits {
            return Err(Error::Model("hash_bits disagrees with config snapshot".into()));
        }
        file.config.validate()?;
        let dim = file.config.dimension();
        if file.weights.len() != dim {
            return Err(Error::Model(format!(
                "expected {dim} weights, found {}",
                file.weights.len()
            )));
        }
        if let Some(index) = file.weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { what: "weight", index });
        }
        Ok(BaselineModel {
            config: file.config,
            weights: file.weights,
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step: file.step,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    hash_bits: u32,
    step: u64,
    config: TrainConfig,
    weights: Vec<f64>,
}

/// Output of a classifier for one pair. `label` is 1 exactly when
/// `probability >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub pair_id: String,
    pub probability: f64,
    pub label: u8,
}

impl Prediction {
    pub fn new(pair_id: impl Into<String>, probability: f64, threshold: f64) -> Self {
        Prediction {
            pair_id: pair_id.into(),
            probability,
            label: u8::from(probability >= threshold),
        }
    }
}

/// Anything that scores a premise/hypothesis pair.
pub trait PairClassifier {
    fn probability(&self, pair: &SentencePair) -> f64;

    fn threshold(&self) -> f64;

    fn predict(&self, pair: &SentencePair) -> Prediction {
        Prediction::new(pair.pair_id.clone(), self.probability(pair), self.threshold())
    }
}

impl PairClassifier for BaselineModel {
    fn probability(&self, pair: &SentencePair) -> f64 {
        probability_from_logit(self.logit(&self.features(pair)))
    }

    fn threshold(&self) -> f64 {
        self.config.decision_threshold
    }
}

pub fn predict(model: &BaselineModel, pair: &SentencePair) -> Prediction {
    model.predict(pair)
}

/// Scores every pair, in input order.
pub fn predict_all<C: PairClassifier + Sync>(model: &C, pairs: &[SentencePair]) -> Vec<Prediction> {
    pairs.par_iter().map(|p| model.predict(p)).collect()
}

/// Per-batch losses (measured before each update) and per-epoch means.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub batch_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch AdamW on the mean logistic loss.
///
/// Example order is reshuffled every epoch from a ChaCha8 stream seeded with
/// `config.seed`. Featurization within a batch may run on the current rayon
/// pool; the reduction is sequential in batch order, so results do not
/// depend on the thread count.
pub fn train(examples: &[SentencePair], config: &TrainConfig) -> Result<(BaselineModel, TrainLog)> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let targets: Vec<f64> = examples
        .iter()
        .map(|e| {
            e.label.map(f64::from).ok_or_else(|| Error::Unlabeled {
                pair_id: e.pair_id.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let mut model = BaselineModel::new(config.clone())?;
    let mut log = TrainLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for _ in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(FeatureVector, f64)> = chunk
                .par_iter()
                .map(|&i| (featurize(&examples[i], config.hash_bits), targets[i]))
                .collect();
            let loss = batch_loss(&model.weights, &batch);
            let gradient = batch_gradient(&model.weights, &batch);
            model.adamw_step(&gradient, config)?;
            log.batch_losses.push(loss);
            epoch_total += loss * chunk.len() as f64;
        }
        log.epoch_losses.push(epoch_total / examples.len() as f64);
    }
    Ok((model, log))
}
