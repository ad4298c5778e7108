//! Convolutional classifier over tag sequences.
//!
//! Tags are embedded, convolved by one filter bank per window width (ReLU), max-pooled
//! over positions and fed to a two-way softmax (index 0 = private, 1 = public). Sequences
//! are padded at the end with a reserved all-zero, frozen token; windows made only of
//! padding are masked out of the pooling.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{PrivacyLabel, TaggedImage};
use crate::error::{Error, Result};
use crate::eval::{metrics, ConfusionMatrix};
use crate::tag_vectorize::TagVocabulary;

pub const PAD: usize = 0;
const PRIVATE: usize = 0;
const PUBLIC: usize = 1;
const CHECKPOINT_MAGIC: &[u8; 8] = b"PPTCNN\0\0";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub embed_dim: usize,
    pub widths: Vec<usize>,
    pub filters: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub trainable_embeddings: bool,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            embed_dim: 300,
            widths: vec![3, 4, 5],
            filters: 128,
            max_len: 32,
            dropout: 0.5,
            trainable_embeddings: true,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.filters == 0 || self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::arg("embedding dim, filter count and widths must be positive"));
        }
        let widest = *self.widths.iter().max().unwrap();
        if self.max_len < widest.max(5) {
            return Err(Error::arg(format!(
                "max_len {} must be at least 5 and at least the widest filter {widest}",
                self.max_len
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::arg(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// Row 0 is the padding token; row `i + 1` belongs to vocabulary tag `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub vectors: Vec<f64>,
    pub dim: usize,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn rows(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Uniform in [-0.25, 0.25] for every tag row, zero padding row.
    pub fn random(vocab_len: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = vec![0.0; (vocab_len + 1) * dim];
        for v in &mut vectors[dim..] {
            *v = rng.gen_range(-0.25..=0.25);
        }
        EmbeddingMatrix {
            vectors,
            dim,
            trainable: true,
        }
    }
}

/// Reads `word v1 ... vD` lines. Vocabulary tags found in the file (spaces may appear as
/// underscores there) copy its vector; the rest keep their seeded random row.
pub fn read_pretrained_embeddings<R: BufRead>(input: R, vocab: &TagVocabulary, dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    let mut m = EmbeddingMatrix::random(vocab.len(), dim, seed);
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values = parts
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        if values.len() != dim {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("vector has {} components, expected {dim}", values.len()),
            });
        }
        let idx = vocab.index_of(word).or_else(|| vocab.index_of(&word.replace('_', " ")));
        if let Some(i) = idx {
            m.vectors[(i + 1) * dim..(i + 2) * dim].copy_from_slice(&values);
        }
    }
    Ok(m)
}

pub fn load_pretrained_embeddings(
    path: impl AsRef<Path>,
    vocab: &TagVocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pretrained_embeddings(BufReader::new(file), vocab, dim, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilterBank {
    pub width: usize,
    /// `filters x (width * dim)`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvFilterBank {
    pub fn filters(&self) -> usize {
        self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagCnnModel {
    pub vocab: TagVocabulary,
    pub embeddings: EmbeddingMatrix,
    pub banks: Vec<ConvFilterBank>,
    /// `2 x pooled_len`, row-major by class.
    pub dense_weights: Vec<f64>,
    pub dense_bias: [f64; 2],
    pub dropout_rate: f64,
    pub max_len: usize,
}

/// Same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: Vec<f64>,
    pub banks: Vec<(Vec<f64>, Vec<f64>)>,
    pub dense_weights: Vec<f64>,
    pub dense_bias: [f64; 2],
}

impl Gradients {
    fn zeros_like(m: &TagCnnModel) -> Self {
        Gradients {
            embeddings: vec![0.0; m.embeddings.vectors.len()],
            banks: m
                .banks
                .iter()
                .map(|b| (vec![0.0; b.weights.len()], vec![0.0; b.biases.len()]))
                .collect(),
            dense_weights: vec![0.0; m.dense_weights.len()],
            dense_bias: [0.0; 2],
        }
    }

    /// Parameter groups in the order of [`TagCnnModel::parameters_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.embeddings];
        for (w, b) in &self.banks {
            out.push(w);
            out.push(b);
        }
        out.push(&self.dense_weights);
        out.push(&self.dense_bias);
        out
    }

    fn add(&mut self, other: &Gradients) {
        let acc = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        acc(&mut self.embeddings, &other.embeddings);
        for ((w, b), (ow, ob)) in self.banks.iter_mut().zip(&other.banks) {
            acc(w, ow);
            acc(b, ob);
        }
        acc(&mut self.dense_weights, &other.dense_weights);
        acc(&mut self.dense_bias, &other.dense_bias);
    }
}

pub fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// A tag sequence mapped to embedding rows, truncated to the model's maximum length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub label: PrivacyLabel,
}

struct BankTrace {
    /// Window start attaining the max pre-activation, per filter.
    argmax: Vec<Option<usize>>,
    pre_max: Vec<f64>,
}

struct Trace {
    banks: Vec<BankTrace>,
    /// Pooled features after ReLU and dropout.
    hidden: Vec<f64>,
    /// Dropout multipliers (1 in inference).
    mask: Vec<f64>,
    logits: [f64; 2],
    probs: [f64; 2],
}

impl TagCnnModel {
    pub fn new(vocab: TagVocabulary, embeddings: EmbeddingMatrix, config: &CnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if embeddings.dim != config.embed_dim || embeddings.rows() != vocab.len() + 1 {
            return Err(Error::arg(format!(
                "embedding matrix is {}x{}, expected {}x{}",
                embeddings.rows(),
                embeddings.dim,
                vocab.len() + 1,
                config.embed_dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = config.embed_dim;
        let banks = config
            .widths
            .iter()
            .map(|&w| {
                let fan_in = (w * dim) as f64;
                let bound = 1.0 / fan_in.sqrt();
                ConvFilterBank {
                    width: w,
                    weights: (0..config.filters * w * dim).map(|_| rng.gen_range(-bound..bound)).collect(),
                    biases: vec![0.0; config.filters],
                }
            })
            .collect::<Vec<_>>();
        let pooled = config.filters * config.widths.len();
        let bound = 1.0 / (pooled as f64).sqrt();
        let dense_weights = (0..2 * pooled).map(|_| rng.gen_range(-bound..bound)).collect();
        let mut embeddings = embeddings;
        embeddings.trainable = config.trainable_embeddings;
        embeddings.vectors[..dim].iter_mut().for_each(|v| *v = 0.0);
        Ok(TagCnnModel {
            vocab,
            embeddings,
            banks,
            dense_weights,
            dense_bias: [0.0; 2],
            dropout_rate: config.dropout,
            max_len: config.max_len,
        })
    }

    pub fn pooled_len(&self) -> usize {
        self.banks.iter().map(ConvFilterBank::filters).sum()
    }

    /// Known tags as embedding rows; unknown tags are dropped.
    pub fn encode<S: AsRef<str>>(&self, tags: &[S]) -> Vec<usize> {
        tags.iter()
            .filter_map(|t| self.vocab.index_of(t.as_ref()).map(|i| i + 1))
            .take(self.max_len)
            .collect()
    }

    pub fn example(&self, img: &TaggedImage) -> Example {
        Example {
            tokens: self.encode(&img.tags),
            label: img.label,
        }
    }

    /// Parameter groups: embeddings, then (weights, biases) per bank, dense weights, dense bias.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.embeddings.vectors];
        for b in &mut self.banks {
            out.push(&mut b.weights);
            out.push(&mut b.biases);
        }
        out.push(&mut self.dense_weights);
        out.push(&mut self.dense_bias);
        out
    }

    fn trace(&self, tokens: &[usize], mask: Option<&[f64]>) -> Trace {
        let dim = self.embeddings.dim;
        let len = tokens.len().min(self.max_len);
        let mut hidden = Vec::with_capacity(self.pooled_len());
        let mut banks = Vec::with_capacity(self.banks.len());
        let mut window = Vec::new();
        for bank in &self.banks {
            let w = bank.width;
            let span = w * dim;
            let nf = bank.filters();
            let mut argmax = vec![None; nf];
            let mut pre_max = vec![f64::NEG_INFINITY; nf];
            let positions = self.max_len + 1 - w;
            // a window starting at or after `len` is all padding
            for p in 0..positions.min(len) {
                window.clear();
                for o in 0..w {
                    match tokens.get(p + o) {
                        Some(&t) if p + o < len => window.extend_from_slice(self.embeddings.row(t)),
                        _ => window.extend(std::iter::repeat_n(0.0, dim)),
                    }
                }
                for f in 0..nf {
                    let row = &bank.weights[f * span..(f + 1) * span];
                    let v = bank.biases[f] + row.iter().zip(&window).map(|(a, b)| a * b).sum::<f64>();
                    if v > pre_max[f] {
                        pre_max[f] = v;
                        argmax[f] = Some(p);
                    }
                }
            }
            hidden.extend(pre_max.iter().map(|&v| if v > 0.0 { v } else { 0.0 }));
            banks.push(BankTrace { argmax, pre_max });
        }
        let mask = match mask {
            Some(m) => m.to_vec(),
            None => vec![1.0; hidden.len()],
        };
        for (h, m) in hidden.iter_mut().zip(&mask) {
            *h *= m;
        }
        let p = hidden.len();
        let mut logits = self.dense_bias;
        for (c, z) in logits.iter_mut().enumerate() {
            *z += self.dense_weights[c * p..(c + 1) * p]
                .iter()
                .zip(&hidden)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        Trace {
            banks,
            hidden,
            mask,
            logits,
            probs: softmax(logits),
        }
    }

    /// Inference-mode logits and class probabilities (private, public).
    pub fn forward(&self, tokens: &[usize]) -> ([f64; 2], [f64; 2]) {
        let t = self.trace(tokens, None);
        (t.logits, t.probs)
    }

    /// Max-pooled features before dropout.
    pub fn pooled_features(&self, tokens: &[usize]) -> Vec<f64> {
        self.trace(tokens, None).hidden
    }

    pub fn predict_proba<S: AsRef<str>>(&self, tags: &[S]) -> f64 {
        self.forward(&self.encode(tags)).1[PRIVATE]
    }

    fn dropout_mask(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let keep = 1.0 - self.dropout_rate;
        (0..self.pooled_len())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }

    /// Accumulates the gradient of `-weight * ln p(label)` into `g`; returns the unweighted loss.
    fn backprop(&self, ex: &Example, mask: Option<&[f64]>, weight: f64, g: &mut Gradients) -> f64 {
        let tr = self.trace(&ex.tokens, mask);
        let target = if ex.label.is_private() { PRIVATE } else { PUBLIC };
        let loss = -tr.probs[target].max(f64::MIN_POSITIVE).ln();
        let mut dz = tr.probs;
        dz[target] -= 1.0;
        dz.iter_mut().for_each(|v| *v *= weight);

        let p = tr.hidden.len();
        let mut dhidden = vec![0.0; p];
        for (c, &dzc) in dz.iter().enumerate() {
            g.dense_bias[c] += dzc;
            let row = &self.dense_weights[c * p..(c + 1) * p];
            let grow = &mut g.dense_weights[c * p..(c + 1) * p];
            for i in 0..p {
                grow[i] += dzc * tr.hidden[i];
                dhidden[i] += dzc * row[i];
            }
        }

        let dim = self.embeddings.dim;
        let len = ex.tokens.len().min(self.max_len);
        let mut offset = 0;
        for ((bank, bt), (gw, gb)) in self.banks.iter().zip(&tr.banks).zip(g.banks.iter_mut()) {
            let span = bank.width * dim;
            for f in 0..bank.filters() {
                let Some(start) = bt.argmax[f] else { continue };
                if bt.pre_max[f] <= 0.0 {
                    continue;
                }
                let d = dhidden[offset + f] * tr.mask[offset + f];
                if d == 0.0 {
                    continue;
                }
                gb[f] += d;
                for o in 0..bank.width {
                    if start + o >= len {
                        break;
                    }
                    let tok = ex.tokens[start + o];
                    let emb = self.embeddings.row(tok);
                    let wslice = &bank.weights[f * span + o * dim..f * span + (o + 1) * dim];
                    let gws = &mut gw[f * span + o * dim..f * span + (o + 1) * dim];
                    for k in 0..dim {
                        gws[k] += d * emb[k];
                    }
                    if tok != PAD && self.embeddings.trainable {
                        let ge = &mut g.embeddings[tok * dim..(tok + 1) * dim];
                        for k in 0..dim {
                            ge[k] += d * wslice[k];
                        }
                    }
                }
            }
            offset += bank.filters();
        }
        loss
    }
}

/// Mean cross-entropy of `batch` and its gradient. Dropout is applied when `dropout_rng`
/// is given (training mode), one seeded mask per example.
pub fn loss_and_grads(model: &TagCnnModel, batch: &[Example], dropout_rng: Option<&mut ChaCha8Rng>) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    let masks = draw_masks(model, batch.len(), dropout_rng);
    let weight = 1.0 / batch.len() as f64;
    let mut g = Gradients::zeros_like(model);
    let mut total = 0.0;
    for (ex, mask) in batch.iter().zip(&masks) {
        total += model.backprop(ex, mask.as_deref(), weight, &mut g);
    }
    Ok((total * weight, g))
}

/// Like [`loss_and_grads`] with batch shards evaluated concurrently. The shard sums are
/// combined in a fixed order, but the result differs from the sequential path in the
/// last bits.
pub fn loss_and_grads_parallel(
    model: &TagCnnModel,
    batch: &[Example],
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    let masks = draw_masks(model, batch.len(), dropout_rng);
    let weight = 1.0 / batch.len() as f64;
    let shard = batch.len().div_ceil(rayon::current_num_threads().max(1));
    let parts: Vec<(f64, Gradients)> = batch
        .par_chunks(shard)
        .zip(masks.par_chunks(shard))
        .map(|(exs, ms)| {
            let mut g = Gradients::zeros_like(model);
            let loss: f64 = exs
                .iter()
                .zip(ms)
                .map(|(ex, m)| model.backprop(ex, m.as_deref(), weight, &mut g))
                .sum();
            (loss, g)
        })
        .collect();
    let mut g = Gradients::zeros_like(model);
    let mut total = 0.0;
    for (loss, part) in &parts {
        total += loss;
        g.add(part);
    }
    Ok((total * weight, g))
}

fn draw_masks(model: &TagCnnModel, n: usize, rng: Option<&mut ChaCha8Rng>) -> Vec<Option<Vec<f64>>> {
    match rng {
        Some(rng) if model.dropout_rate > 0.0 => (0..n).map(|_| Some(model.dropout_mask(rng))).collect(),
        _ => vec![None; n],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub early_stop_patience: usize,
    /// Data-parallel gradients; not bit-reproducible across thread counts.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            early_stop_patience: 5,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.early_stop_patience == 0 {
            return Err(Error::arg("epochs, batch size and patience must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_weighted_f1: f64,
    pub dev_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &mut TagCnnModel, lr: f64) -> Self {
        let shapes: Vec<usize> = model.parameters_mut().iter().map(|s| s.len()).collect();
        Adam {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, model: &mut TagCnnModel, g: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let frozen_embeddings = !model.embeddings.trainable;
        for (k, (param, grad)) in model.parameters_mut().into_iter().zip(g.slices()).enumerate() {
            if k == 0 && frozen_embeddings {
                continue;
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..param.len() {
                let gi = grad[i];
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * gi;
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * gi * gi;
                param[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Weighted F1 at the 0.5 threshold and mean cross-entropy on the dev set.
fn dev_scores(model: &TagCnnModel, dev: &[Example]) -> (f64, f64) {
    let mut cm = ConfusionMatrix::default();
    let mut loss = 0.0;
    for ex in dev {
        let p = model.forward(&ex.tokens).1[PRIVATE];
        let pred = if p >= 0.5 {
            PrivacyLabel::Private
        } else {
            PrivacyLabel::Public
        };
        cm.add(pred, ex.label);
        let target = if ex.label.is_private() { p } else { 1.0 - p };
        loss -= target.max(f64::MIN_POSITIVE).ln();
    }
    (metrics(&cm).overall.f1, loss / dev.len() as f64)
}

/// Mini-batch Adam with early stopping on dev weighted F1, equal F1 broken by lower dev
/// loss. The returned model holds the parameters of the best dev epoch.
pub fn train(
    model: TagCnnModel,
    train_set: &[TaggedImage],
    dev_set: &[TaggedImage],
    config: &TrainConfig,
) -> Result<(TagCnnModel, History)> {
    config.validate()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::arg("train and dev sets must be non-empty"));
    }
    let mut model = model;
    let train_ex: Vec<Example> = train_set.iter().map(|i| model.example(i)).collect();
    let dev_ex: Vec<Example> = dev_set.iter().map(|i| model.example(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(&mut model, config.learning_rate);
    let mut order: Vec<usize> = (0..train_ex.len()).collect();

    let mut best = model.clone();
    let mut best_score = dev_scores(&model, &dev_ex);
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train_ex[i].clone()).collect();
            let (loss, g) = if config.parallel {
                loss_and_grads_parallel(&model, &batch, Some(&mut rng))?
            } else {
                loss_and_grads(&model, &batch, Some(&mut rng))?
            };
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut model, &g);
        }
        let (dev_f1, dev_loss) = dev_scores(&model, &dev_ex);
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_ex.len() as f64,
            dev_weighted_f1: dev_f1,
            dev_loss,
        });
        if dev_f1 > best_score.0 || (dev_f1 == best_score.0 && dev_loss < best_score.1) {
            best_score = (dev_f1, dev_loss);
            best = model.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.early_stop_patience {
                break;
            }
        }
    }
    Ok((
        best,
        History {
            epochs: history,
            best_epoch,
        },
    ))
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize;
        if n > self.buf.len() / 8 {
            return Err(Error::Format("checkpoint array length exceeds file size".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("tag is not UTF-8".into()))
    }
}

impl TagCnnModel {
    /// Versioned little-endian binary checkpoint.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        put_u32(&mut out, self.max_len as u32);
        out.extend_from_slice(&self.dropout_rate.to_le_bytes());
        put_u32(&mut out, self.embeddings.dim as u32);
        out.push(self.embeddings.trainable as u8);
        put_u32(&mut out, self.vocab.len() as u32);
        for t in self.vocab.tags() {
            put_u32(&mut out, t.len() as u32);
            out.extend_from_slice(t.as_bytes());
        }
        put_f64s(&mut out, &self.embeddings.vectors);
        put_u32(&mut out, self.banks.len() as u32);
        for b in &self.banks {
            put_u32(&mut out, b.width as u32);
            put_f64s(&mut out, &b.weights);
            put_f64s(&mut out, &b.biases);
        }
        put_f64s(&mut out, &self.dense_weights);
        put_f64s(&mut out, &self.dense_bias);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor { buf, pos: 0 };
        if c.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a tag CNN checkpoint".into()));
        }
        let version = c.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let max_len = c.u32()? as usize;
        let dropout_rate = c.f64()?;
        let dim = c.u32()? as usize;
        let trainable = c.take(1)?[0] != 0;
        let n_tags = c.u32()? as usize;
        let tags = (0..n_tags).map(|_| c.string()).collect::<Result<Vec<_>>>()?;
        let vectors = c.f64s()?;
        if dim == 0 || vectors.len() != (n_tags + 1) * dim {
            return Err(Error::Format("embedding matrix has the wrong size".into()));
        }
        let n_banks = c.u32()? as usize;
        let mut banks = Vec::with_capacity(n_banks);
        for _ in 0..n_banks {
            let width = c.u32()? as usize;
            let weights = c.f64s()?;
            let biases = c.f64s()?;
            if weights.len() != biases.len() * width * dim {
                return Err(Error::Format("filter bank has the wrong size".into()));
            }
            banks.push(ConvFilterBank { width, weights, biases });
        }
        let dense_weights = c.f64s()?;
        let bias = c.f64s()?;
        let pooled: usize = banks.iter().map(ConvFilterBank::filters).sum();
        if dense_weights.len() != 2 * pooled || bias.len() != 2 {
            return Err(Error::Format("dense layer has the wrong size".into()));
        }
        if c.pos != buf.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(TagCnnModel {
            vocab: TagVocabulary::new(tags)?,
            embeddings: EmbeddingMatrix { vectors, dim, trainable },
            banks,
            dense_weights,
            dense_bias: [bias[0], bias[1]],
            dropout_rate,
            max_len,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}
