//! Skip-gram with negative sampling over walk corpora.
//!
//! Each node owns an input vector (the embedding that is kept) and an output
//! vector used only as the context-side parameter during training. For a
//! center `c`, context `o` and noise nodes `n_1..n_k` the pair loss is
//!
//! ```text
//! -log s(in_c . out_o) - sum_i log s(-in_c . out_{n_i})
//! ```
//!
//! with `s` the logistic function.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeIndex};
use crate::rng;
use crate::walks::WalkCorpus;

/// Input and output vectors of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    node_count: usize,
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(node_count: usize, dim: usize) -> Self {
        Self {
            node_count,
            dim,
            input: vec![0.0; node_count * dim],
            output: vec![0.0; node_count * dim],
        }
    }

    /// Input vectors uniform in `[-0.5/d, 0.5/d)`, output vectors zero.
    pub fn initialized(node_count: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut emb = Self::zeros(node_count, dim);
        let scale = 1.0 / dim as f64;
        for v in &mut emb.input {
            *v = (rng.gen::<f64>() - 0.5) * scale;
        }
        emb
    }

    /// Builds a matrix from explicit input vectors; output vectors are zero.
    pub fn from_input_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut emb = Self::zeros(rows.len(), dim);
        for (u, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::validation(format!(
                    "row {u} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            emb.input_mut(u).copy_from_slice(row);
        }
        Ok(emb)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self, u: usize) -> &[f64] {
        &self.input[u * self.dim..(u + 1) * self.dim]
    }

    pub fn output(&self, u: usize) -> &[f64] {
        &self.output[u * self.dim..(u + 1) * self.dim]
    }

    pub fn input_mut(&mut self, u: usize) -> &mut [f64] {
        &mut self.input[u * self.dim..(u + 1) * self.dim]
    }

    pub fn output_mut(&mut self, u: usize) -> &mut [f64] {
        &mut self.output[u * self.dim..(u + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|v| v.is_finite())
    }

    /// Word-vector text format: `n d` header, then `name v_1 .. v_d` per node.
    pub fn write_text<W: Write>(&self, mut out: W, names: &NodeIndex) -> Result<()> {
        writeln!(out, "{} {}", self.node_count, self.dim)?;
        for u in 0..self.node_count {
            out.write_all(names.name(u).as_bytes())?;
            for v in self.input(u) {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads the word-vector text format, interning node names into `index`.
///
/// Rows are placed at the interned id; ids never mentioned keep zero vectors.
pub fn read_embeddings(text: &str, index: &mut NodeIndex) -> Result<EmbeddingMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::validation("embedding file is empty"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(1, "header must be `node_count dim`"))?;
    let [count, dim] = dims[..] else {
        return Err(Error::parse(1, "header must be `node_count dim`"));
    };
    let mut rows = Vec::with_capacity(count);
    for (lineno, line) in lines {
        let mut fields = line.split_whitespace();
        let name = fields.next().expect("non-empty line");
        let values: Vec<f64> = fields
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(lineno + 1, "non-numeric vector entry"))?;
        if values.len() != dim {
            return Err(Error::parse(
                lineno + 1,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        rows.push((index.intern(name), values));
    }
    if rows.len() != count {
        return Err(Error::validation(format!(
            "header announces {count} vectors, file has {}",
            rows.len()
        )));
    }
    let mut emb = EmbeddingMatrix::zeros(index.len(), dim);
    for (u, values) in rows {
        emb.input_mut(u).copy_from_slice(&values);
    }
    Ok(emb)
}

/// Negative-sampling distribution, `P(u) ~ freq(u)^exponent` over nodes seen in the corpus.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    probabilities: Vec<f64>,
    sampler: WeightedIndex<f64>,
    support: usize,
}

impl NoiseDistribution {
    pub fn from_frequencies(counts: &[u64], exponent: f64) -> Result<Self> {
        if !exponent.is_finite() {
            return Err(Error::validation("noise exponent must be finite"));
        }
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { (c as f64).powf(exponent) })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::validation("noise distribution needs a non-empty corpus"));
        }
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::validation(format!("noise distribution: {e}")))?;
        Ok(Self {
            probabilities: weights.iter().map(|w| w / total).collect(),
            sampler,
            support: counts.iter().filter(|&&c| c > 0).count(),
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    /// Number of nodes with non-zero probability.
    pub fn support(&self) -> usize {
        self.support
    }
}

pub fn build_noise_table(
    corpus: &WalkCorpus,
    node_count: usize,
    exponent: f64,
) -> Result<NoiseDistribution> {
    let mut counts = vec![0u64; node_count];
    for &u in corpus.walks.iter().flatten() {
        if u >= node_count {
            return Err(Error::NodeOutOfRange { node: u, node_count });
        }
        counts[u] += 1;
    }
    NoiseDistribution::from_frequencies(&counts, exponent)
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log s(x)` without forming `s(x)`.
pub fn log_sigmoid(x: f64) -> f64 {
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Scores one target against the center vector `h`, accumulates the descent
/// direction for `h` into `grad_h` and updates the target's output row.
/// Returns the target's loss term.
#[inline]
fn apply_target(h: &[f64], out_row: &mut [f64], grad_h: &mut [f64], positive: bool, lr: f64) -> f64 {
    let score = dot(h, out_row);
    let (g, loss) = if positive {
        (1.0 - sigmoid(score), -log_sigmoid(score))
    } else {
        (-sigmoid(score), -log_sigmoid(-score))
    };
    axpy(g, out_row, grad_h);
    axpy(lr * g, h, out_row);
    loss
}

/// Loss of one (center, context, negatives) example at the current parameters.
pub fn pair_loss(emb: &EmbeddingMatrix, center: usize, context: usize, negatives: &[usize]) -> f64 {
    let h = emb.input(center);
    let mut loss = -log_sigmoid(dot(h, emb.output(context)));
    for &n in negatives {
        loss -= log_sigmoid(-dot(h, emb.output(n)));
    }
    loss
}

/// One gradient step on the pair loss at rate `lr`. Returns the loss before the step.
pub fn sgns_pair_step(
    emb: &mut EmbeddingMatrix,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
) -> Result<f64> {
    let n = emb.node_count;
    for &u in [center, context].iter().chain(negatives) {
        if u >= n {
            return Err(Error::NodeOutOfRange { node: u, node_count: n });
        }
    }
    let mut grad = vec![0.0; emb.dim];
    Ok(pair_step_unchecked(emb, center, context, negatives, lr, &mut grad))
}

#[inline]
fn pair_step_unchecked(
    emb: &mut EmbeddingMatrix,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    grad: &mut [f64],
) -> f64 {
    let d = emb.dim;
    grad.fill(0.0);
    let h = &mut emb.input[center * d..(center + 1) * d];
    let out = &mut emb.output;
    let mut loss = apply_target(h, &mut out[context * d..(context + 1) * d], grad, true, lr);
    for &neg in negatives {
        loss += apply_target(h, &mut out[neg * d..(neg + 1) * d], grad, false, lr);
    }
    axpy(lr, grad, h);
    loss
}

/// How training work is scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TrainingMode {
    /// One thread, bit-for-bit reproducible for a fixed seed.
    #[default]
    Deterministic,
    /// Walks sharded across threads that update shared parameters without locks.
    Hogwild { threads: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub initial_lr: f64,
    pub noise_exponent: f64,
    pub seed: u64,
    pub mode: TrainingMode,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        Self {
            window: 20,
            epochs: 100,
            negatives: 5,
            initial_lr: 0.025,
            noise_exponent: 0.75,
            seed: 0,
            mode: TrainingMode::Deterministic,
        }
    }
}

impl SgnsConfig {
    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::validation("window must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be at least 1"));
        }
        if self.negatives == 0 {
            return Err(Error::validation("negatives must be at least 1"));
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return Err(Error::validation("initial learning rate must be positive"));
        }
        if let TrainingMode::Hogwild { threads: 0 } = self.mode {
            return Err(Error::validation("hogwild mode needs at least one thread"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingStats {
    /// Center-context pairs processed over all epochs.
    pub pairs: u64,
    /// Mean pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Center-context pairs one pass over `walk` yields with a `window`-sized context.
pub fn pairs_in_walk(len: usize, window: usize) -> u64 {
    (0..len)
        .map(|i| (i.saturating_sub(window)..(i + window + 1).min(len)).len() as u64 - 1)
        .sum()
}

fn learning_rate(initial: f64, done: u64, total: u64) -> f64 {
    let progress = done as f64 / total.max(1) as f64;
    initial * (1.0 - 0.99 * progress.min(1.0))
}

/// Draws `count` noise nodes distinct from `context`.
///
/// A draw equal to the context is retried a bounded number of times; when
/// the noise distribution only covers the context node, no negatives are drawn.
fn draw_negatives(
    noise: &NoiseDistribution,
    context: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<usize>,
) {
    const MAX_RETRIES: usize = 64;
    out.clear();
    if noise.support() == 1 && noise.probabilities()[context] > 0.0 {
        return;
    }
    for _ in 0..count {
        for _ in 0..MAX_RETRIES {
            let candidate = noise.sample(rng);
            if candidate != context {
                out.push(candidate);
                break;
            }
        }
    }
}

pub fn train_sgns(
    corpus: &WalkCorpus,
    node_count: usize,
    dim: usize,
    config: &SgnsConfig,
) -> Result<EmbeddingMatrix> {
    train_sgns_with_stats(corpus, node_count, dim, config, None).map(|(emb, _)| emb)
}

/// Trains embeddings, stopping with [`Error::DeadlineExceeded`] once `deadline` passes.
pub fn train_sgns_with_stats(
    corpus: &WalkCorpus,
    node_count: usize,
    dim: usize,
    config: &SgnsConfig,
    deadline: Option<Instant>,
) -> Result<(EmbeddingMatrix, TrainingStats)> {
    config.validate()?;
    if dim == 0 {
        return Err(Error::validation("embedding dimension must be at least 1"));
    }
    let noise = build_noise_table(corpus, node_count, config.noise_exponent)?;
    let mut init_rng = rng::stream(config.seed, &[0]);
    let emb = EmbeddingMatrix::initialized(node_count, dim, &mut init_rng);
    let per_epoch: u64 = corpus
        .walks
        .iter()
        .map(|w| pairs_in_walk(w.len(), config.window))
        .sum();
    let total = per_epoch * config.epochs as u64;
    match config.mode {
        TrainingMode::Deterministic => train_serial(emb, corpus, &noise, config, total, deadline),
        TrainingMode::Hogwild { threads } => {
            train_hogwild(emb, corpus, &noise, config, total, threads, deadline)
        }
    }
}

fn check_deadline(deadline: Option<Instant>) -> Result<()> {
    match deadline {
        Some(d) if Instant::now() >= d => Err(Error::DeadlineExceeded("embedding training")),
        _ => Ok(()),
    }
}

fn train_serial(
    mut emb: EmbeddingMatrix,
    corpus: &WalkCorpus,
    noise: &NoiseDistribution,
    config: &SgnsConfig,
    total: u64,
    deadline: Option<Instant>,
) -> Result<(EmbeddingMatrix, TrainingStats)> {
    let mut stats = TrainingStats::default();
    let mut grad = vec![0.0; emb.dim];
    let mut negatives = Vec::with_capacity(config.negatives);
    for epoch in 0..config.epochs {
        let mut rng = rng::stream(config.seed, &[1, epoch as u64]);
        let (mut loss_sum, mut epoch_pairs) = (0.0, 0u64);
        for walk in &corpus.walks {
            check_deadline(deadline)?;
            for (i, &center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window + 1).min(walk.len());
                for (j, &context) in walk.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let lr = learning_rate(config.initial_lr, stats.pairs, total);
                    draw_negatives(noise, context, config.negatives, &mut rng, &mut negatives);
                    loss_sum += pair_step_unchecked(&mut emb, center, context, &negatives, lr, &mut grad);
                    stats.pairs += 1;
                    epoch_pairs += 1;
                }
            }
        }
        stats.epoch_losses.push(loss_sum / epoch_pairs.max(1) as f64);
    }
    Ok((emb, stats))
}

/// Parameters shared between hogwild workers. Relaxed atomics give racy but
/// well-defined reads and writes of individual entries.
struct SharedParams {
    dim: usize,
    input: Vec<AtomicU64>,
    output: Vec<AtomicU64>,
}

impl SharedParams {
    fn from(emb: &EmbeddingMatrix) -> Self {
        let wrap = |v: &[f64]| v.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
        Self {
            dim: emb.dim,
            input: wrap(&emb.input),
            output: wrap(&emb.output),
        }
    }

    fn load(cells: &[AtomicU64], row: usize, dim: usize, buf: &mut [f64]) {
        for (b, cell) in buf.iter_mut().zip(&cells[row * dim..(row + 1) * dim]) {
            *b = f64::from_bits(cell.load(Ordering::Relaxed));
        }
    }

    fn store(cells: &[AtomicU64], row: usize, dim: usize, buf: &[f64]) {
        for (b, cell) in buf.iter().zip(&cells[row * dim..(row + 1) * dim]) {
            cell.store(b.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_matrix(self, node_count: usize) -> EmbeddingMatrix {
        let unwrap = |v: Vec<AtomicU64>| v.into_iter().map(|c| f64::from_bits(c.into_inner())).collect();
        EmbeddingMatrix {
            node_count,
            dim: self.dim,
            input: unwrap(self.input),
            output: unwrap(self.output),
        }
    }
}

fn train_hogwild(
    emb: EmbeddingMatrix,
    corpus: &WalkCorpus,
    noise: &NoiseDistribution,
    config: &SgnsConfig,
    total: u64,
    threads: usize,
    deadline: Option<Instant>,
) -> Result<(EmbeddingMatrix, TrainingStats)> {
    let node_count = emb.node_count;
    let dim = emb.dim;
    let shared = SharedParams::from(&emb);
    let done = AtomicU64::new(0);
    let shard_len = corpus.walks.len().div_ceil(threads).max(1);
    let mut stats = TrainingStats::default();

    for epoch in 0..config.epochs {
        let results: Vec<Result<(f64, u64)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = corpus
                .walks
                .chunks(shard_len)
                .enumerate()
                .map(|(shard, walks)| {
                    let (shared, done) = (&shared, &done);
                    scope.spawn(move || -> Result<(f64, u64)> {
                        let mut rng = rng::stream(config.seed, &[2, epoch as u64, shard as u64]);
                        let mut h = vec![0.0; dim];
                        let mut row = vec![0.0; dim];
                        let mut grad = vec![0.0; dim];
                        let mut negatives = Vec::with_capacity(config.negatives);
                        let (mut loss_sum, mut pairs) = (0.0, 0u64);
                        for walk in walks {
                            check_deadline(deadline)?;
                            for (i, &center) in walk.iter().enumerate() {
                                let lo = i.saturating_sub(config.window);
                                let hi = (i + config.window + 1).min(walk.len());
                                for (j, &context) in walk.iter().enumerate().take(hi).skip(lo) {
                                    if j == i {
                                        continue;
                                    }
                                    let lr = learning_rate(
                                        config.initial_lr,
                                        done.fetch_add(1, Ordering::Relaxed),
                                        total,
                                    );
                                    draw_negatives(noise, context, config.negatives, &mut rng, &mut negatives);
                                    SharedParams::load(&shared.input, center, dim, &mut h);
                                    grad.fill(0.0);
                                    for (k, &target) in std::iter::once(&context).chain(&negatives).enumerate() {
                                        SharedParams::load(&shared.output, target, dim, &mut row);
                                        loss_sum += apply_target(&h, &mut row, &mut grad, k == 0, lr);
                                        SharedParams::store(&shared.output, target, dim, &row);
                                    }
                                    axpy(lr, &grad, &mut h);
                                    SharedParams::store(&shared.input, center, dim, &h);
                                    pairs += 1;
                                }
                            }
                        }
                        Ok((loss_sum, pairs))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("hogwild worker panicked"))
                .collect()
        });
        let (mut loss_sum, mut pairs) = (0.0, 0u64);
        for r in results {
            let (l, p) = r?;
            loss_sum += l;
            pairs += p;
        }
        stats.pairs += pairs;
        stats.epoch_losses.push(loss_sum / pairs.max(1) as f64);
    }
    Ok((shared.into_matrix(node_count), stats))
}

/// Embeddings as written for a graph: rows in dense id order under the graph's names.
pub fn write_embeddings<W: Write>(emb: &EmbeddingMatrix, out: W, graph: &Graph) -> Result<()> {
    emb.write_text(out, graph.names())
}
