//! End-to-end runs: split, confidence, Q-learning, walks, embeddings, evaluation.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baseline::{baseline_corpus, BiasParams};
use crate::config::{EvalScope, ExperimentConfig, Policy};
use crate::confidence::{learn_confidence, ConfidenceMatrix};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, evaluate_fold, fold_assignment, fold_split, F1Report};
use crate::graph::{parse_edges, Graph, NodeIndex};
use crate::labels::{parse_labels_with, split_labelled, LabelAssignment, LabelledSplit};
use crate::qwalk::{generate_corpus, train_q};
use crate::rng::{derive_seed, stage_seed, Stage};
use crate::sgns::{train_sgns_with_stats, EmbeddingMatrix, SgnsConfig, TrainingMode};
use crate::walks::WalkCorpus;

/// A graph with its ground-truth labels, sharing one node index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub labels: LabelAssignment,
}

impl Dataset {
    /// Parses edge-list and label texts. Nodes that only appear in the label
    /// text become isolated nodes.
    pub fn parse(edges: &str, labels: &str, directed: bool) -> Result<Self> {
        let mut index = NodeIndex::new();
        let records = parse_edges(edges, &mut index)?;
        let labels = parse_labels_with(labels, &mut index)?;
        let graph = Graph::from_edges(index, directed, records)?;
        Ok(Self { graph, labels })
    }

    pub fn load(graph_path: &Path, labels_path: &Path, directed: bool) -> Result<Self> {
        let edges = fs::read_to_string(graph_path)?;
        let labels = fs::read_to_string(labels_path)?;
        Self::parse(&edges, &labels, directed)
    }

    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let (Some(g), Some(l)) = (&config.graph_path, &config.labels_path) else {
            return Err(Error::Config("graph_path and labels_path are required".into()));
        };
        Self::load(g, l, config.directed).map_err(|e| e.in_stage("load"))
    }

    pub fn labelled_nodes(&self) -> BTreeSet<usize> {
        self.labels.labelled_nodes().collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory receiving the resolved config and all artifacts.
    pub out_dir: Option<PathBuf>,
    /// Abort the run once this instant passes.
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub policy: Policy,
    pub settings: ExperimentConfig,
    pub report: F1Report,
    /// Mean skip-gram loss of the first and last epoch of every trained embedding.
    pub loss_trace: Vec<(f64, f64)>,
}

/// Intermediate products of one embedding.
struct Artifacts {
    confidence: Option<ConfidenceMatrix>,
    corpus: WalkCorpus,
    embedding: EmbeddingMatrix,
    losses: (f64, f64),
}

fn sgns_config(config: &ExperimentConfig, seed: u64) -> SgnsConfig {
    SgnsConfig {
        window: config.w_s,
        epochs: config.e,
        negatives: config.negatives,
        initial_lr: config.lr,
        noise_exponent: config.noise_exponent,
        seed,
        mode: if config.threads > 1 {
            TrainingMode::Hogwild {
                threads: config.threads,
            }
        } else {
            TrainingMode::Deterministic
        },
    }
}

fn embed(
    graph: &Graph,
    corpus: WalkCorpus,
    confidence: Option<ConfidenceMatrix>,
    config: &ExperimentConfig,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<Artifacts> {
    let (embedding, stats) = train_sgns_with_stats(
        &corpus,
        graph.node_count(),
        config.d,
        &sgns_config(config, seed),
        deadline,
    )
    .map_err(|e| e.in_stage("embedding"))?;
    let first = stats.epoch_losses.first().copied().unwrap_or(f64::NAN);
    let last = stats.epoch_losses.last().copied().unwrap_or(f64::NAN);
    Ok(Artifacts {
        confidence,
        corpus,
        embedding,
        losses: (first, last),
    })
}

/// Confidence, Q-learning, Q-walk corpus and embedding for one visible split.
fn qwalk_embedding(
    data: &Dataset,
    split: &LabelledSplit,
    config: &ExperimentConfig,
    walk_seed: u64,
    embed_seed: u64,
    deadline: Option<Instant>,
) -> Result<Artifacts> {
    let confidence = learn_confidence(&data.graph, &data.labels, split, config.k_hn, config.t)
        .map_err(|e| e.in_stage("confidence"))?;
    let q = train_q(&data.graph, &confidence, config.alpha_0, config.gamma, config.j)
        .map_err(|e| e.in_stage("q-learning"))?;
    let corpus = generate_corpus(
        &q,
        &data.graph,
        config.r,
        config.w_l,
        config.p_q,
        config.exploit,
        walk_seed,
    )
    .map_err(|e| e.in_stage("walks"))?;
    embed(&data.graph, corpus, Some(confidence), config, embed_seed, deadline)
}

fn baseline_embedding(
    data: &Dataset,
    config: &ExperimentConfig,
    deadline: Option<Instant>,
) -> Result<Artifacts> {
    let params = match config.policy {
        Policy::Uniform => BiasParams::uniform(),
        _ => BiasParams::new(config.p, config.q).map_err(|e| e.in_stage("walks"))?,
    };
    let corpus = baseline_corpus(
        &data.graph,
        config.r,
        config.w_l,
        params,
        stage_seed(config.seed, Stage::Walks),
    )
    .map_err(|e| e.in_stage("walks"))?;
    embed(
        &data.graph,
        corpus,
        None,
        config,
        stage_seed(config.seed, Stage::Embedding),
        deadline,
    )
}

fn write_artifacts(dir: &Path, data: &Dataset, art: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(c) = &art.confidence {
        c.write_csv(BufWriter::new(File::create(dir.join("confidence.csv"))?), &data.graph, &data.labels)?;
    }
    art.corpus
        .write_text(BufWriter::new(File::create(dir.join("walks.txt"))?), &data.graph)?;
    art.embedding
        .write_text(BufWriter::new(File::create(dir.join("embeddings.txt"))?), data.graph.names())?;
    Ok(())
}

fn write_node_map(dir: &Path, graph: &Graph) -> Result<()> {
    let mut out = BufWriter::new(File::create(dir.join("nodes.tsv"))?);
    for (id, name) in graph.names().names().iter().enumerate() {
        writeln!(out, "{id}\t{name}")?;
    }
    out.flush()?;
    Ok(())
}

/// Runs the configured policy end to end and scores it with cross-validation.
///
/// With `eval_scope = all` and the Q-walk policy, each fold trains its own
/// embedding with visible labels drawn from the training folds only, so no
/// test node ever informs the walks that embed it.
pub fn run_pipeline(config: &ExperimentConfig, data: &Dataset, options: &RunOptions) -> Result<RunReport> {
    config.validate()?;
    if data.labels.is_empty() {
        return Err(Error::validation("dataset has no labelled nodes"));
    }
    if let Some(dir) = &options.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.resolved"), config.to_toml_string())?;
        write_node_map(dir, &data.graph)?;
    }
    let split_seed = stage_seed(config.seed, Stage::Split);
    let cv_seed = stage_seed(config.seed, Stage::CrossValidation);
    let labelled = data.labelled_nodes();
    let mut loss_trace = Vec::new();

    let report = match (config.policy, config.eval_scope) {
        (Policy::Qwalk, EvalScope::All) => {
            let folds = fold_assignment(&labelled, config.folds, cv_seed)
                .map_err(|e| e.in_stage("evaluation"))?;
            let mut per_fold = Vec::with_capacity(folds.len());
            for f in 0..folds.len() {
                let (train, test) = fold_split(&folds, f);
                let pool: BTreeSet<usize> = train.iter().copied().collect();
                let ratio = (config.v_l * labelled.len() as f64 / pool.len() as f64).min(1.0);
                let split = split_labelled(
                    &data.labels.restricted_to(&pool),
                    ratio,
                    derive_seed(split_seed, &[f as u64]),
                )
                .map_err(|e| e.in_stage("split"))?;
                let art = qwalk_embedding(
                    data,
                    &split,
                    config,
                    derive_seed(stage_seed(config.seed, Stage::Walks), &[f as u64]),
                    derive_seed(stage_seed(config.seed, Stage::Embedding), &[f as u64]),
                    options.deadline,
                )?;
                let score = evaluate_fold(&art.embedding, &data.labels, &train, test, config.k_nn)
                    .map_err(|e| e.in_stage("evaluation"))?;
                if let Some(dir) = &options.out_dir {
                    write_artifacts(&dir.join(format!("fold-{f}")), data, &art)?;
                }
                loss_trace.push(art.losses);
                per_fold.push(score);
            }
            F1Report::from_folds(per_fold, config.k_nn)
        }
        (policy, scope) => {
            let split = split_labelled(&data.labels, config.v_l, split_seed)
                .map_err(|e| e.in_stage("split"))?;
            let art = match policy {
                Policy::Qwalk => qwalk_embedding(
                    data,
                    &split,
                    config,
                    stage_seed(config.seed, Stage::Walks),
                    stage_seed(config.seed, Stage::Embedding),
                    options.deadline,
                )?,
                _ => baseline_embedding(data, config, options.deadline)?,
            };
            let eligible = match scope {
                EvalScope::All => labelled,
                EvalScope::Hidden => split.hidden.clone(),
            };
            let report = cross_validate(&art.embedding, &data.labels, &eligible, config.folds, config.k_nn, cv_seed)
                .map_err(|e| e.in_stage("evaluation"))?;
            if let Some(dir) = &options.out_dir {
                write_artifacts(dir, data, &art)?;
            }
            loss_trace.push(art.losses);
            report
        }
    };

    let run = RunReport {
        policy: config.policy,
        settings: config.clone(),
        report,
        loss_trace,
    };
    if let Some(dir) = &options.out_dir {
        let file = BufWriter::new(File::create(dir.join("report.json"))?);
        serde_json::to_writer_pretty(file, &run)?;
    }
    Ok(run)
}

/// One row of a parameter sweep: means over seeds for one value and policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: String,
    pub policy: Policy,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub seeds: usize,
}

/// Policies compared by [`sweep`].
pub const SWEEP_POLICIES: [Policy; 2] = [Policy::Qwalk, Policy::Biased];

/// Runs every `value x seed x policy` cell and averages over seeds.
pub fn sweep(
    base: &ExperimentConfig,
    data: &Dataset,
    parameter: &str,
    values: &[String],
    seeds: &[u64],
    policies: &[Policy],
    options: &RunOptions,
) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::validation("sweep needs at least one seed"));
    }
    let mut cells = Vec::new();
    for value in values {
        for &policy in policies {
            for &seed in seeds {
                let mut config = base.clone();
                config.set(parameter, value)?;
                config.policy = policy;
                config.seed = seed;
                config.validate()?;
                cells.push((value.clone(), policy, config));
            }
        }
    }
    let reports = cells
        .par_iter()
        .map(|(_, _, config)| run_pipeline(config, data, &RunOptions { out_dir: None, ..options.clone() }))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (chunk, cell) in reports.chunks(seeds.len()).zip(cells.chunks(seeds.len())) {
        let n = chunk.len() as f64;
        rows.push(SweepRow {
            parameter: parameter.to_string(),
            value: cell[0].0.clone(),
            policy: cell[0].1,
            macro_f1: chunk.iter().map(|r| r.report.macro_f1).sum::<f64>() / n,
            micro_f1: chunk.iter().map(|r| r.report.micro_f1).sum::<f64>() / n,
            seeds: seeds.len(),
        });
    }
    if let Some(dir) = &options.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.resolved"), base.to_toml_string())?;
        write_sweep_csv(File::create(dir.join("sweep.csv"))?, &rows)?;
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
