//! Node embeddings from label-confidence guided Q-walks.
//!
//! The pipeline learns per-node label confidences on a partially labelled
//! graph, turns them into edge rewards for tabular Q-learning, samples walks
//! that mostly follow the learned Q-values, trains skip-gram embeddings on
//! those walks and scores them with cross-validated k-NN classification.
//! Uniform and second-order biased walks are provided as baselines.

pub mod baseline;
pub mod confidence;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod labels;
pub mod pipeline;
pub mod qwalk;
pub mod rng;
pub mod sgns;
pub mod synth;
pub mod walks;

pub use baseline::{baseline_corpus, biased_walk, uniform_corpus, BiasParams};
pub use confidence::{init_confidence, learn_confidence, step_confidence, ConfidenceMatrix};
pub use config::{EvalScope, ExperimentConfig, Policy};
pub use error::{Error, Result};
pub use eval::{cross_validate, knn_predict, macro_micro_f1, F1Report};
pub use graph::{parse_edge_list, Graph, NodeIndex};
pub use labels::{parse_labels, split_labelled, LabelAssignment, LabelledSplit};
pub use pipeline::{run_pipeline, sweep, Dataset, RunOptions, RunReport, SweepRow};
pub use qwalk::{
    choose_action, generate_corpus, generate_walk, init_q, q_epoch, reward, train_q, ExploitRule, QTable,
};
pub use sgns::{build_noise_table, sgns_pair_step, train_sgns, EmbeddingMatrix, SgnsConfig};
pub use synth::synth_graph;
pub use walks::WalkCorpus;
