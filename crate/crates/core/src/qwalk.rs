//! Reward shaping from label confidences, tabular Q-learning over the graph
//! MDP, and Q-guided walk generation.
//!
//! Every node is a state and each out-edge an action with a deterministic
//! transition to its head. The reward for traversing `u -> v` is the negative
//! L1 distance between the confidence rows of `v` and `u`.

use rand::distributions::Open01;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::walks::{sample_corpus, WalkCorpus, WalkPolicy};

/// `-sum_l |C(v, l) - C(u, l)|`.
pub fn reward(c: &ConfidenceMatrix, u: usize, v: usize) -> f64 {
    -c.row(v)
        .iter()
        .zip(c.row(u))
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// Reward of every arc, indexed like [`Graph::arc_targets`].
pub fn arc_rewards(graph: &Graph, c: &ConfidenceMatrix) -> Result<Vec<f64>> {
    if c.node_count() != graph.node_count() {
        return Err(Error::validation(format!(
            "confidence matrix has {} rows but graph has {} nodes",
            c.node_count(),
            graph.node_count()
        )));
    }
    let mut rewards = Vec::with_capacity(graph.arc_count());
    for u in 0..graph.node_count() {
        rewards.extend(graph.neighbors(u).iter().map(|&v| reward(c, u, v)));
    }
    Ok(rewards)
}

/// Q-values per (node, out-edge), aligned with the graph's adjacency order.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    offsets: Vec<usize>,
    values: Vec<f64>,
    epoch: usize,
    learning_rate: f64,
    discount: f64,
}

impl QTable {
    /// All-zero table at epoch 0 with learning rate `alpha_0`.
    pub fn new(graph: &Graph, alpha_0: f64, gamma: f64) -> Result<Self> {
        if !(alpha_0.is_finite() && alpha_0 > 0.0) {
            return Err(Error::validation(format!(
                "initial learning rate must be positive, got {alpha_0}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::validation(format!(
                "discount must lie in [0, 1], got {gamma}"
            )));
        }
        let offsets = (0..=graph.node_count())
            .map(|u| {
                if u == graph.node_count() {
                    graph.arc_count()
                } else {
                    graph.edge_range(u).start
                }
            })
            .collect();
        Ok(Self {
            offsets,
            values: vec![0.0; graph.arc_count()],
            epoch: 0,
            learning_rate: alpha_0,
            discount: gamma,
        })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.values[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    fn row_max(&self, u: usize) -> f64 {
        let row = self.row(u);
        if row.is_empty() {
            0.0
        } else {
            row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    }

    /// Index of the best action at `u`; ties go to the lowest index.
    pub fn best_action(&self, u: usize) -> Option<usize> {
        argmax(self.row(u).iter().copied())
    }

    /// Advances the epoch counter and learning rate, then applies the
    /// Q-update to every (node, edge) pair in ascending order, in place.
    ///
    /// Returns the largest absolute change made during the sweep.
    pub fn sweep(&mut self, graph: &Graph, rewards: &[f64]) -> f64 {
        debug_assert_eq!(rewards.len(), self.values.len());
        self.epoch += 1;
        self.learning_rate /= 1.0 + self.epoch as f64;
        let alpha = self.learning_rate;
        let targets = graph.arc_targets();
        let mut max_delta: f64 = 0.0;
        for arc in 0..self.values.len() {
            let next = targets[arc];
            let target = rewards[arc] + self.discount * self.row_max(next);
            let delta = alpha * (target - self.values[arc]);
            self.values[arc] += delta;
            max_delta = max_delta.max(delta.abs());
        }
        max_delta
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

pub fn init_q(graph: &Graph, alpha_0: f64, gamma: f64) -> Result<QTable> {
    QTable::new(graph, alpha_0, gamma)
}

/// One learning-rate update followed by one full in-place sweep.
pub fn q_epoch(mut q: QTable, graph: &Graph, c: &ConfidenceMatrix) -> Result<QTable> {
    check_table(&q, graph)?;
    let rewards = arc_rewards(graph, c)?;
    q.sweep(graph, &rewards);
    Ok(q)
}

/// Fresh table trained for `epochs` sweeps.
pub fn train_q(
    graph: &Graph,
    c: &ConfidenceMatrix,
    alpha_0: f64,
    gamma: f64,
    epochs: usize,
) -> Result<QTable> {
    if epochs == 0 {
        return Err(Error::validation("Q-learning needs at least one epoch"));
    }
    let mut q = QTable::new(graph, alpha_0, gamma)?;
    let rewards = arc_rewards(graph, c)?;
    for _ in 0..epochs {
        q.sweep(graph, &rewards);
    }
    Ok(q)
}

fn check_table(q: &QTable, graph: &Graph) -> Result<()> {
    if q.node_count() != graph.node_count() || q.values.len() != graph.arc_count() {
        return Err(Error::validation("Q-table does not match graph shape"));
    }
    Ok(())
}

/// How the greedy branch of the walk policy ranks candidate edges at `u`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExploitRule {
    /// Take the edge with the highest `Q(u, a)`.
    #[default]
    #[serde(rename = "current")]
    CurrentNode,
    /// Take the edge whose head has the highest `max_a' Q(v, a')`.
    #[serde(rename = "lookahead")]
    Lookahead,
}

impl std::str::FromStr for ExploitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "current" => Ok(Self::CurrentNode),
            "lookahead" => Ok(Self::Lookahead),
            other => Err(Error::validation(format!(
                "unknown exploit rule `{other}` (expected current|lookahead)"
            ))),
        }
    }
}

impl std::fmt::Display for ExploitRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::CurrentNode => "current",
            Self::Lookahead => "lookahead",
        })
    }
}

/// Next node from `u`: the greedy edge with probability `p_q`, otherwise a
/// uniformly random out-neighbor. `None` at a sink.
pub fn choose_action(
    q: &QTable,
    graph: &Graph,
    u: usize,
    p_q: f64,
    rule: ExploitRule,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let neighbors = graph.neighbors(u);
    if neighbors.is_empty() {
        return None;
    }
    let draw: f64 = rng.sample(Open01);
    let index = if draw <= p_q {
        match rule {
            ExploitRule::CurrentNode => q.best_action(u),
            ExploitRule::Lookahead => argmax(neighbors.iter().map(|&v| q.row_max(v))),
        }
        .expect("non-empty action set")
    } else {
        rng.gen_range(0..neighbors.len())
    };
    Some(neighbors[index])
}

/// Q-guided walk policy.
#[derive(Debug, Clone, Copy)]
pub struct QWalker<'a> {
    pub q: &'a QTable,
    pub graph: &'a Graph,
    pub p_q: f64,
    pub rule: ExploitRule,
}

impl QWalker<'_> {
    pub fn new<'a>(q: &'a QTable, graph: &'a Graph, p_q: f64, rule: ExploitRule) -> Result<QWalker<'a>> {
        if !(0.0..=1.0).contains(&p_q) {
            return Err(Error::validation(format!(
                "exploitation probability must lie in [0, 1], got {p_q}"
            )));
        }
        check_table(q, graph)?;
        Ok(QWalker { q, graph, p_q, rule })
    }
}

impl WalkPolicy for QWalker<'_> {
    fn walk(&self, start: usize, length: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start);
        let mut current = start;
        while walk.len() < length {
            match choose_action(self.q, self.graph, current, self.p_q, self.rule, rng) {
                Some(next) => {
                    walk.push(next);
                    current = next;
                }
                None => break,
            }
        }
        walk
    }
}

pub fn generate_walk(
    q: &QTable,
    graph: &Graph,
    start: usize,
    walk_length: usize,
    p_q: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    graph.check_node(start)?;
    if walk_length == 0 {
        return Err(Error::validation("walk length must be at least 1"));
    }
    Ok(QWalker::new(q, graph, p_q, ExploitRule::CurrentNode)?.walk(start, walk_length, rng))
}

pub fn generate_corpus(
    q: &QTable,
    graph: &Graph,
    walks_per_node: usize,
    walk_length: usize,
    p_q: f64,
    rule: ExploitRule,
    seed: u64,
) -> Result<WalkCorpus> {
    let walker = QWalker::new(q, graph, p_q, rule)?;
    sample_corpus(&walker, graph, walks_per_node, walk_length, seed)
}
