//! Uniform and second-order biased (return / in-out parameterized) walks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::walks::{sample_corpus, WalkCorpus, WalkPolicy};

/// Return parameter `p` and in-out parameter `q` of the second-order walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasParams {
    pub return_param: f64,
    pub inout_param: f64,
}

impl BiasParams {
    pub fn new(return_param: f64, inout_param: f64) -> Result<Self> {
        for (name, v) in [("p", return_param), ("q", inout_param)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            return_param,
            inout_param,
        })
    }

    /// `p = q = 1`: every bias factor is 1.
    pub fn uniform() -> Self {
        Self {
            return_param: 1.0,
            inout_param: 1.0,
        }
    }
}

/// Unnormalized transition weights from `current`, given the node visited before it.
pub fn transition_weights(
    graph: &Graph,
    previous: Option<usize>,
    current: usize,
    params: BiasParams,
) -> Vec<f64> {
    let neighbors = graph.neighbors(current);
    let weights = graph.edge_weights(current);
    match previous {
        None => weights.to_vec(),
        Some(t) => neighbors
            .iter()
            .zip(weights)
            .map(|(&x, &w)| {
                let bias = if x == t {
                    1.0 / params.return_param
                } else if graph.has_edge(t, x) {
                    1.0
                } else {
                    1.0 / params.inout_param
                };
                w * bias
            })
            .collect(),
    }
}

fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if draw < w {
            return i;
        }
        draw -= w;
    }
    // Only reachable through rounding at the upper end.
    weights.len() - 1
}

/// Second-order biased walk policy.
#[derive(Debug, Clone, Copy)]
pub struct BiasedWalker<'a> {
    pub graph: &'a Graph,
    pub params: BiasParams,
}

impl WalkPolicy for BiasedWalker<'_> {
    fn walk(&self, start: usize, length: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start);
        let mut previous = None;
        let mut current = start;
        while walk.len() < length {
            let neighbors = self.graph.neighbors(current);
            if neighbors.is_empty() {
                break;
            }
            let weights = transition_weights(self.graph, previous, current, self.params);
            let next = neighbors[sample_index(&weights, rng)];
            walk.push(next);
            previous = Some(current);
            current = next;
        }
        walk
    }
}

pub fn biased_walk(
    graph: &Graph,
    start: usize,
    walk_length: usize,
    params: BiasParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    graph.check_node(start)?;
    if walk_length == 0 {
        return Err(Error::validation("walk length must be at least 1"));
    }
    Ok(BiasedWalker { graph, params }.walk(start, walk_length, rng))
}

pub fn baseline_corpus(
    graph: &Graph,
    walks_per_node: usize,
    walk_length: usize,
    params: BiasParams,
    seed: u64,
) -> Result<WalkCorpus> {
    let params = BiasParams::new(params.return_param, params.inout_param)?;
    sample_corpus(&BiasedWalker { graph, params }, graph, walks_per_node, walk_length, seed)
}

/// Uniform random walks; identical to [`baseline_corpus`] with `p = q = 1`.
pub fn uniform_corpus(
    graph: &Graph,
    walks_per_node: usize,
    walk_length: usize,
    seed: u64,
) -> Result<WalkCorpus> {
    baseline_corpus(graph, walks_per_node, walk_length, BiasParams::uniform(), seed)
}
