//! Walk corpora shared by every walk policy.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

/// Node sequences produced by a walk policy, `walks_per_node` per start node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
    pub walks_per_node: usize,
    pub walk_length: usize,
}

impl WalkCorpus {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// One walk per line, node names separated by spaces.
    pub fn write_text<W: Write>(&self, mut out: W, graph: &Graph) -> Result<()> {
        for walk in &self.walks {
            let mut first = true;
            for &u in walk {
                if !first {
                    out.write_all(b" ")?;
                }
                out.write_all(graph.name(u).as_bytes())?;
                first = false;
            }
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// A rule for extending a walk one step at a time.
pub trait WalkPolicy: Sync {
    /// Walk of at most `length` nodes beginning at `start`.
    fn walk(&self, start: usize, length: usize, rng: &mut ChaCha8Rng) -> Vec<usize>;
}

/// `walks_per_node` walks from every node, ordered round by round.
///
/// Walk `i` of start node `u` draws from its own stream keyed by
/// `(seed, i, u)`, so the corpus does not depend on scheduling.
pub fn sample_corpus<P: WalkPolicy>(
    policy: &P,
    graph: &Graph,
    walks_per_node: usize,
    walk_length: usize,
    seed: u64,
) -> Result<WalkCorpus> {
    if walks_per_node == 0 {
        return Err(Error::validation("walks per node must be at least 1"));
    }
    if walk_length == 0 {
        return Err(Error::validation("walk length must be at least 1"));
    }
    let n = graph.node_count();
    let walks = (0..walks_per_node * n)
        .into_par_iter()
        .map(|slot| {
            let (round, start) = (slot / n, slot % n);
            let mut rng = rng::stream(seed, &[round as u64, start as u64]);
            policy.walk(start, walk_length, &mut rng)
        })
        .collect();
    Ok(WalkCorpus {
        walks,
        walks_per_node,
        walk_length,
    })
}
