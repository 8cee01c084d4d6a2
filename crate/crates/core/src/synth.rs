//! Planted-partition graphs with community labels.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeIndex};
use crate::labels::LabelAssignment;
use crate::rng;

/// Undirected graph of `communities` blocks of `per_community` nodes. Node
/// `u` belongs to block `u / per_community` and is labelled `c<block>`.
/// Each pair is joined independently with `p_in` inside a block and `p_out` across.
pub fn synth_graph(
    communities: usize,
    per_community: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, LabelAssignment)> {
    if communities == 0 || per_community == 0 {
        return Err(Error::validation("communities and community size must be positive"));
    }
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(Error::validation(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    let n = communities * per_community;
    let mut rng = rng::stream(seed, &[]);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if u / per_community == v / per_community { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    let graph = Graph::from_edges(NodeIndex::sequential(n), false, edges)?;
    let mut labels = LabelAssignment::new();
    for c in 0..communities {
        labels.add_label(&format!("c{c}"));
    }
    for u in 0..n {
        labels.assign(u, u / per_community)?;
    }
    Ok((graph, labels))
}

/// Labels written as `node label` lines.
pub fn labels_to_text(graph: &Graph, labels: &LabelAssignment) -> String {
    let mut out = String::new();
    for (u, ls) in labels.iter() {
        out.push_str(graph.name(u));
        for &l in ls {
            out.push(' ');
            out.push_str(labels.label_name(l));
        }
        out.push('\n');
    }
    out
}
