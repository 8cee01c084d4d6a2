//! Label-confidence learning by repeated k-hop neighborhood averaging.
//!
//! Visible labelled nodes are pinned to their indicator rows. Every other
//! node starts at zero and, at each iteration, takes the mean of the previous
//! iteration's rows over its k-hop neighborhood.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::labels::{LabelAssignment, LabelledSplit};

/// Dense node-by-label matrix of confidence values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMatrix {
    node_count: usize,
    label_count: usize,
    values: Vec<f64>,
    iteration: usize,
}

impl ConfidenceMatrix {
    /// Wraps a row-major value buffer; used for tests and externally computed confidences.
    pub fn from_rows(label_count: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * label_count);
        for (u, row) in rows.iter().enumerate() {
            if row.len() != label_count {
                return Err(Error::validation(format!(
                    "row {u} has {} entries, expected {label_count}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::validation(format!("row {u} has entries outside [0, 1]")));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            node_count: rows.len(),
            label_count,
            values,
            iteration: 0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.values[u * self.label_count..(u + 1) * self.label_count]
    }

    pub fn get(&self, u: usize, label: usize) -> f64 {
        self.values[u * self.label_count + label]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Writes `node,<label...>` CSV with one row per node.
    pub fn write_csv<W: Write>(&self, out: W, graph: &Graph, labels: &LabelAssignment) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["node".to_string()];
        header.extend(labels.universe().iter().cloned());
        writer.write_record(&header)?;
        for u in 0..self.node_count {
            let mut record = vec![graph.name(u).to_string()];
            record.extend(self.row(u).iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Indicator rows for visible nodes, zeros elsewhere.
pub fn init_confidence(
    graph: &Graph,
    labels: &LabelAssignment,
    split: &LabelledSplit,
) -> Result<ConfidenceMatrix> {
    let n = graph.node_count();
    let label_count = labels.label_count();
    let mut values = vec![0.0; n * label_count];
    for &u in &split.visible {
        graph.check_node(u)?;
        let actual = labels.labels_of(u).ok_or_else(|| {
            Error::validation(format!("visible node {u} has no ground-truth labels"))
        })?;
        for &l in actual {
            values[u * label_count + l] = 1.0;
        }
    }
    Ok(ConfidenceMatrix {
        node_count: n,
        label_count,
        values,
        iteration: 0,
    })
}

fn neighborhoods(graph: &Graph, k_hn: usize) -> Vec<Vec<usize>> {
    (0..graph.node_count())
        .into_par_iter()
        .map(|u| graph.k_hop_vec(u, k_hn))
        .collect()
}

fn step_with(c: &ConfidenceMatrix, visible: &[bool], hoods: &[Vec<usize>]) -> ConfidenceMatrix {
    let width = c.label_count;
    let mut next = c.values.clone();
    if width > 0 {
        next.par_chunks_mut(width)
            .enumerate()
            .for_each(|(u, row)| {
                let hood = &hoods[u];
                if visible[u] || hood.is_empty() {
                    return;
                }
                row.fill(0.0);
                for &x in hood {
                    for (acc, prev) in row.iter_mut().zip(c.row(x)) {
                        *acc += prev;
                    }
                }
                let size = hood.len() as f64;
                for acc in row.iter_mut() {
                    *acc /= size;
                }
            });
    }
    ConfidenceMatrix {
        node_count: c.node_count,
        label_count: width,
        values: next,
        iteration: c.iteration + 1,
    }
}

/// One synchronous averaging iteration. Nodes with an empty neighborhood keep their row.
pub fn step_confidence(
    c: &ConfidenceMatrix,
    graph: &Graph,
    split: &LabelledSplit,
    k_hn: usize,
) -> Result<ConfidenceMatrix> {
    check_shape(c, graph, k_hn)?;
    let visible = split.visible_mask(graph.node_count());
    Ok(step_with(c, &visible, &neighborhoods(graph, k_hn)))
}

/// Initializes and runs `iterations` averaging steps.
pub fn learn_confidence(
    graph: &Graph,
    labels: &LabelAssignment,
    split: &LabelledSplit,
    k_hn: usize,
    iterations: usize,
) -> Result<ConfidenceMatrix> {
    let mut c = init_confidence(graph, labels, split)?;
    check_shape(&c, graph, k_hn)?;
    if iterations == 0 {
        return Ok(c);
    }
    let visible = split.visible_mask(graph.node_count());
    let hoods = neighborhoods(graph, k_hn);
    for _ in 0..iterations {
        c = step_with(&c, &visible, &hoods);
    }
    Ok(c)
}

fn check_shape(c: &ConfidenceMatrix, graph: &Graph, k_hn: usize) -> Result<()> {
    if k_hn == 0 {
        return Err(Error::validation("k_hn must be at least 1"));
    }
    if c.node_count != graph.node_count() {
        return Err(Error::validation(format!(
            "confidence matrix has {} rows but graph has {} nodes",
            c.node_count,
            graph.node_count()
        )));
    }
    Ok(())
}
