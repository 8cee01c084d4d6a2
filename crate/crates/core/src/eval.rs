//! k-nearest-neighbor node classification with cross-validated F1 scores.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelAssignment;
use crate::rng;
use crate::sgns::EmbeddingMatrix;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Top `label_count` labels by vote among the `k` nearest training nodes.
///
/// Neighbor ties go to the lower node id, label ties to the lower label id.
pub fn knn_predict(
    emb: &EmbeddingMatrix,
    train_ids: &[usize],
    truth: &LabelAssignment,
    query: usize,
    k: usize,
    label_count: usize,
) -> Result<BTreeSet<usize>> {
    if k == 0 || k > train_ids.len() {
        return Err(Error::validation(format!(
            "k_nn = {k} needs 1..={} training nodes",
            train_ids.len()
        )));
    }
    if query >= emb.node_count() {
        return Err(Error::NodeOutOfRange {
            node: query,
            node_count: emb.node_count(),
        });
    }
    let q = emb.input(query);
    let mut ranked: Vec<(f64, usize)> = train_ids
        .iter()
        .map(|&t| (squared_distance(q, emb.input(t)), t))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
    };
    if k < ranked.len() {
        ranked.select_nth_unstable_by(k - 1, by_distance);
        ranked.truncate(k);
    }
    ranked.sort_by(by_distance);

    let mut votes = vec![0usize; truth.label_count()];
    for &(_, t) in &ranked {
        let labels = truth
            .labels_of(t)
            .ok_or_else(|| Error::validation(format!("training node {t} has no labels")))?;
        for &l in labels {
            votes[l] += 1;
        }
    }
    let mut order: Vec<usize> = (0..votes.len()).collect();
    order.sort_by(|&a, &b| votes[b].cmp(&votes[a]).then(a.cmp(&b)));
    Ok(order.into_iter().take(label_count).collect())
}

/// Macro- and micro-averaged F1 over `label_count` labels.
///
/// Labels absent from both truth and predictions count as F1 = 0 in the macro average.
pub fn macro_micro_f1(
    predictions: &BTreeMap<usize, BTreeSet<usize>>,
    truth: &BTreeMap<usize, BTreeSet<usize>>,
    label_count: usize,
) -> Result<(f64, f64)> {
    if !predictions.keys().eq(truth.keys()) {
        return Err(Error::validation("predictions and truth cover different nodes"));
    }
    let (mut tp, mut fp, mut fneg) = (vec![0u64; label_count], vec![0u64; label_count], vec![0u64; label_count]);
    for (node, predicted) in predictions {
        let actual = &truth[node];
        for &l in predicted.union(actual) {
            if l >= label_count {
                return Err(Error::validation(format!("label id {l} outside universe")));
            }
            match (predicted.contains(&l), actual.contains(&l)) {
                (true, true) => tp[l] += 1,
                (true, false) => fp[l] += 1,
                (false, true) => fneg[l] += 1,
                (false, false) => unreachable!(),
            }
        }
    }
    let f1 = |tp: u64, fp: u64, fneg: u64| {
        let denom = 2 * tp + fp + fneg;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let macro_f1 = if label_count == 0 {
        0.0
    } else {
        (0..label_count).map(|l| f1(tp[l], fp[l], fneg[l])).sum::<f64>() / label_count as f64
    };
    let micro_f1 = f1(tp.iter().sum(), fp.iter().sum(), fneg.iter().sum());
    Ok((macro_f1, micro_f1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub macro_f1: f64,
    pub micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub per_fold: Vec<FoldScore>,
    pub k_nn: usize,
    pub folds: usize,
}

impl F1Report {
    pub fn from_folds(per_fold: Vec<FoldScore>, k_nn: usize) -> Self {
        let n = per_fold.len().max(1) as f64;
        Self {
            macro_f1: per_fold.iter().map(|f| f.macro_f1).sum::<f64>() / n,
            micro_f1: per_fold.iter().map(|f| f.micro_f1).sum::<f64>() / n,
            folds: per_fold.len(),
            per_fold,
            k_nn,
        }
    }
}

/// Shuffles `eligible` by `seed` and cuts it into `folds` parts whose sizes differ by at most one.
pub fn fold_assignment(eligible: &BTreeSet<usize>, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::validation("cross-validation needs at least 2 folds"));
    }
    if eligible.len() < folds {
        return Err(Error::validation(format!(
            "{} eligible nodes cannot fill {folds} folds",
            eligible.len()
        )));
    }
    let mut nodes: Vec<usize> = eligible.iter().copied().collect();
    nodes.shuffle(&mut rng::stream(seed, &[]));
    let (base, extra) = (nodes.len() / folds, nodes.len() % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(nodes[start..start + size].to_vec());
        start += size;
    }
    Ok(out)
}

/// Scores one held-out fold, predicting `|truth(u)|` labels for each test node.
pub fn evaluate_fold(
    emb: &EmbeddingMatrix,
    truth: &LabelAssignment,
    train: &[usize],
    test: &[usize],
    k: usize,
) -> Result<FoldScore> {
    if train.is_empty() {
        return Err(Error::validation("fold has an empty training set"));
    }
    let mut predictions = BTreeMap::new();
    let mut actual = BTreeMap::new();
    for &u in test {
        let labels = truth
            .labels_of(u)
            .ok_or_else(|| Error::validation(format!("test node {u} has no labels")))?;
        predictions.insert(u, knn_predict(emb, train, truth, u, k, labels.len())?);
        actual.insert(u, labels.clone());
    }
    let (macro_f1, micro_f1) = macro_micro_f1(&predictions, &actual, truth.label_count())?;
    Ok(FoldScore { macro_f1, micro_f1 })
}

/// Train and test node lists of fold `f`.
pub fn fold_split(assignment: &[Vec<usize>], f: usize) -> (Vec<usize>, &[usize]) {
    let train = assignment
        .iter()
        .enumerate()
        .filter(|&(g, _)| g != f)
        .flat_map(|(_, nodes)| nodes.iter().copied())
        .collect();
    (train, &assignment[f])
}

pub fn cross_validate(
    emb: &EmbeddingMatrix,
    truth: &LabelAssignment,
    eligible: &BTreeSet<usize>,
    folds: usize,
    k: usize,
    seed: u64,
) -> Result<F1Report> {
    let assignment = fold_assignment(eligible, folds, seed)?;
    let per_fold = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (train, test) = fold_split(&assignment, f);
            evaluate_fold(emb, truth, &train, test, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(F1Report::from_folds(per_fold, k))
}
