//! Test-only oracles. Nothing here calls into the algorithms it checks.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use qwalk::graph::{Graph, NodeIndex};
use qwalk::labels::{LabelAssignment, LabelledSplit};
use qwalk::sgns::{pair_loss, sgns_pair_step, EmbeddingMatrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random simple graph plus the raw (deduplicated) edge list it was built from.
pub struct RandomGraph {
    pub graph: Graph,
    pub n: usize,
    pub directed: bool,
    pub edges: Vec<(usize, usize)>,
}

impl RandomGraph {
    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].insert(v);
            if !self.directed {
                adj[v].insert(u);
            }
        }
        adj
    }
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, directed: bool) -> RandomGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v || (!directed && v < u) {
                continue;
            }
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(
        NodeIndex::sequential(n),
        directed,
        edges.iter().map(|&(u, v)| (u, v, 1.0)),
    )
    .unwrap();
    RandomGraph { graph, n, directed, edges }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// BFS distance-bounded neighborhood from an explicit adjacency list.
pub fn bfs_within(adj: &[BTreeSet<usize>], u: usize, k: usize) -> BTreeSet<usize> {
    let mut dist: HashMap<usize, usize> = HashMap::from([(u, 0)]);
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        let d = dist[&x];
        if d == k {
            continue;
        }
        for &y in &adj[x] {
            if !dist.contains_key(&y) {
                dist.insert(y, d + 1);
                queue.push_back(y);
            }
        }
    }
    dist.into_iter().filter(|&(x, d)| x != u && d >= 1).map(|(x, _)| x).collect()
}

/// Random labels: every node gets 1..=max_per_node labels out of `label_count`;
/// a fraction of nodes stays unlabelled.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, label_count: usize, unlabelled: f64) -> LabelAssignment {
    let mut labels = LabelAssignment::new();
    for l in 0..label_count {
        labels.add_label(&format!("L{l}"));
    }
    for u in 0..n {
        if rng.gen::<f64>() < unlabelled {
            continue;
        }
        let k = rng.gen_range(1..=label_count.min(2));
        for _ in 0..k {
            labels.assign(u, rng.gen_range(0..label_count)).unwrap();
        }
    }
    labels
}

pub fn random_split(rng: &mut ChaCha8Rng, labels: &LabelAssignment, ratio: f64) -> LabelledSplit {
    let mut visible = BTreeSet::new();
    let mut hidden = BTreeSet::new();
    for u in labels.labelled_nodes() {
        if rng.gen::<f64>() < ratio {
            visible.insert(u);
        } else {
            hidden.insert(u);
        }
    }
    LabelledSplit { visible, hidden, ratio }
}

/// Straightforward evaluation of the confidence recurrence with nested maps.
///
/// Returns every iterate `C_0..C_T` as `rows[node][label]`.
pub fn naive_confidence(
    adj: &[BTreeSet<usize>],
    labels: &LabelAssignment,
    visible: &BTreeSet<usize>,
    k: usize,
    iterations: usize,
) -> Vec<Vec<Vec<f64>>> {
    let n = adj.len();
    let lc = labels.label_count();
    let mut current: Vec<Vec<f64>> = (0..n)
        .map(|u| {
            (0..lc)
                .map(|l| {
                    let on = visible.contains(&u) && labels.labels_of(u).is_some_and(|s| s.contains(&l));
                    if on { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let mut history = vec![current.clone()];
    for _ in 0..iterations {
        let mut next = current.clone();
        for u in 0..n {
            if visible.contains(&u) {
                continue;
            }
            let hood = bfs_within(adj, u, k);
            if hood.is_empty() {
                continue;
            }
            for l in 0..lc {
                let sum: f64 = hood.iter().map(|&x| current[x][l]).sum();
                next[u][l] = sum / hood.len() as f64;
            }
        }
        current = next;
        history.push(current.clone());
    }
    history
}

/// Every consecutive pair is an edge; full length unless the last node is a sink.
pub fn walk_violations(adj: &[BTreeSet<usize>], walk: &[usize], start: usize, length: usize) -> Vec<String> {
    let mut out = Vec::new();
    if walk.first() != Some(&start) {
        out.push(format!("walk does not begin at {start}"));
    }
    if walk.len() > length {
        out.push(format!("walk longer than {length}"));
    }
    for pair in walk.windows(2) {
        if !adj[pair[0]].contains(&pair[1]) {
            out.push(format!("{} -> {} is not an edge", pair[0], pair[1]));
        }
    }
    if let Some(&last) = walk.last() {
        if walk.len() < length && !adj[last].is_empty() {
            out.push(format!("walk truncated at non-sink {last}"));
        }
    }
    out
}

/// Pearson chi-square statistic against a uniform expectation.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

/// 95% acceptance bound of a chi-square statistic with `dof` degrees of freedom.
pub fn chi_square_bound(dof: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.95)
}

pub fn distinct<T: std::hash::Hash + Eq + Clone>(items: &[T]) -> bool {
    let set: HashSet<T> = items.iter().cloned().collect();
    set.len() == items.len()
}

/// Independent pair loss: plain logistic formulas, no shared helpers.
fn reference_loss(input: &[f64], outputs: &[Vec<f64>]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut loss = -sig(dot(input, &outputs[0])).ln();
    for o in &outputs[1..] {
        loss -= (1.0 - sig(dot(input, o))).ln();
    }
    loss
}

/// Max relative error between the gradient applied by one step and central differences.
pub fn gradient_check(seed: u64, dim: usize) -> f64 {
    let mut rng = seeded(seed);
    let n = 8;
    let mut emb = EmbeddingMatrix::zeros(n, dim);
    for u in 0..n {
        for v in emb.input_mut(u) {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in emb.output_mut(u) {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let center = rng.gen_range(0..n);
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.gen_range(0..=i));
    }
    let context = ids[0];
    let negatives: Vec<usize> = ids[1..1 + rng.gen_range(1..=5)].to_vec();
    let targets: Vec<usize> = std::iter::once(context).chain(negatives.iter().copied()).collect();

    let input = emb.input(center).to_vec();
    let outputs: Vec<Vec<f64>> = targets.iter().map(|&t| emb.output(t).to_vec()).collect();
    let base_loss = reference_loss(&input, &outputs);
    assert!((base_loss - pair_loss(&emb, center, context, &negatives)).abs() < 1e-12);

    // The step moves parameters by -lr * gradient using pre-step values.
    let lr = 1.0;
    let mut stepped = emb.clone();
    let reported = sgns_pair_step(&mut stepped, center, context, &negatives, lr).unwrap();
    assert!((reported - base_loss).abs() < 1e-12);
    let mut analytic = Vec::new();
    for i in 0..dim {
        analytic.push(-(stepped.input(center)[i] - input[i]) / lr);
    }
    for (k, &t) in targets.iter().enumerate() {
        for i in 0..dim {
            analytic.push(-(stepped.output(t)[i] - outputs[k][i]) / lr);
        }
    }

    let h = 1e-5;
    let mut numeric = Vec::new();
    for i in 0..dim {
        let (mut plus, mut minus) = (input.clone(), input.clone());
        plus[i] += h;
        minus[i] -= h;
        numeric.push((reference_loss(&plus, &outputs) - reference_loss(&minus, &outputs)) / (2.0 * h));
    }
    for k in 0..targets.len() {
        for i in 0..dim {
            let (mut plus, mut minus) = (outputs.clone(), outputs.clone());
            plus[k][i] += h;
            minus[k][i] -= h;
            numeric.push((reference_loss(&input, &plus) - reference_loss(&input, &minus)) / (2.0 * h));
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
    diff / scale.max(1e-300)
}
