//! Immutable adjacency storage and edge-list ingestion.
//!
//! Nodes are addressed by dense ids `0..node_count`. The original token of
//! every node (as it appeared in the input file) is kept so results can be
//! written back under the caller's naming.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};

/// Interns node tokens into dense ids in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeIndex {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl NodeIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity naming `"0".."n-1"`.
    pub fn sequential(n: usize) -> Self {
        let mut index = Self::new();
        for i in 0..n {
            index.intern(&i.to_string());
        }
        index
    }

    pub fn intern(&mut self, token: &str) -> usize {
        match self.ids.entry(token.to_string()) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let id = self.names.len();
                self.names.push(token.to_string());
                e.insert(id);
                id
            }
        }
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A raw edge record before deduplication: `(source, target, weight)`.
pub type EdgeRecord = (usize, usize, f64);

/// Simple graph in compressed sparse row layout.
///
/// Each node's out-edges are sorted by neighbor id; the position of an edge
/// inside that slice is its action index for Q-learning.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    directed: bool,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    names: NodeIndex,
}

impl Graph {
    /// Builds a graph from raw edge records.
    ///
    /// Self-loops are dropped and parallel edges collapse to the first
    /// occurrence. Undirected input is symmetrized.
    pub fn from_edges(
        names: NodeIndex,
        directed: bool,
        edges: impl IntoIterator<Item = EdgeRecord>,
    ) -> Result<Self> {
        let n = names.len();
        let mut seen = HashSet::new();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (u, v, w) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange {
                        node,
                        node_count: n,
                    });
                }
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            if u == v {
                continue;
            }
            let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
            if !seen.insert(key) {
                continue;
            }
            adjacency[u].push((v, w));
            if !directed {
                adjacency[v].push((u, w));
            }
        }

        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for mut row in adjacency {
            row.sort_by_key(|&(v, _)| v);
            for (v, w) in row {
                targets.push(v);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Ok(Self {
            directed,
            offsets,
            targets,
            weights,
            names,
        })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of stored arcs; an undirected edge counts twice.
    pub fn arc_count(&self) -> usize {
        self.targets.len()
    }

    /// Number of edges as a user would count them.
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.arc_count()
        } else {
            self.arc_count() / 2
        }
    }

    /// Global arc index range of `u`'s out-edges.
    pub fn edge_range(&self, u: usize) -> Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.edge_range(u)]
    }

    pub fn edge_weights(&self, u: usize) -> &[f64] {
        &self.weights[self.edge_range(u)]
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// Head of every arc, indexed by global arc index.
    pub fn arc_targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn names(&self) -> &NodeIndex {
        &self.names
    }

    pub fn name(&self, u: usize) -> &str {
        self.names.name(u)
    }

    pub fn check_node(&self, u: usize) -> Result<()> {
        if u < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: u,
                node_count: self.node_count(),
            })
        }
    }

    /// Nodes at shortest-path distance `1..=k` from `u`, following out-edges.
    pub fn k_hop_neighborhood(&self, u: usize, k: usize) -> Result<BTreeSet<usize>> {
        self.check_node(u)?;
        if k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        Ok(self.k_hop_vec(u, k).into_iter().collect())
    }

    /// Same as [`Graph::k_hop_neighborhood`] but unsorted and unchecked.
    pub(crate) fn k_hop_vec(&self, u: usize, k: usize) -> Vec<usize> {
        if k == 1 {
            return self.neighbors(u).to_vec();
        }
        let mut depth = vec![usize::MAX; self.node_count()];
        let mut queue = VecDeque::new();
        let mut found = Vec::new();
        depth[u] = 0;
        queue.push_back(u);
        while let Some(x) = queue.pop_front() {
            if depth[x] == k {
                continue;
            }
            for &y in self.neighbors(x) {
                if depth[y] == usize::MAX {
                    depth[y] = depth[x] + 1;
                    found.push(y);
                    queue.push_back(y);
                }
            }
        }
        found
    }

    /// Serializes to the edge-list text format. Undirected edges are written once.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let weighted = self.weights.iter().any(|&w| w != 1.0);
        for u in 0..self.node_count() {
            for (&v, &w) in self.neighbors(u).iter().zip(self.edge_weights(u)) {
                if !self.directed && v < u {
                    continue;
                }
                let (a, b) = (self.name(u), self.name(v));
                if weighted {
                    let _ = writeln!(out, "{a} {b} {w}");
                } else {
                    let _ = writeln!(out, "{a} {b}");
                }
            }
        }
        out
    }
}

fn is_skippable(line: &str) -> bool {
    let trimmed = line.trim();
    trimmed.is_empty() || trimmed.starts_with('#')
}

/// Parses edge-list text into raw records, interning node tokens into `index`.
pub fn parse_edges(text: &str, index: &mut NodeIndex) -> Result<Vec<EdgeRecord>> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if is_skippable(line) {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let weight = match fields.len() {
            2 => 1.0,
            3 => {
                let w: f64 = fields[2].parse().map_err(|_| {
                    Error::parse(lineno, format!("bad weight `{}`", fields[2]))
                })?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::validation(format!(
                        "line {lineno}: edge weight must be positive, got {w}"
                    )));
                }
                w
            }
            k => {
                return Err(Error::parse(
                    lineno,
                    format!("expected `u v [w]`, found {k} fields"),
                ))
            }
        };
        let u = index.intern(fields[0]);
        let v = index.intern(fields[1]);
        edges.push((u, v, weight));
    }
    Ok(edges)
}

/// Parses an edge list into a graph with freshly interned node ids.
pub fn parse_edge_list(text: &str, directed: bool) -> Result<Graph> {
    let mut index = NodeIndex::new();
    let edges = parse_edges(text, &mut index)?;
    Graph::from_edges(index, directed, edges)
}
