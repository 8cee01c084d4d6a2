//! Ground-truth label bookkeeping and labelled/unlabelled splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::NodeIndex;

/// Label universe plus the labels attached to each labelled node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelAssignment {
    universe: Vec<String>,
    label_ids: HashMap<String, usize>,
    actual: BTreeMap<usize, BTreeSet<usize>>,
}

impl LabelAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a label name, returning its id.
    pub fn add_label(&mut self, name: &str) -> usize {
        if let Some(&id) = self.label_ids.get(name) {
            return id;
        }
        let id = self.universe.len();
        self.universe.push(name.to_string());
        self.label_ids.insert(name.to_string(), id);
        id
    }

    pub fn assign(&mut self, node: usize, label: usize) -> Result<()> {
        if label >= self.universe.len() {
            return Err(Error::validation(format!(
                "label id {label} outside universe of {}",
                self.universe.len()
            )));
        }
        self.actual.entry(node).or_default().insert(label);
        Ok(())
    }

    pub fn label_count(&self) -> usize {
        self.universe.len()
    }

    pub fn label_name(&self, id: usize) -> &str {
        &self.universe[id]
    }

    pub fn label_id(&self, name: &str) -> Option<usize> {
        self.label_ids.get(name).copied()
    }

    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn labels_of(&self, node: usize) -> Option<&BTreeSet<usize>> {
        self.actual.get(&node)
    }

    pub fn is_labelled(&self, node: usize) -> bool {
        self.actual.contains_key(&node)
    }

    /// Labelled nodes in ascending order.
    pub fn labelled_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.actual.keys().copied()
    }

    pub fn labelled_count(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BTreeSet<usize>)> {
        self.actual.iter().map(|(&n, l)| (n, l))
    }

    /// True when every labelled node carries exactly one label.
    pub fn is_single_label(&self) -> bool {
        self.actual.values().all(|l| l.len() == 1)
    }

    /// Largest node id referenced, if any.
    pub fn max_node(&self) -> Option<usize> {
        self.actual.keys().next_back().copied()
    }

    /// Same universe, only the given nodes keep their labels.
    pub fn restricted_to(&self, nodes: &BTreeSet<usize>) -> LabelAssignment {
        LabelAssignment {
            universe: self.universe.clone(),
            label_ids: self.label_ids.clone(),
            actual: self
                .actual
                .iter()
                .filter(|(n, _)| nodes.contains(n))
                .map(|(&n, l)| (n, l.clone()))
                .collect(),
        }
    }
}

/// Parses `node label [label ...]` lines, interning node tokens into `index`.
///
/// Label ids follow first appearance.
pub fn parse_labels_with(text: &str, index: &mut NodeIndex) -> Result<LabelAssignment> {
    let mut labels = LabelAssignment::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let node_token = fields.next().expect("non-empty line has a token");
        let tokens: Vec<&str> = fields.collect();
        if tokens.is_empty() {
            return Err(Error::validation(format!(
                "line {}: labels require >=1 label for node `{node_token}`",
                lineno + 1
            )));
        }
        let node = index.intern(node_token);
        for token in tokens {
            let label = labels.add_label(token);
            labels.assign(node, label)?;
        }
    }
    Ok(labels)
}

pub fn parse_labels(text: &str) -> Result<LabelAssignment> {
    parse_labels_with(text, &mut NodeIndex::new())
}

/// Partition of the labelled nodes into those whose labels are shown to the
/// confidence learner and those kept hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledSplit {
    pub visible: BTreeSet<usize>,
    pub hidden: BTreeSet<usize>,
    pub ratio: f64,
}

impl LabelledSplit {
    pub fn is_visible(&self, node: usize) -> bool {
        self.visible.contains(&node)
    }

    /// Dense membership mask over `node_count` nodes.
    pub fn visible_mask(&self, node_count: usize) -> Vec<bool> {
        let mut mask = vec![false; node_count];
        for &u in &self.visible {
            if u < node_count {
                mask[u] = true;
            }
        }
        mask
    }
}

/// Chooses `round(v_l * n)` of the `n` labelled nodes uniformly at random as visible.
pub fn split_labelled(labels: &LabelAssignment, v_l: f64, seed: u64) -> Result<LabelledSplit> {
    if !(v_l > 0.0 && v_l <= 1.0) {
        return Err(Error::validation(format!(
            "labelled ratio must lie in (0, 1], got {v_l}"
        )));
    }
    if labels.is_empty() {
        return Err(Error::validation("cannot split an empty label assignment"));
    }
    let mut nodes: Vec<usize> = labels.labelled_nodes().collect();
    let take = ((v_l * nodes.len() as f64).round() as usize).min(nodes.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nodes.shuffle(&mut rng);
    let visible = nodes[..take].iter().copied().collect();
    let hidden = nodes[take..].iter().copied().collect();
    Ok(LabelledSplit {
        visible,
        hidden,
        ratio: v_l,
    })
}
