mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use proptest::prelude::*;
use qwalk::baseline::{baseline_corpus, BiasParams};
use qwalk::confidence::{learn_confidence, ConfidenceMatrix};
use qwalk::eval::{fold_assignment, knn_predict, macro_micro_f1};
use qwalk::graph::{parse_edge_list, Graph, NodeIndex};
use qwalk::labels::{LabelAssignment, LabelledSplit};
use qwalk::qwalk::{arc_rewards, generate_corpus, init_q, reward, train_q, ExploitRule};
use qwalk::sgns::{sgns_pair_step, train_sgns, EmbeddingMatrix, SgnsConfig};
use rand::Rng;

fn named_edges(g: &Graph) -> BTreeSet<(String, String, u64)> {
    let mut out = BTreeSet::new();
    for u in 0..g.node_count() {
        for (&v, &w) in g.neighbors(u).iter().zip(g.edge_weights(u)) {
            out.insert((g.name(u).to_string(), g.name(v).to_string(), w.to_bits()));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn edge_list_roundtrip(
        edges in prop::collection::vec((0usize..30, 0usize..30, 1u32..5), 1..120),
        directed in any::<bool>(),
        weighted in any::<bool>(),
    ) {
        let text: String = edges
            .iter()
            .map(|&(u, v, w)| if weighted { format!("n{u} n{v} {}\n", w as f64 * 0.75) } else { format!("n{u} n{v}\n") })
            .collect();
        let g = parse_edge_list(&text, directed).unwrap();
        let back = parse_edge_list(&g.to_edge_list(), directed).unwrap();
        prop_assert_eq!(named_edges(&g), named_edges(&back));
        let connected: BTreeSet<&str> = (0..g.node_count())
            .filter(|&u| g.out_degree(u) > 0 || (0..g.node_count()).any(|x| g.has_edge(x, u)))
            .map(|u| g.name(u))
            .collect();
        let back_names: BTreeSet<&str> = back.names().names().iter().map(String::as_str).collect();
        prop_assert_eq!(connected, back_names);
        prop_assert_eq!(g.edge_count(), back.edge_count());
    }

    #[test]
    fn undirected_graphs_are_symmetric(seed in any::<u64>(), n in 1usize..60, p in 0.0f64..0.4) {
        let rg = random_graph(&mut seeded(seed), n, p, false);
        let g = &rg.graph;
        for u in 0..n {
            prop_assert!(!g.has_edge(u, u));
            for (&v, &w) in g.neighbors(u).iter().zip(g.edge_weights(u)) {
                let back = g.neighbors(v).binary_search(&u).unwrap();
                prop_assert_eq!(g.edge_weights(v)[back], w);
            }
        }
    }

    #[test]
    fn one_hop_is_out_neighborhood(seed in any::<u64>(), n in 1usize..200, directed in any::<bool>()) {
        let mut rng = seeded(seed);
        let p = rng.gen_range(0.0..(8.0 / n as f64).min(1.0));
        let rg = random_graph(&mut rng, n, p, directed);
        let adj = rg.adjacency();
        for u in 0..n {
            let hood = rg.graph.k_hop_neighborhood(u, 1).unwrap();
            prop_assert_eq!(&hood, &adj[u]);
            prop_assert_eq!(&hood, &bfs_within(&adj, u, 1));
        }
    }

    #[test]
    fn k_hop_matches_bfs_and_is_monotone(seed in any::<u64>(), n in 1usize..80, directed in any::<bool>()) {
        let mut rng = seeded(seed);
        let rg = random_graph(&mut rng, n, 2.5 / n as f64, directed);
        let adj = rg.adjacency();
        for u in 0..n {
            let mut previous = BTreeSet::new();
            for k in 1..=4 {
                let hood = rg.graph.k_hop_neighborhood(u, k).unwrap();
                prop_assert_eq!(&hood, &bfs_within(&adj, u, k));
                prop_assert!(previous.is_subset(&hood));
                prop_assert!(!hood.contains(&u));
                previous = hood;
            }
        }
    }

    #[test]
    fn confidence_matches_naive_recurrence(
        seed in any::<u64>(),
        n in 1usize..100,
        label_count in 1usize..=5,
        iterations in 0usize..=5,
        k in 1usize..=2,
        directed in any::<bool>(),
    ) {
        let mut rng = seeded(seed);
        let rg = random_graph(&mut rng, n, 3.0 / n as f64, directed);
        let labels = random_labels(&mut rng, n, label_count, 0.2);
        let split = random_split(&mut rng, &labels, 0.6);
        let expected = naive_confidence(&rg.adjacency(), &labels, &split.visible, k, iterations);
        let c = learn_confidence(&rg.graph, &labels, &split, k, iterations).unwrap();
        prop_assert_eq!(c.iteration(), iterations);
        for u in 0..n {
            for l in 0..label_count {
                prop_assert!((c.get(u, l) - expected[iterations][u][l]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn confidence_bounded_and_visible_rows_fixed(seed in any::<u64>(), n in 2usize..80, iterations in 0usize..8) {
        let mut rng = seeded(seed);
        let rg = random_graph(&mut rng, n, 4.0 / n as f64, false);
        let labels = random_labels(&mut rng, n, 4, 0.3);
        let split = random_split(&mut rng, &labels, 0.5);
        for t in 0..=iterations {
            let c = learn_confidence(&rg.graph, &labels, &split, 1, t).unwrap();
            prop_assert!(c.values().iter().all(|v| (0.0..=1.0).contains(v)));
            for &u in &split.visible {
                for l in 0..4 {
                    let want = if labels.labels_of(u).unwrap().contains(&l) { 1.0 } else { 0.0 };
                    prop_assert_eq!(c.get(u, l), want);
                }
            }
        }
    }

    #[test]
    fn confidence_is_order_independent(seed in any::<u64>(), n in 2usize..60) {
        let mut rng = seeded(seed);
        let rg = random_graph(&mut rng, n, 4.0 / n as f64, false);
        let labels = random_labels(&mut rng, n, 3, 0.2);
        let split = random_split(&mut rng, &labels, 0.5);
        // Relabel nodes by a random permutation and compare permuted results.
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let pg = Graph::from_edges(
            NodeIndex::sequential(n),
            false,
            rg.edges.iter().map(|&(u, v)| (perm[u], perm[v], 1.0)),
        ).unwrap();
        let mut pl = LabelAssignment::new();
        for l in 0..3 {
            pl.add_label(&format!("L{l}"));
        }
        for (u, ls) in labels.iter() {
            for &l in ls {
                pl.assign(perm[u], l).unwrap();
            }
        }
        let ps = LabelledSplit {
            visible: split.visible.iter().map(|&u| perm[u]).collect(),
            hidden: split.hidden.iter().map(|&u| perm[u]).collect(),
            ratio: split.ratio,
        };
        let a = learn_confidence(&rg.graph, &labels, &split, 1, 4).unwrap();
        let b = learn_confidence(&pg, &pl, &ps, 1, 4).unwrap();
        for u in 0..n {
            for l in 0..3 {
                prop_assert!((a.get(u, l) - b.get(perm[u], l)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn reward_bounds(seed in any::<u64>(), n in 2usize..50, label_count in 1usize..6) {
        let mut rng = seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..label_count).map(|_| rng.gen::<f64>()).collect()).collect();
        let c = ConfidenceMatrix::from_rows(label_count, &rows).unwrap();
        let indicator: Vec<Vec<f64>> = (0..n)
            .map(|u| (0..label_count).map(|l| if l == u % label_count { 1.0 } else { 0.0 }).collect())
            .collect();
        let ci = ConfidenceMatrix::from_rows(label_count, &indicator).unwrap();
        for u in 0..n {
            for v in 0..n {
                let r = reward(&c, u, v);
                prop_assert!(r <= 0.0 && r >= -(label_count as f64));
                prop_assert_eq!(r == 0.0, rows[u] == rows[v]);
                let ri = reward(&ci, u, v);
                prop_assert!((-2.0..=0.0).contains(&ri));
            }
        }
    }

    #[test]
    fn zero_discount_follows_closed_form(seed in any::<u64>(), n in 2usize..200, epochs in 1usize..120) {
        let mut rng = seeded(seed);
        let directed: bool = rng.gen();
        let rg = random_graph(&mut rng, n, 3.0 / n as f64, directed);
        let labels = random_labels(&mut rng, n, 3, 0.2);
        let split = random_split(&mut rng, &labels, 0.7);
        let c = learn_confidence(&rg.graph, &labels, &split, 1, 3).unwrap();
        let q = train_q(&rg.graph, &c, 1.0, 0.0, epochs).unwrap();
        // With gamma = 0 each pair evolves alone: Q_J = R (1 - prod_j (1 - alpha_j)).
        let mut alpha = 1.0;
        let mut keep = 1.0;
        for j in 1..=epochs {
            alpha /= 1.0 + j as f64;
            keep *= 1.0 - alpha;
        }
        let rewards = arc_rewards(&rg.graph, &c).unwrap();
        for (qv, r) in q.values().iter().zip(&rewards) {
            prop_assert!((qv - r * (1.0 - keep)).abs() <= 1e-12);
        }
    }

    #[test]
    fn q_updates_damp_out(seed in any::<u64>(), n in 3usize..100, gamma in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let rg = random_graph(&mut rng, n, 4.0 / n as f64, false);
        prop_assume!(rg.graph.arc_count() > 0);
        let labels = random_labels(&mut rng, n, 3, 0.0);
        let split = random_split(&mut rng, &labels, 0.8);
        let c = learn_confidence(&rg.graph, &labels, &split, 1, 3).unwrap();
        let rewards = arc_rewards(&rg.graph, &c).unwrap();
        let mut q = init_q(&rg.graph, 1.0, gamma).unwrap();
        let mut deltas = vec![0.0];
        for _ in 0..100 {
            deltas.push(q.sweep(&rg.graph, &rewards));
        }
        prop_assert!(q.values().iter().all(|v| v.is_finite()));
        if deltas[10] > 0.0 {
            prop_assert!(deltas[100] < deltas[10]);
        } else {
            prop_assert_eq!(deltas[100], 0.0);
        }
    }

    #[test]
    fn q_walks_stay_on_edges(seed in any::<u64>(), n in 1usize..60, directed in any::<bool>(), p_q in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let rg = random_graph(&mut rng, n, 2.0 / n as f64, directed);
        let labels = random_labels(&mut rng, n, 3, 0.2);
        let split = random_split(&mut rng, &labels, 0.7);
        let c = learn_confidence(&rg.graph, &labels, &split, 1, 3).unwrap();
        let q = train_q(&rg.graph, &c, 1.0, 0.9, 30).unwrap();
        let adj = rg.adjacency();
        for rule in [ExploitRule::CurrentNode, ExploitRule::Lookahead] {
            let corpus = generate_corpus(&q, &rg.graph, 2, 12, p_q, rule, seed).unwrap();
            prop_assert_eq!(corpus.len(), 2 * n);
            for (i, walk) in corpus.walks.iter().enumerate() {
                prop_assert!(walk_violations(&adj, walk, i % n, 12).is_empty());
            }
        }
    }

    #[test]
    fn greedy_corpus_ignores_seed(seed in any::<u64>(), other in any::<u64>(), n in 2usize..50) {
        let mut rng = seeded(seed);
        let rg = random_graph(&mut rng, n, 3.0 / n as f64, false);
        let labels = random_labels(&mut rng, n, 2, 0.1);
        let split = random_split(&mut rng, &labels, 0.8);
        let c = learn_confidence(&rg.graph, &labels, &split, 1, 3).unwrap();
        let q = train_q(&rg.graph, &c, 1.0, 0.9, 20).unwrap();
        let a = generate_corpus(&q, &rg.graph, 3, 15, 1.0, ExploitRule::CurrentNode, seed).unwrap();
        let b = generate_corpus(&q, &rg.graph, 3, 15, 1.0, ExploitRule::CurrentNode, other).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn biased_walks_stay_on_edges(seed in any::<u64>(), n in 1usize..60, directed in any::<bool>(), p in 0.1f64..4.0, q in 0.1f64..4.0) {
        let mut rng = seeded(seed);
        let rg = random_graph(&mut rng, n, 2.0 / n as f64, directed);
        let adj = rg.adjacency();
        let corpus = baseline_corpus(&rg.graph, 2, 12, BiasParams::new(p, q).unwrap(), seed).unwrap();
        for (i, walk) in corpus.walks.iter().enumerate() {
            prop_assert!(walk_violations(&adj, walk, i % n, 12).is_empty());
        }
    }

    #[test]
    fn micro_f1_equals_accuracy_single_label(seed in any::<u64>(), n in 1usize..200, label_count in 1usize..8) {
        let mut rng = seeded(seed);
        let mut truth = BTreeMap::new();
        let mut predicted = BTreeMap::new();
        let mut correct = 0;
        for u in 0..n {
            let t = rng.gen_range(0..label_count);
            let p = if rng.gen_bool(0.6) { t } else { rng.gen_range(0..label_count) };
            correct += usize::from(t == p);
            truth.insert(u, BTreeSet::from([t]));
            predicted.insert(u, BTreeSet::from([p]));
        }
        let (macro_f1, micro_f1) = macro_micro_f1(&predicted, &truth, label_count).unwrap();
        prop_assert!((micro_f1 - correct as f64 / n as f64).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&macro_f1));
    }

    #[test]
    fn f1_scores_in_unit_interval(seed in any::<u64>(), n in 1usize..60, label_count in 1usize..6) {
        let mut rng = seeded(seed);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> BTreeSet<usize> {
            let k = rng.gen_range(0..=label_count);
            (0..k).map(|_| rng.gen_range(0..label_count)).collect()
        };
        let truth: BTreeMap<usize, BTreeSet<usize>> = (0..n).map(|u| (u, draw(&mut rng))).collect();
        let predicted: BTreeMap<usize, BTreeSet<usize>> = (0..n).map(|u| (u, draw(&mut rng))).collect();
        let (a, b) = macro_micro_f1(&predicted, &truth, label_count).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
    }

    #[test]
    fn knn_translation_invariant(seed in any::<u64>(), n in 4usize..60, dim in 1usize..6, shift in -64i32..64) {
        let mut rng = seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-8.0..8.0)).collect()).collect();
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + shift as f64 * 0.5).collect()).collect();
        let a = EmbeddingMatrix::from_input_rows(&rows).unwrap();
        let b = EmbeddingMatrix::from_input_rows(&shifted).unwrap();
        let labels = random_labels(&mut rng, n, 3, 0.0);
        let train: Vec<usize> = (1..n).collect();
        for k in 1..=3.min(n - 1) {
            for count in 1..=2 {
                prop_assert_eq!(
                    knn_predict(&a, &train, &labels, 0, k, count).unwrap(),
                    knn_predict(&b, &train, &labels, 0, k, count).unwrap()
                );
            }
        }
    }

    #[test]
    fn folds_cover_each_node_once(seed in any::<u64>(), n in 5usize..300, folds in 2usize..=5) {
        let eligible: BTreeSet<usize> = (0..n).map(|i| i * 3).collect();
        let assignment = fold_assignment(&eligible, folds, seed).unwrap();
        prop_assert_eq!(assignment.len(), folds);
        let flat: Vec<usize> = assignment.iter().flatten().copied().collect();
        prop_assert!(distinct(&flat));
        prop_assert_eq!(flat.iter().copied().collect::<BTreeSet<_>>(), eligible);
        let sizes: Vec<usize> = assignment.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}

#[test]
fn sgns_gradients_match_finite_differences() {
    let worst = (0..100).map(|s| gradient_check(s, 8)).fold(0.0, f64::max);
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn sgns_parameters_stay_finite_for_extreme_scores() {
    let mut emb = EmbeddingMatrix::zeros(3, 2);
    emb.input_mut(0).copy_from_slice(&[20.0, 5.0]);
    emb.output_mut(1).copy_from_slice(&[-20.0, -5.0]);
    emb.output_mut(2).copy_from_slice(&[20.0, 5.0]);
    // Scores of about +-425.
    let loss = sgns_pair_step(&mut emb, 0, 1, &[2], 0.01).unwrap();
    assert!(loss.is_finite() && loss > 800.0);
    assert!(emb.is_finite());
}

#[test]
fn trained_parameters_are_finite() {
    let rg = random_graph(&mut seeded(3), 40, 0.1, false);
    let corpus = baseline_corpus(&rg.graph, 5, 20, BiasParams::uniform(), 1).unwrap();
    let config = SgnsConfig { window: 5, epochs: 3, initial_lr: 0.5, ..SgnsConfig::default() };
    let emb = train_sgns(&corpus, 40, 16, &config).unwrap();
    assert!(emb.is_finite());
    assert_eq!(emb.node_count(), 40);
}

#[test]
fn corpora_use_only_graph_edges_on_directed_sinks() {
    let g = parse_edge_list("0 1\n1 2\n2 0\n2 3", true).unwrap();
    let labels = {
        let mut l = LabelAssignment::new();
        l.add_label("A");
        for u in 0..4 {
            l.assign(u, 0).unwrap();
        }
        l
    };
    let split = LabelledSplit { visible: BTreeSet::from([0, 1]), hidden: BTreeSet::from([2, 3]), ratio: 0.5 };
    let c = learn_confidence(&g, &labels, &split, 1, 3).unwrap();
    let q = train_q(&g, &c, 1.0, 0.9, 10).unwrap();
    let corpus = generate_corpus(&q, &g, 10, 8, 0.5, ExploitRule::CurrentNode, 1).unwrap();
    let adj: Vec<BTreeSet<usize>> = (0..4).map(|u| g.neighbors(u).iter().copied().collect()).collect();
    for (i, walk) in corpus.walks.iter().enumerate() {
        assert!(walk_violations(&adj, walk, i % 4, 8).is_empty(), "{walk:?}");
    }
    assert!(corpus.walks.iter().any(|w| w.len() < 8 && *w.last().unwrap() == 3));
}
