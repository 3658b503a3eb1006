use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssagcn_core::graph::Graph;
use ssagcn_core::node2vec::{
    cosine, generate_walks, skipgram_train, transition_weights, WalkConfig, WalkSampler,
};
use ssagcn_core::Matrix;

fn config() -> WalkConfig {
    WalkConfig {
        walk_length: 20,
        walks_per_node: 4,
        window: 5,
        dim: 16,
        ..WalkConfig::default()
    }
}

#[test]
fn path_and_triangle_transitions() {
    // Neighbors come back sorted, so index 0 is node 0 ("a") and index 1 is node 2 ("c").
    let path = Graph::from_edges(3, vec![(0, 1), (1, 2)]).unwrap();
    let w = transition_weights(path.undirected(), Some(0), 1, 0.25, 0.25);
    assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);

    let tri = Graph::from_edges(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
    let w = transition_weights(tri.undirected(), Some(0), 1, 0.25, 0.25);
    assert!((w[0] - 0.8).abs() < 1e-12 && (w[1] - 0.2).abs() < 1e-12);

    let w = transition_weights(tri.undirected(), None, 1, 0.25, 0.25);
    assert_eq!(w, vec![0.5, 0.5]);
}

#[test]
fn isolated_node_has_no_transitions() {
    let g = Graph::from_edges(2, vec![]).unwrap();
    assert!(transition_weights(g.undirected(), None, 0, 1.0, 1.0).is_empty());
}

#[test]
fn one_node_walks_are_singletons() {
    let g = Graph::from_edges(1, vec![]).unwrap();
    let walks = generate_walks(&g, &config()).unwrap();
    assert_eq!(walks.len(), 4);
    assert!(walks.iter().all(|w| w == &vec![0]));
}

#[test]
fn two_node_path_alternates() {
    let g = Graph::from_edges(2, vec![(1, 0)]).unwrap();
    for (p, q) in [(0.25, 0.25), (4.0, 0.5), (1.0, 1.0)] {
        let cfg = WalkConfig { p, q, ..config() };
        let walks = generate_walks(&g, &cfg).unwrap();
        assert_eq!(walks.len(), 2 * cfg.walks_per_node);
        for w in walks {
            assert_eq!(w.len(), cfg.walk_length);
            assert!(w.windows(2).all(|s| s[0] != s[1]));
        }
    }
}

#[test]
fn unbiased_steps_are_uniform() {
    // Star: center 0 with leaves 1..=4; arriving from leaf 1.
    let g = Graph::from_edges(5, (1..5).map(|v| (0, v)).collect()).unwrap();
    for budget in [usize::MAX, 0] {
        let sampler = WalkSampler::new(g.undirected(), 1.0, 1.0, budget);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 5];
        let steps = 100_000;
        for _ in 0..steps {
            counts[sampler.step(Some(1), 0, &mut rng).unwrap()] += 1;
        }
        for &c in &counts[1..] {
            let f = c as f64 / steps as f64;
            assert!((f - 0.25).abs() / 0.25 < 0.02, "frequency {f} (budget {budget})");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transitions_are_distributions(
        n in 2usize..15,
        raw in prop::collection::vec((0usize..15, 0usize..15), 1..40),
        p in 0.1f64..4.0,
        q in 0.1f64..4.0,
    ) {
        let mut edges: Vec<_> = raw.into_iter().map(|(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect();
        edges.sort();
        edges.dedup();
        let g = Graph::from_edges(n, edges).unwrap();
        let adj = g.undirected();
        for curr in 0..n {
            for &prev in adj.neighbors(curr) {
                let w = transition_weights(adj, Some(prev), curr, p, q);
                prop_assert!(w.iter().all(|&x| x >= 0.0));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn walk_count_is_nodes_times_walks(n in 1usize..12, per in 1usize..4) {
        let g = Graph::from_edges(n, (1..n).map(|v| (v - 1, v)).collect()).unwrap();
        let cfg = WalkConfig { walks_per_node: per, ..config() };
        prop_assert_eq!(generate_walks(&g, &cfg).unwrap().len(), n * per);
    }
}

/// Ring of twin pairs: nodes 2i and 2i+1 are joined to each other and to
/// both members of the neighboring pairs, so each node's twin is its
/// structurally closest node.
fn twin_ring(pairs: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 0..pairs {
        let (a, b) = (2 * i, 2 * i + 1);
        edges.push((a, b));
        let j = (i + 1) % pairs;
        for u in [a, b] {
            for v in [2 * j, 2 * j + 1] {
                edges.push((u.min(v), u.max(v)));
            }
        }
    }
    edges.sort();
    edges.dedup();
    Graph::from_edges(2 * pairs, edges).unwrap()
}

/// Skip-gram with the exact softmax normalizer over every node, trained by
/// plain SGD with the same fixed window and learning-rate schedule.
fn full_softmax_skipgram(walks: &[Vec<usize>], n: usize, cfg: &WalkConfig) -> Matrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let d = cfg.dim;
    let mut input: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-0.5..0.5) / d as f64).collect())
        .collect();
    let mut output = vec![vec![0.0; d]; n];
    let mut pairs = Vec::new();
    for w in walks {
        for (i, &u) in w.iter().enumerate() {
            let lo = i.saturating_sub(cfg.window);
            let hi = (i + cfg.window + 1).min(w.len());
            for (j, &c) in w.iter().enumerate().take(hi).skip(lo) {
                if j != i {
                    pairs.push((u, c));
                }
            }
        }
    }
    let total = (pairs.len() * cfg.epochs) as f64;
    let mut seen = 0.0;
    for _ in 0..cfg.epochs {
        for &(u, c) in &pairs {
            let lr = (cfg.learning_rate * (1.0 - seen / total)).max(cfg.min_learning_rate);
            seen += 1.0;
            let scores: Vec<f64> = output
                .iter()
                .map(|o| o.iter().zip(&input[u]).map(|(a, b)| a * b).sum())
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            let mut grad_u = vec![0.0; d];
            for (j, s) in scores.iter().enumerate() {
                let g = (if j == c { 1.0 } else { 0.0 }) - (s - m).exp() / z;
                for k in 0..d {
                    grad_u[k] += g * output[j][k];
                    output[j][k] += lr * g * input[u][k];
                }
            }
            for k in 0..d {
                input[u][k] += lr * grad_u[k];
            }
        }
    }
    Matrix::from_fn(n, d, |i, k| input[i][k])
}

fn top1(m: &Matrix<f64>) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            (0..m.rows())
                .filter(|&j| j != i)
                .max_by(|&a, &b| {
                    cosine(m.row(i), m.row(a)).total_cmp(&cosine(m.row(i), m.row(b)))
                })
                .unwrap()
        })
        .collect()
}

#[test]
fn negative_sampling_agrees_with_exact_softmax() {
    let g = twin_ring(12);
    let cfg = WalkConfig {
        walk_length: 30,
        walks_per_node: 20,
        window: 3,
        dynamic_window: false,
        dim: 16,
        epochs: 5,
        p: 1.0,
        q: 1.0,
        ..WalkConfig::default()
    };
    let walks = generate_walks(&g, &cfg).unwrap();
    let sgns = skipgram_train::<f64>(&walks, g.num_nodes(), &cfg).unwrap();
    let exact = full_softmax_skipgram(&walks, g.num_nodes(), &cfg);
    let (a, b) = (top1(sgns.matrix()), top1(&exact));
    let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
    assert!(agree >= 0.8, "top-1 agreement {agree}: {a:?} vs {b:?}");
}
