use std::path::Path;

use proptest::prelude::*;
use ssagcn_core::graph::{load_citation_dataset, normalized_adjacency, random_split, Graph, SplitAssignment};
use ssagcn_core::Matrix;

/// D^{-1/2} (A_sym + I) D^{-1/2}, built densely.
fn dense_oracle(n: usize, edges: &[(usize, usize)]) -> Matrix<f64> {
    let mut a = Matrix::<f64>::identity(n);
    for &(s, d) in edges {
        a.set(s, d, 1.0);
        a.set(d, s, 1.0);
    }
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    Matrix::from_fn(n, n, |i, j| a.get(i, j) / (deg[i] * deg[j]).sqrt())
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=20).prop_flat_map(|n| {
        let pairs = prop::collection::vec((0..n, 0..n), 0..(2 * n))
            .prop_map(|v| {
                let mut v: Vec<_> = v.into_iter().filter(|(a, b)| a != b).collect();
                v.sort();
                v.dedup();
                v
            });
        (Just(n), pairs)
    })
}

fn spectral_radius(m: &Matrix<f64>) -> f64 {
    let n = m.rows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j) * v[j]).sum())
            .collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_adjacency_matches_dense_formula((n, edges) in graph_strategy()) {
        let g = Graph::from_edges(n, edges.clone()).unwrap();
        let adj = normalized_adjacency::<f64>(&g);
        let got = adj.matrix().to_dense();
        let want = dense_oracle(n, &edges);
        prop_assert!(got.max_abs_diff(&want).unwrap() <= 1e-12);
        prop_assert!(adj.matrix().is_symmetric(0.0));
        prop_assert!(adj.matrix().values().iter().all(|&v| v > 0.0 && v <= 1.0));
        prop_assert!(spectral_radius(&got) <= 1.0 + 1e-9);
    }

    #[test]
    fn split_partitions_and_round_trips(n in 10usize..300, seed in any::<u64>()) {
        let s = random_split(n, seed).unwrap();
        s.validate(n).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.dev).chain(&s.test).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(s.train.len(), n * 8 / 10);
        let back = SplitAssignment::from_text(&s.to_text()).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn hand_computed_adjacencies() {
    let single = normalized_adjacency::<f64>(&Graph::from_edges(1, vec![]).unwrap());
    assert_eq!(single.matrix().to_dense(), Matrix::filled(1, 1, 1.0));
    let path = normalized_adjacency::<f64>(&Graph::from_edges(2, vec![(0, 1)]).unwrap());
    assert!(path.matrix().to_dense().max_abs_diff(&Matrix::filled(2, 2, 0.5)).unwrap() < 1e-15);
    let tri = normalized_adjacency::<f64>(&Graph::from_edges(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap());
    assert!(tri.matrix().to_dense().max_abs_diff(&Matrix::filled(3, 3, 1.0 / 3.0)).unwrap() < 1e-15);
}

fn data_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data"))
}

#[test]
fn cora_counts_and_split_sizes() {
    let dir = data_dir().join("cora");
    let g = load_citation_dataset(&dir.join("cora.content"), &dir.join("cora.cites")).unwrap();
    assert_eq!((g.num_nodes(), g.feature_dim(), g.num_classes()), (2708, 1433, 7));
    let s = random_split(g.num_nodes(), 0).unwrap();
    assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (2166, 271, 271));
    assert_eq!(random_split(2708, 0).unwrap(), s);
}

#[test]
fn citeseer_counts() {
    let dir = data_dir().join("citeseer");
    let g = load_citation_dataset(&dir.join("citeseer.content"), &dir.join("citeseer.cites")).unwrap();
    assert_eq!((g.num_nodes(), g.feature_dim(), g.num_classes()), (3312, 3703, 6));
}

#[test]
fn ten_nodes_split_eight_one_one() {
    let s = random_split(10, 3).unwrap();
    assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 1, 1));
}
