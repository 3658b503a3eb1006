use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssagcn_core::graph::Graph;
use ssagcn_core::transe::{
    distance, edges_to_triples, margin_loss, pair_gradient, train_transe, train_transe_observed,
    Distance, KGEConfig, Triple, TripleSet,
};

/// Loss of one positive/negative pair written out directly.
fn pair_loss(h: &[f64], r: &[f64], t: &[f64], hn: &[f64], tn: &[f64], gamma: f64) -> f64 {
    let l2 = |a: &[f64], b: &[f64], c: &[f64]| {
        a.iter().zip(b).zip(c).map(|((x, y), z)| (x + y - z).powi(2)).sum::<f64>().sqrt()
    };
    (gamma + l2(h, r, t) - l2(hn, r, tn)).max(0.0)
}

#[test]
fn hand_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let dim = 6;
        let mut v = || -> Vec<f64> { (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let mut rows = [v(), v(), v(), v(), v()];
        let gamma = 3.0; // keep the hinge active
        let g = pair_gradient(&rows[0], &rows[1], &rows[2], &rows[3], &rows[4], gamma, Distance::L2);
        assert!(g.loss > 0.0);
        let analytic = [&g.positive_head, &g.relation, &g.positive_tail, &g.negative_head, &g.negative_tail];
        let eps = 1e-6;
        for slot in 0..5 {
            for k in 0..dim {
                let orig = rows[slot][k];
                rows[slot][k] = orig + eps;
                let up = pair_loss(&rows[0], &rows[1], &rows[2], &rows[3], &rows[4], gamma);
                rows[slot][k] = orig - eps;
                let down = pair_loss(&rows[0], &rows[1], &rows[2], &rows[3], &rows[4], gamma);
                rows[slot][k] = orig;
                let fd = (up - down) / (2.0 * eps);
                let a = analytic[slot][k];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-5, "slot {slot} coord {k}: {a} vs {fd}");
            }
        }
    }
}

#[test]
fn inactive_hinge_has_zero_gradient() {
    let h = [0.0, 0.0];
    let g = pair_gradient(&h, &[1.0, 0.0], &[1.0, 0.0], &[5.0, 5.0], &[0.0, 0.0], 1.0, Distance::L2);
    assert_eq!(g.loss, 0.0);
    assert!(g.relation.iter().all(|&x| x == 0.0));
}

proptest! {
    #[test]
    fn margin_loss_hinge(dp in 0.0f64..10.0, dn in 0.0f64..10.0, gamma in 0.01f64..5.0) {
        let l = margin_loss(dp, dn, gamma);
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, dn >= dp + gamma);
    }
}

#[test]
fn margin_loss_examples() {
    assert_eq!(margin_loss(0.0f64, 2.0, 1.0), 0.0);
    assert!((margin_loss(0.5f64, 0.3, 1.0) - 1.2).abs() < 1e-12);
    assert_eq!(margin_loss(0.7f64, 0.7, 1.0), 1.0);
}

#[test]
fn edges_become_single_relation_triples() {
    let g = Graph::from_edges(3, vec![(1, 2), (0, 2)]).unwrap();
    let ts = edges_to_triples(&g, false);
    assert_eq!(ts.len(), g.num_edges());
    assert_eq!(ts.num_relations(), 1);
    assert!(ts.triples().contains(&Triple::new(1, 0, 2)));
    assert!(edges_to_triples(&Graph::from_edges(3, vec![]).unwrap(), false).is_empty());
}

fn toy_kg() -> TripleSet {
    // a=0, b=1, c=2
    TripleSet::new(vec![Triple::new(0, 0, 1), Triple::new(1, 0, 2)], 3, 1).unwrap()
}

fn toy_config(epochs: usize) -> KGEConfig {
    KGEConfig {
        dim: 16,
        batch_size: 2,
        learning_rate: 0.1,
        epochs,
        ..KGEConfig::default()
    }
}

#[test]
fn entity_norms_after_every_step() {
    let chain: Vec<Triple> = (0..19).map(|i| Triple::new(i, i % 2, i + 1)).collect();
    let ts = TripleSet::new(chain, 20, 2).unwrap();
    let cfg = KGEConfig { dim: 12, batch_size: 4, epochs: 30, ..KGEConfig::default() };
    let mut steps = 0;
    train_transe_observed::<f64>(&ts, &cfg, |emb| {
        steps += 1;
        for i in 0..emb.entities.rows() {
            let n = emb.entities.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-6, "row {i} norm {n} at step {steps}");
        }
    })
    .unwrap();
    assert_eq!(steps, 30 * 5);

    train_transe_observed::<f32>(&ts, &cfg, |emb| {
        for i in 0..emb.entities.rows() {
            let n = emb.entities.row(i).iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-6, "f32 row {i} norm {n}");
        }
    })
    .unwrap();
}

#[test]
fn toy_kg_ranking() {
    let ts = toy_kg();
    let emb = train_transe::<f64>(&ts, &toy_config(500)).unwrap().embeddings;
    let d = |t: Triple| emb.score(t, Distance::L2);
    assert!(d(Triple::new(0, 0, 1)) < d(Triple::new(0, 0, 2)));
    for &t in ts.triples() {
        let true_d = d(t);
        let better = (0..3).filter(|&e| d(Triple::new(t.head, 0, e)) < true_d).count();
        assert!(better < 2, "true tail of {t:?} ranks {}", better + 1);
    }
}

/// Each epoch of the two-triple graph sees only two negatives, so the
/// curve is averaged over seeds before counting upticks.
#[test]
fn toy_kg_loss_mostly_decreases() {
    let seeds = 200;
    let mut mean = vec![0.0; 10];
    for seed in 0..seeds {
        let cfg = KGEConfig { seed, ..toy_config(10) };
        let losses = train_transe::<f64>(&toy_kg(), &cfg).unwrap().epoch_losses;
        assert_eq!(losses.len(), 10);
        for (m, l) in mean.iter_mut().zip(losses) {
            *m += l / seeds as f64;
        }
    }
    let upticks = mean.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(upticks <= 2, "{mean:?}");
    assert!(mean[9] < mean[0]);
}

#[test]
fn distance_is_translation_residual() {
    let d = distance(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], Distance::L2);
    assert_eq!(d, 0.0);
    let d = distance(&[0.0, 0.0], &[3.0, 0.0], &[0.0, 4.0], Distance::L2);
    assert!((d - 5.0f64).abs() < 1e-12);
}
