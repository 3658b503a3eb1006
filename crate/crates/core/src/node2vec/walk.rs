use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AliasTable, WalkConfig};
use crate::error::Result;
use crate::graph::{Adjacency, Graph};

/// Normalized second-order transition probabilities out of `curr`, aligned
/// with `adj.neighbors(curr)`.
///
/// With no previous node the step is uniform. Otherwise a candidate `x`
/// gets weight `1/p` if it is `prev`, `1` if `prev -> x` is an edge, and
/// `1/q` otherwise. Empty when `curr` has no neighbors.
pub fn transition_weights(
    adj: &Adjacency,
    prev: Option<usize>,
    curr: usize,
    p: f64,
    q: f64,
) -> Vec<f64> {
    let nbrs = adj.neighbors(curr);
    if nbrs.is_empty() {
        return Vec::new();
    }
    let raw: Vec<f64> = match prev {
        None => vec![1.0; nbrs.len()],
        Some(t) => nbrs.iter().map(|&x| bias(adj, t, x, p, q)).collect(),
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[inline]
fn bias(adj: &Adjacency, prev: usize, x: usize, p: f64, q: f64) -> f64 {
    if x == prev {
        1.0 / p
    } else if adj.contains(prev, x) {
        1.0
    } else {
        1.0 / q
    }
}

/// Draws biased walks over one adjacency.
///
/// Second-order alias tables are built per directed edge `(prev, curr)` when
/// their total size fits in the budget; otherwise each step normalizes the
/// weights on the fly.
pub struct WalkSampler<'a> {
    adj: &'a Adjacency,
    p: f64,
    q: f64,
    edge_tables: Option<Vec<Option<AliasTable>>>,
}

impl<'a> WalkSampler<'a> {
    pub fn new(adj: &'a Adjacency, p: f64, q: f64, alias_budget: usize) -> Self {
        let n = adj.num_nodes();
        let entries: usize = (0..n)
            .flat_map(|t| adj.neighbors(t).iter().map(|&v| adj.degree(v)))
            .sum();
        let edge_tables = (entries <= alias_budget).then(|| {
            (0..n)
                .flat_map(|t| adj.neighbors(t).iter().map(move |&v| (t, v)))
                .map(|(t, v)| {
                    let w: Vec<f64> = adj
                        .neighbors(v)
                        .iter()
                        .map(|&x| bias(adj, t, x, p, q))
                        .collect();
                    AliasTable::new(&w)
                })
                .collect()
        });
        if edge_tables.is_none() {
            log::info!("walk alias tables need {entries} entries; sampling on the fly");
        }
        Self {
            adj,
            p,
            q,
            edge_tables,
        }
    }

    pub fn uses_alias_tables(&self) -> bool {
        self.edge_tables.is_some()
    }

    /// One step from `curr`, or `None` at a dead end.
    pub fn step<R: Rng + ?Sized>(
        &self,
        prev: Option<usize>,
        curr: usize,
        rng: &mut R,
    ) -> Option<usize> {
        let nbrs = self.adj.neighbors(curr);
        if nbrs.is_empty() {
            return None;
        }
        let Some(t) = prev else {
            return Some(nbrs[rng.random_range(0..nbrs.len())]);
        };
        if let Some(tables) = &self.edge_tables {
            // prev -> curr was the last move, so curr is in prev's list.
            let k = self.adj.neighbors(t).binary_search(&curr).ok()?;
            let table = tables[self.adj.offset(t) + k].as_ref()?;
            return Some(nbrs[table.sample(rng)]);
        }
        let w = transition_weights(self.adj, prev, curr, self.p, self.q);
        let mut u: f64 = rng.random();
        for (i, wi) in w.iter().enumerate() {
            if u < *wi {
                return Some(nbrs[i]);
            }
            u -= wi;
        }
        nbrs.last().copied()
    }

    /// A walk of at most `length` nodes starting at `start`; shorter only if
    /// it reaches a node without out-neighbors.
    pub fn walk<R: Rng + ?Sized>(&self, start: usize, length: usize, rng: &mut R) -> Vec<usize> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start);
        let mut prev = None;
        while walk.len() < length {
            let curr = *walk.last().unwrap();
            match self.step(prev, curr, rng) {
                Some(next) => {
                    prev = Some(curr);
                    walk.push(next);
                }
                None => break,
            }
        }
        walk
    }
}

/// `walks_per_node` rounds, each starting one walk from every node in a
/// freshly shuffled order.
///
/// The output is a pure function of `(graph, config)`: worker `w` draws from
/// its own ChaCha stream and results are concatenated in node-order position.
pub fn generate_walks(graph: &Graph, config: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    config.validate()?;
    let adj = if config.directed {
        graph.out_adjacency()
    } else {
        graph.undirected()
    };
    let n = adj.num_nodes();
    let sampler = WalkSampler::new(adj, config.p, config.q, config.alias_budget);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worker_rngs: Vec<ChaCha8Rng> = (0..config.workers)
        .map(|w| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(w as u64 + 1);
            r
        })
        .collect();

    let mut walks = Vec::with_capacity(n * config.walks_per_node);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..config.walks_per_node {
        order.shuffle(&mut order_rng);
        if config.workers == 1 || n < config.workers {
            let rng = &mut worker_rngs[0];
            walks.extend(order.iter().map(|&s| sampler.walk(s, config.walk_length, rng)));
            continue;
        }
        let chunk = n.div_ceil(config.workers);
        let parts: Vec<Vec<Vec<usize>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = order
                .chunks(chunk)
                .zip(worker_rngs.iter_mut())
                .map(|(starts, rng)| {
                    let sampler = &sampler;
                    scope.spawn(move || {
                        starts
                            .iter()
                            .map(|&s| sampler.walk(s, config.walk_length, rng))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("walk worker panicked"))
                .collect()
        });
        walks.extend(parts.into_iter().flatten());
    }
    Ok(walks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1)).collect()).unwrap()
    }

    #[test]
    fn path_probabilities() {
        // 0 - 1 - 2, arriving at 1 from 0: back to 0 weighs 1/p, onward 1/q.
        let g = path(3);
        let w = transition_weights(g.undirected(), Some(0), 1, 0.5, 2.0);
        let (back, on) = (2.0, 0.5);
        assert!((w[0] - back / (back + on)).abs() < 1e-12);
        assert!((w[1] - on / (back + on)).abs() < 1e-12);
    }

    #[test]
    fn triangle_probabilities() {
        let g = Graph::from_edges(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        // From 1 having come from 0: 0 weighs 1/p, 2 is adjacent to 0 so 1.
        let w = transition_weights(g.undirected(), Some(0), 1, 0.25, 4.0);
        assert!((w[0] - 4.0 / 5.0).abs() < 1e-12);
        assert!((w[1] - 1.0 / 5.0).abs() < 1e-12);
        let first = transition_weights(g.undirected(), None, 1, 0.25, 4.0);
        assert_eq!(first, vec![0.5, 0.5]);
    }

    #[test]
    fn isolated_nodes_give_singleton_walks() {
        let g = Graph::from_edges(3, vec![(0, 1)]).unwrap();
        let cfg = WalkConfig {
            walk_length: 5,
            walks_per_node: 2,
            window: 2,
            ..WalkConfig::default()
        };
        let walks = generate_walks(&g, &cfg).unwrap();
        assert_eq!(walks.len(), 6);
        for w in &walks {
            if w[0] == 2 {
                assert_eq!(w, &[2]);
            } else {
                assert_eq!(w.len(), 5);
            }
        }
    }

    #[test]
    fn alias_and_fallback_agree_in_law() {
        let g = Graph::from_edges(5, vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 1)]).unwrap();
        let adj = g.undirected();
        let fast = WalkSampler::new(adj, 0.5, 2.0, usize::MAX);
        let slow = WalkSampler::new(adj, 0.5, 2.0, 0);
        assert!(fast.uses_alias_tables() && !slow.uses_alias_tables());
        let exact = transition_weights(adj, Some(0), 2, 0.5, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for sampler in [&fast, &slow] {
            let mut counts = vec![0usize; adj.degree(2)];
            let trials = 50_000;
            for _ in 0..trials {
                let x = sampler.step(Some(0), 2, &mut rng).unwrap();
                counts[adj.neighbors(2).binary_search(&x).unwrap()] += 1;
            }
            for (c, p) in counts.iter().zip(&exact) {
                assert!((*c as f64 / trials as f64 - p).abs() < 0.01);
            }
        }
    }

    #[test]
    fn deterministic_per_seed_and_workers() {
        let g = path(40);
        let mut cfg = WalkConfig {
            walk_length: 10,
            walks_per_node: 3,
            window: 3,
            workers: 3,
            ..WalkConfig::default()
        };
        let a = generate_walks(&g, &cfg).unwrap();
        assert_eq!(a, generate_walks(&g, &cfg).unwrap());
        cfg.seed = 1;
        assert_ne!(a, generate_walks(&g, &cfg).unwrap());
    }
}
