//! TransE semantic embeddings over citation triples.
//!
//! Every directed citation becomes `(citing, cites, cited)` under a single
//! relation. Training minimizes the margin ranking loss
//! `max(0, γ + d(h + r, t) - d(h' + r, t'))` against one corrupted triple per
//! positive with row-sparse minibatch Adagrad.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numkit::{adagrad_update, Matrix, ADAGRAD_EPS};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleSet {
    triples: Vec<Triple>,
    num_entities: usize,
    num_relations: usize,
}

impl TripleSet {
    pub fn new(triples: Vec<Triple>, num_entities: usize, num_relations: usize) -> Result<Self> {
        if let Some(t) = triples
            .iter()
            .find(|t| t.head >= num_entities || t.tail >= num_entities || t.relation >= num_relations)
        {
            return Err(Error::Validation(format!("triple {t:?} outside table bounds")));
        }
        Ok(Self {
            triples,
            num_entities,
            num_relations,
        })
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }
}

/// One `cites` triple per stored edge; with `both_directions` the reversed
/// edge is added under the same relation.
pub fn edges_to_triples(graph: &Graph, both_directions: bool) -> TripleSet {
    let mut triples: Vec<Triple> = graph
        .edges()
        .iter()
        .map(|&(s, d)| Triple::new(s, 0, d))
        .collect();
    if both_directions {
        let reversed: Vec<Triple> = triples
            .iter()
            .map(|t| Triple::new(t.tail, 0, t.head))
            .collect();
        triples.extend(reversed);
        triples.sort_unstable();
        triples.dedup();
    }
    TripleSet {
        triples,
        num_entities: graph.num_nodes(),
        num_relations: 1,
    }
}

/// Replaces the head or the tail (each with probability 1/2, never both) by a
/// different uniformly drawn entity.
pub fn sample_negative<R: Rng + ?Sized>(triple: Triple, num_entities: usize, rng: &mut R) -> Triple {
    assert!(num_entities >= 2, "corruption needs at least two entities");
    let corrupt_head = rng.random_bool(0.5);
    let original = if corrupt_head { triple.head } else { triple.tail };
    let mut e = rng.random_range(0..num_entities - 1);
    if e >= original {
        e += 1;
    }
    if corrupt_head {
        Triple { head: e, ..triple }
    } else {
        Triple { tail: e, ..triple }
    }
}

pub fn margin_loss<T: Scalar>(positive_distance: T, negative_distance: T, gamma: T) -> T {
    (gamma + positive_distance - negative_distance).max(T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    L1,
    L2,
}

/// `d(h + r, t)`.
pub fn distance<T: Scalar>(h: &[T], r: &[T], t: &[T], kind: Distance) -> T {
    let mut acc = T::zero();
    for ((&a, &b), &c) in h.iter().zip(r).zip(t) {
        let x = a + b - c;
        acc += match kind {
            Distance::L1 => x.abs(),
            Distance::L2 => x * x,
        };
    }
    match kind {
        Distance::L1 => acc,
        Distance::L2 => acc.sqrt(),
    }
}

/// Writes `∂d(h + r, t)/∂(h + r - t)` into `out`. Zero where the distance is
/// not differentiable (the origin for L2, zero coordinates for L1).
pub fn distance_grad<T: Scalar>(h: &[T], r: &[T], t: &[T], kind: Distance, out: &mut [T]) {
    let d = distance(h, r, t, kind);
    for (((o, &a), &b), &c) in out.iter_mut().zip(h).zip(r).zip(t) {
        let x = a + b - c;
        *o = match kind {
            Distance::L2 if d > T::zero() => x / d,
            Distance::L2 => T::zero(),
            Distance::L1 => {
                if x > T::zero() {
                    T::one()
                } else if x < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            }
        };
    }
}

/// Gradients of one hinge term with respect to each row it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient<T> {
    pub loss: T,
    pub positive_head: Vec<T>,
    pub positive_tail: Vec<T>,
    pub negative_head: Vec<T>,
    pub negative_tail: Vec<T>,
    pub relation: Vec<T>,
}

/// Loss and hand-derived gradient of `max(0, γ + d(h+r,t) - d(h'+r,t'))`.
#[allow(clippy::too_many_arguments)]
pub fn pair_gradient<T: Scalar>(
    h: &[T],
    r: &[T],
    t: &[T],
    h_neg: &[T],
    t_neg: &[T],
    gamma: T,
    kind: Distance,
) -> PairGradient<T> {
    let dim = h.len();
    let dp = distance(h, r, t, kind);
    let dn = distance(h_neg, r, t_neg, kind);
    let loss = margin_loss(dp, dn, gamma);
    let mut gp = vec![T::zero(); dim];
    let mut gn = vec![T::zero(); dim];
    if loss > T::zero() {
        distance_grad(h, r, t, kind, &mut gp);
        distance_grad(h_neg, r, t_neg, kind, &mut gn);
    }
    PairGradient {
        loss,
        positive_head: gp.clone(),
        positive_tail: gp.iter().map(|&g| -g).collect(),
        negative_head: gn.iter().map(|&g| -g).collect(),
        negative_tail: gn.clone(),
        relation: gp.iter().zip(&gn).map(|(&a, &b)| a - b).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KGEConfig {
    pub dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Hinge margin γ.
    pub margin: f64,
    pub distance: Distance,
    /// Resample corruptions that are themselves known triples.
    pub filter_negatives: bool,
    /// Add each citation reversed as a second triple.
    pub both_directions: bool,
    pub seed: u64,
}

impl Default for KGEConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            batch_size: 2000,
            learning_rate: 1.0,
            epochs: 2000,
            margin: 1.0,
            distance: Distance::L2,
            filter_negatives: false,
            both_directions: false,
            seed: 0,
        }
    }
}

impl KGEConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::Config("TransE margin must be positive".into()));
        }
        if self.dim == 0 || self.batch_size == 0 {
            return Err(Error::Config("TransE dim and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("TransE learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KGEmbeddings<T> {
    pub entities: Matrix<T>,
    pub relations: Matrix<T>,
}

impl<T: Scalar> KGEmbeddings<T> {
    /// Uniform in `±6/√dim`, entity rows then scaled to unit length.
    pub fn init<R: Rng + ?Sized>(num_entities: usize, num_relations: usize, dim: usize, rng: &mut R) -> Self {
        let bound = 6.0 / (dim as f64).sqrt();
        let mut draw = |rows| Matrix::from_fn(rows, dim, |_, _| T::lit(rng.random_range(-bound..bound)));
        let mut entities = draw(num_entities);
        let relations = draw(num_relations);
        for i in 0..num_entities {
            normalize(entities.row_mut(i));
        }
        Self { entities, relations }
    }

    pub fn score(&self, t: Triple, kind: Distance) -> T {
        distance(
            self.entities.row(t.head),
            self.relations.row(t.relation),
            self.entities.row(t.tail),
            kind,
        )
    }
}

fn normalize<T: Scalar>(row: &mut [T]) {
    let norm = row.iter().map(|&x| x * x).sum::<T>().sqrt();
    if norm > T::zero() {
        row.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Per-epoch mean hinge loss, plus the final tables.
#[derive(Debug, Clone)]
pub struct TransEOutcome<T> {
    pub embeddings: KGEmbeddings<T>,
    pub epoch_losses: Vec<f64>,
}

pub fn train_transe<T: Scalar>(triples: &TripleSet, config: &KGEConfig) -> Result<TransEOutcome<T>> {
    train_transe_observed(triples, config, |_| {})
}

/// [`train_transe`] with a callback after every optimizer step.
pub fn train_transe_observed<T: Scalar>(
    triples: &TripleSet,
    config: &KGEConfig,
    mut observe: impl FnMut(&KGEmbeddings<T>),
) -> Result<TransEOutcome<T>> {
    config.validate()?;
    if triples.is_empty() {
        return Err(Error::Validation("no triples to train on".into()));
    }
    let n = triples.num_entities();
    if n < 2 {
        return Err(Error::Validation("TransE needs at least two entities".into()));
    }
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut emb = KGEmbeddings::<T>::init(n, triples.num_relations(), dim, &mut rng);
    let mut ent_acc = Matrix::<T>::zeros(n, dim);
    let mut rel_acc = Matrix::<T>::zeros(triples.num_relations(), dim);
    let mut ent_grad = Matrix::<T>::zeros(n, dim);
    let mut rel_grad = Matrix::<T>::zeros(triples.num_relations(), dim);
    let mut touched_ent = vec![false; n];
    let mut touched_rel = vec![false; triples.num_relations()];
    let known: Option<HashSet<Triple>> = config
        .filter_negatives
        .then(|| triples.triples().iter().copied().collect());
    let (lr, eps, gamma) = (T::lit(config.learning_rate), T::lit(ADAGRAD_EPS), T::lit(config.margin));

    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut gp = vec![T::zero(); dim];
    let mut gn = vec![T::zero(); dim];
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut ent_rows = Vec::new();
            let mut rel_rows = Vec::new();
            let mut batch_loss = T::zero();
            let scale = T::one() / T::lit(batch.len() as f64);
            for &k in batch {
                let pos = triples.triples()[k];
                let neg = loop {
                    let c = sample_negative(pos, n, &mut rng);
                    if known.as_ref().is_none_or(|s| !s.contains(&c)) {
                        break c;
                    }
                };
                let r = emb.relations.row(pos.relation);
                let (h, t) = (emb.entities.row(pos.head), emb.entities.row(pos.tail));
                let (hn, tn) = (emb.entities.row(neg.head), emb.entities.row(neg.tail));
                let dp = distance(h, r, t, config.distance);
                let dn = distance(hn, r, tn, config.distance);
                let loss = margin_loss(dp, dn, gamma);
                batch_loss += loss;
                if loss <= T::zero() {
                    continue;
                }
                distance_grad(h, r, t, config.distance, &mut gp);
                distance_grad(hn, r, tn, config.distance, &mut gn);
                for (row, sign, g) in [
                    (pos.head, T::one(), &gp),
                    (pos.tail, -T::one(), &gp),
                    (neg.head, -T::one(), &gn),
                    (neg.tail, T::one(), &gn),
                ] {
                    if !touched_ent[row] {
                        touched_ent[row] = true;
                        ent_rows.push(row);
                    }
                    for (a, &b) in ent_grad.row_mut(row).iter_mut().zip(g.iter()) {
                        *a += sign * scale * b;
                    }
                }
                if !touched_rel[pos.relation] {
                    touched_rel[pos.relation] = true;
                    rel_rows.push(pos.relation);
                }
                for ((a, &p), &q) in rel_grad.row_mut(pos.relation).iter_mut().zip(&gp).zip(&gn) {
                    *a += scale * (p - q);
                }
            }
            let batch_loss = batch_loss.to_f64_lossy();
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "TransE loss at epoch {epoch}: {batch_loss}"
                )));
            }
            epoch_loss += batch_loss;
            for &row in &ent_rows {
                adagrad_update(emb.entities.row_mut(row), ent_grad.row(row), ent_acc.row_mut(row), lr, eps);
                normalize(emb.entities.row_mut(row));
                ent_grad.row_mut(row).iter_mut().for_each(|g| *g = T::zero());
                touched_ent[row] = false;
            }
            for &row in &rel_rows {
                adagrad_update(emb.relations.row_mut(row), rel_grad.row(row), rel_acc.row_mut(row), lr, eps);
                rel_grad.row_mut(row).iter_mut().for_each(|g| *g = T::zero());
                touched_rel[row] = false;
            }
            observe(&emb);
        }
        let mean = epoch_loss / triples.len() as f64;
        if epoch % 100 == 0 {
            log::debug!("TransE epoch {epoch}: loss {mean:.5}");
        }
        epoch_losses.push(mean);
    }
    if !emb.entities.all_finite() || !emb.relations.all_finite() {
        return Err(Error::NonFinite("TransE tables".into()));
    }
    Ok(TransEOutcome {
        embeddings: emb,
        epoch_losses,
    })
}
