use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AliasTable, WalkConfig};
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorRole {
    /// Center-word vectors; the exported embedding.
    Input,
    /// Output-side vectors scored against centers.
    Context,
}

/// A learned node-indexed table tagged with which side of the model it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings<T> {
    vectors: Matrix<T>,
    role: VectorRole,
}

impl<T: Scalar> NodeEmbeddings<T> {
    pub fn new(vectors: Matrix<T>, role: VectorRole) -> Result<Self> {
        if !vectors.all_finite() {
            return Err(Error::NonFinite("embedding table".into()));
        }
        Ok(Self { vectors, role })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.vectors
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.vectors
    }

    pub fn role(&self) -> VectorRole {
        self.role
    }

    pub fn num_nodes(&self) -> usize {
        self.vectors.rows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }
}

/// Skip-gram parameters: one input and one context vector per node.
#[derive(Debug, Clone)]
pub struct SkipGram<T> {
    pub input: Matrix<T>,
    pub context: Matrix<T>,
}

impl<T: Scalar> SkipGram<T> {
    /// Input vectors uniform in `[-0.5/dim, 0.5/dim]`, context vectors zero.
    pub fn init<R: Rng + ?Sized>(num_nodes: usize, dim: usize, rng: &mut R) -> Self {
        let half = 0.5 / dim as f64;
        let input = Matrix::from_fn(num_nodes, dim, |_, _| {
            T::lit(rng.random_range(-half..half))
        });
        Self {
            input,
            context: Matrix::zeros(num_nodes, dim),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.input.rows()
    }

    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    /// One pass over `walks` with the learning rate interpolated linearly
    /// between `lr_start` and `lr_end` by token position. Returns the mean
    /// negative-sampling loss per positive pair.
    fn train_pass<R: Rng + ?Sized>(
        &mut self,
        walks: &[Vec<usize>],
        config: &WalkConfig,
        noise: &AliasTable,
        lr_at: impl Fn(usize) -> f64,
        rng: &mut R,
    ) -> f64 {
        let mut negatives = Vec::with_capacity(config.negatives);
        let mut scratch = vec![T::zero(); self.dim()];
        let mut token = 0usize;
        let (mut loss, mut pairs) = (0.0, 0usize);
        for walk in walks {
            for (i, &center) in walk.iter().enumerate() {
                let lr = T::lit(lr_at(token));
                token += 1;
                let reach = if config.dynamic_window && config.window > 0 {
                    config.window - rng.random_range(0..config.window)
                } else {
                    config.window
                };
                let lo = i.saturating_sub(reach);
                let hi = (i + reach + 1).min(walk.len());
                for (j, &target) in walk.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    negatives.clear();
                    while negatives.len() < config.negatives {
                        let n = noise.sample(rng);
                        if n != target {
                            negatives.push(n);
                        }
                    }
                    loss += pair_update(self, center, target, &negatives, lr, &mut scratch)
                        .to_f64_lossy();
                    pairs += 1;
                }
            }
        }
        if pairs == 0 {
            0.0
        } else {
            loss / pairs as f64
        }
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn pair_update<T: Scalar>(
    model: &mut SkipGram<T>,
    center: usize,
    target: usize,
    negatives: &[usize],
    lr: T,
    neu1e: &mut [T],
) -> T {
    neu1e.iter_mut().for_each(|v| *v = T::zero());
    let tiny = T::lit(1e-12);
    let mut loss = T::zero();
    let u = model.input.row(center);
    for (k, &c) in std::iter::once(&target).chain(negatives).enumerate() {
        let label = if k == 0 { T::one() } else { T::zero() };
        let ctx = model.context.row_mut(c);
        let s = sigmoid(dot(u, ctx));
        loss -= if k == 0 { s } else { T::one() - s }.max(tiny).ln();
        let g = (label - s) * lr;
        axpy(g, ctx, neu1e);
        axpy(g, u, ctx);
    }
    axpy(T::one(), neu1e, model.input.row_mut(center));
    loss
}

/// Single SGD step on one (center, context) pair and its negatives; ascends
/// `log σ(c·u) + Σ log σ(-n·u)`. Returns the pair's loss before the step.
pub fn sgns_pair_update<T: Scalar>(
    model: &mut SkipGram<T>,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: T,
) -> T {
    let mut scratch = vec![T::zero(); model.dim()];
    pair_update(model, center, context, negatives, lr, &mut scratch)
}

/// `σ(f_ctx(context) · f_in(center))`.
pub fn positive_pair_score<T: Scalar>(model: &SkipGram<T>, center: usize, context: usize) -> T {
    sigmoid(dot(model.input.row(center), model.context.row(context)))
}

pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let ab = dot(a, b).to_f64_lossy();
    let na = dot(a, a).to_f64_lossy().sqrt();
    let nb = dot(b, b).to_f64_lossy().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        ab / (na * nb)
    }
}

/// Trains Skip-gram with negative sampling on `walks` and returns the input
/// vectors. Noise nodes are drawn from unigram frequencies raised to 0.75.
pub fn skipgram_train<T: Scalar>(
    walks: &[Vec<usize>],
    num_nodes: usize,
    config: &WalkConfig,
) -> Result<NodeEmbeddings<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0xC0FFEE);
    let mut model = SkipGram::init(num_nodes, config.dim, &mut rng);
    train_existing(&mut model, walks, config, &mut rng)?;
    NodeEmbeddings::new(model.input, VectorRole::Input)
}

/// Continues training `model` in place. Fails if the model width differs
/// from `config.dim` or a walk mentions a node outside the table.
pub fn train_existing<T: Scalar, R: Rng + ?Sized>(
    model: &mut SkipGram<T>,
    walks: &[Vec<usize>],
    config: &WalkConfig,
    rng: &mut R,
) -> Result<()> {
    if walks.is_empty() {
        return Err(Error::Validation("no walks to train on".into()));
    }
    if model.dim() != config.dim {
        return Err(Error::Shape(format!(
            "model has dim {}, config asks for {}",
            model.dim(),
            config.dim
        )));
    }
    let n = model.num_nodes();
    let mut counts = vec![0.0f64; n];
    for &v in walks.iter().flatten() {
        if v >= n {
            return Err(Error::Validation(format!("walk visits node {v} of {n}")));
        }
        counts[v] += 1.0;
    }
    let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
    let noise = AliasTable::new(&weights)
        .ok_or_else(|| Error::Validation("walks contain no nodes".into()))?;

    let tokens_per_pass: usize = walks.iter().map(Vec::len).sum();
    let total = (tokens_per_pass * config.epochs).max(1) as f64;
    let (lr0, lr1) = (config.learning_rate, config.min_learning_rate);
    for epoch in 0..config.epochs {
        let offset = epoch * tokens_per_pass;
        let lr_at = |t: usize| lr0 - (lr0 - lr1) * ((offset + t) as f64 / total);
        let loss = model.train_pass(walks, config, &noise, lr_at, rng);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("skip-gram loss at epoch {epoch}")));
        }
        log::debug!("skip-gram epoch {epoch}: loss {loss:.4}");
    }
    if !model.input.all_finite() {
        return Err(Error::NonFinite("skip-gram input vectors".into()));
    }
    Ok(())
}
