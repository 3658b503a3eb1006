//! Bidirectional cross-attention between the structural and semantic
//! embedding tables.
//!
//! For one direction, queries and keys both come from the source table and
//! values from the other:
//! `softmax((S Wq)(S Wk)^T / √d_a) · V`, global over all nodes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{softmax_rows, Matrix, Parameter, Tape, Var};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Projections train with the classifier.
    Joint,
    /// Fuse once with fixed random projections before training.
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionConfig {
    /// Per-head attention width.
    pub d_a: usize,
    pub num_heads: usize,
    pub mode: FusionMode,
    /// Rows per block for inference-time evaluation; 0 evaluates densely.
    pub block_rows: usize,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            d_a: 64,
            num_heads: 1,
            mode: FusionMode::Joint,
            block_rows: 0,
        }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_a == 0 || self.num_heads == 0 {
            return Err(Error::Config("attention d_a and num_heads must be positive".into()));
        }
        Ok(())
    }
}

/// Query and key projections of one head, `source_dim × d_a` each.
#[derive(Debug, Clone)]
pub struct AttentionHead<T> {
    pub query: Parameter<T>,
    pub key: Parameter<T>,
}

impl<T: Scalar> AttentionHead<T> {
    pub fn new(query: Matrix<T>, key: Matrix<T>, name: &str) -> Result<Self> {
        if query.shape() != key.shape() {
            return Err(Error::shape(format!(
                "query projection {:?} vs key projection {:?}",
                query.shape(),
                key.shape()
            )));
        }
        Ok(Self {
            query: Parameter::new(format!("{name}.query"), query),
            key: Parameter::new(format!("{name}.key"), key),
        })
    }

    pub fn d_a(&self) -> usize {
        self.query.value.cols()
    }
}

/// All heads for one attention direction.
#[derive(Debug, Clone)]
pub struct CrossAttentionParams<T> {
    pub heads: Vec<AttentionHead<T>>,
}

impl<T: Scalar> CrossAttentionParams<T> {
    /// Glorot-uniform projections from `source_dim` to `d_a` per head.
    pub fn init<R: Rng + ?Sized>(
        source_dim: usize,
        d_a: usize,
        num_heads: usize,
        name: &str,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / (source_dim + d_a) as f64).sqrt();
        let mut draw = || Matrix::from_fn(source_dim, d_a, |_, _| T::lit(rng.random_range(-bound..bound)));
        let heads = (0..num_heads)
            .map(|h| {
                let (q, k) = (draw(), draw());
                AttentionHead::new(q, k, &format!("{name}.head{h}")).expect("same shape")
            })
            .collect();
        Self { heads }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        self.heads
            .iter_mut()
            .flat_map(|h| [&mut h.query, &mut h.key])
            .collect()
    }

    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        self.heads.iter().flat_map(|h| [&h.query, &h.key]).collect()
    }
}

/// Both directions: `to_graph` reads the semantic table as query/key source
/// and enhances the structural table; `to_kg` the reverse.
#[derive(Debug, Clone)]
pub struct FusionParams<T> {
    pub to_graph: CrossAttentionParams<T>,
    pub to_kg: CrossAttentionParams<T>,
}

impl<T: Scalar> FusionParams<T> {
    pub fn init<R: Rng + ?Sized>(
        graph_dim: usize,
        kg_dim: usize,
        config: &AttentionConfig,
        rng: &mut R,
    ) -> Self {
        Self {
            to_graph: CrossAttentionParams::init(kg_dim, config.d_a, config.num_heads, "attn_g", rng),
            to_kg: CrossAttentionParams::init(graph_dim, config.d_a, config.num_heads, "attn_kg", rng),
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut v = self.to_graph.parameters_mut();
        v.extend(self.to_kg.parameters_mut());
        v
    }

    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        let mut v = self.to_graph.parameters();
        v.extend(self.to_kg.parameters());
        v
    }
}

/// Enhanced tables; shapes match the value tables they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbeddings<T> {
    pub graph: Matrix<T>,
    pub kg: Matrix<T>,
}

fn check_rows<T: Scalar>(q: &Matrix<T>, k: &Matrix<T>, v: &Matrix<T>) -> Result<()> {
    if q.rows() != k.rows() || q.rows() != v.rows() {
        return Err(Error::shape(format!(
            "attention inputs have {}, {} and {} rows",
            q.rows(),
            k.rows(),
            v.rows()
        )));
    }
    Ok(())
}

/// Attention matrix of one head, `N × N`, rows summing to one.
pub fn attention_weights<T: Scalar>(
    queries_src: &Matrix<T>,
    keys_src: &Matrix<T>,
    head: &AttentionHead<T>,
) -> Result<Matrix<T>> {
    let (q, k) = project(queries_src, keys_src, head)?;
    Ok(softmax_rows(&q.matmul_nt(&k)?))
}

fn project<T: Scalar>(
    queries_src: &Matrix<T>,
    keys_src: &Matrix<T>,
    head: &AttentionHead<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let mut q = queries_src.matmul(&head.query.value)?;
    q.scale_inplace(T::one() / T::lit(head.d_a() as f64).sqrt());
    let k = keys_src.matmul(&head.key.value)?;
    Ok((q, k))
}

/// One head without gradient tracking.
pub fn cross_attention<T: Scalar>(
    queries_src: &Matrix<T>,
    keys_src: &Matrix<T>,
    values: &Matrix<T>,
    head: &AttentionHead<T>,
) -> Result<Matrix<T>> {
    check_rows(queries_src, keys_src, values)?;
    attention_weights(queries_src, keys_src, head)?.matmul(values)
}

/// [`cross_attention`] evaluated `block` query rows at a time, so that only
/// a `block × N` score slab is live.
pub fn cross_attention_blocked<T: Scalar>(
    queries_src: &Matrix<T>,
    keys_src: &Matrix<T>,
    values: &Matrix<T>,
    head: &AttentionHead<T>,
    block: usize,
) -> Result<Matrix<T>> {
    check_rows(queries_src, keys_src, values)?;
    if block == 0 {
        return cross_attention(queries_src, keys_src, values, head);
    }
    let (q, k) = project(queries_src, keys_src, head)?;
    let n = q.rows();
    let mut out = Matrix::zeros(n, values.cols());
    let mut start = 0;
    while start < n {
        let rows: Vec<usize> = (start..(start + block).min(n)).collect();
        let slab = softmax_rows(&q.select_rows(&rows).matmul_nt(&k)?).matmul(values)?;
        for (r, &i) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(slab.row(r));
        }
        start += block;
    }
    Ok(out)
}

/// Mean of the per-head outputs; one head is exactly [`cross_attention`].
pub fn multi_head<T: Scalar>(
    queries_src: &Matrix<T>,
    keys_src: &Matrix<T>,
    values: &Matrix<T>,
    params: &CrossAttentionParams<T>,
    block: usize,
) -> Result<Matrix<T>> {
    let Some((first, rest)) = params.heads.split_first() else {
        return Err(Error::Config("multi-head attention needs at least one head".into()));
    };
    let mut acc = cross_attention_blocked(queries_src, keys_src, values, first, block)?;
    if rest.is_empty() {
        return Ok(acc);
    }
    for head in rest {
        acc.add_assign(&cross_attention_blocked(queries_src, keys_src, values, head, block)?)?;
    }
    acc.scale_inplace(T::one() / T::lit(params.heads.len() as f64));
    Ok(acc)
}

/// Both directions, no gradients.
pub fn fuse<T: Scalar>(
    graph_embed: &Matrix<T>,
    kg_embed: &Matrix<T>,
    params: &FusionParams<T>,
    block: usize,
) -> Result<FusedEmbeddings<T>> {
    Ok(FusedEmbeddings {
        graph: multi_head(kg_embed, kg_embed, graph_embed, &params.to_graph, block)?,
        kg: multi_head(graph_embed, graph_embed, kg_embed, &params.to_kg, block)?,
    })
}

/// Tape variables for one head's projections.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub query: Var,
    pub key: Var,
}

/// One head on the tape, differentiable in every input.
pub fn cross_attention_tape<T: Scalar>(
    tape: &mut Tape<T>,
    queries_src: Var,
    keys_src: Var,
    values: Var,
    head: HeadVars,
) -> Result<Var> {
    check_rows(tape.value(queries_src), tape.value(keys_src), tape.value(values))?;
    let d_a = tape.value(head.query).cols();
    let q = tape.matmul(queries_src, head.query)?;
    let q = tape.scale(q, T::one() / T::lit(d_a as f64).sqrt());
    let k = tape.matmul(keys_src, head.key)?;
    let scores = tape.matmul_nt(q, k)?;
    let weights = tape.softmax_rows(scores);
    tape.matmul(weights, values)
}

pub fn multi_head_tape<T: Scalar>(
    tape: &mut Tape<T>,
    queries_src: Var,
    keys_src: Var,
    values: Var,
    heads: &[HeadVars],
) -> Result<Var> {
    let Some((first, rest)) = heads.split_first() else {
        return Err(Error::Config("multi-head attention needs at least one head".into()));
    };
    let mut acc = cross_attention_tape(tape, queries_src, keys_src, values, *first)?;
    if rest.is_empty() {
        return Ok(acc);
    }
    for head in rest {
        let h = cross_attention_tape(tape, queries_src, keys_src, values, *head)?;
        acc = tape.add(acc, h)?;
    }
    Ok(tape.scale(acc, T::one() / T::lit(heads.len() as f64)))
}

/// Records every projection of `params` as a trainable leaf.
pub fn record_heads<T: Scalar>(tape: &mut Tape<T>, params: &CrossAttentionParams<T>) -> Vec<HeadVars> {
    params
        .heads
        .iter()
        .map(|h| HeadVars {
            query: tape.param(&h.query),
            key: tape.param(&h.key),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    fn identity_head(d: usize) -> AttentionHead<f64> {
        AttentionHead::new(Matrix::identity(d), Matrix::identity(d), "t").unwrap()
    }

    #[test]
    fn single_node_returns_value_row() {
        let src = m(&[&[0.3, -2.0]]);
        let v = m(&[&[5.0, 6.0, 7.0]]);
        let out = cross_attention(&src, &src, &v, &identity_head(2)).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn identical_sources_average_values() {
        let src = m(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let v = m(&[&[1.0, 0.0], &[3.0, 4.0]]);
        let w = attention_weights(&src, &src, &identity_head(2)).unwrap();
        assert!(w.as_slice().iter().all(|&x| (x - 0.5).abs() < 1e-15));
        let out = cross_attention(&src, &src, &v, &identity_head(2)).unwrap();
        for i in 0..2 {
            assert!((out.get(i, 0) - 2.0).abs() < 1e-15);
            assert!((out.get(i, 1) - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_set_scores() {
        // Identity projections with d_a = 2: score = s_i·s_j / √2. Rows of
        // length r with r² = 2√2 give scores [[2, 0], [0, 2]].
        let r = (2.0 * 2f64.sqrt()).sqrt();
        let src = m(&[&[r, 0.0], &[0.0, r]]);
        let head = AttentionHead::new(Matrix::identity(2), Matrix::identity(2), "t").unwrap();
        let w = attention_weights(&src, &src, &head).unwrap();
        let e2 = 2f64.exp();
        let expect = [e2 / (e2 + 1.0), 1.0 / (e2 + 1.0)];
        assert!((w.get(0, 0) - expect[0]).abs() < 1e-12);
        assert!((w.get(0, 1) - expect[1]).abs() < 1e-12);
        assert!((w.get(1, 0) - expect[1]).abs() < 1e-12);
        assert!((w.get(1, 1) - expect[0]).abs() < 1e-12);
    }

    #[test]
    fn blocked_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = Matrix::<f32>::from_fn(37, 5, |_, _| rng.random_range(-1.0..1.0));
        let v = Matrix::<f32>::from_fn(37, 3, |_, _| rng.random_range(-1.0..1.0));
        let p = CrossAttentionParams::<f32>::init(5, 4, 1, "t", &mut rng);
        let dense = cross_attention(&src, &src, &v, &p.heads[0]).unwrap();
        for block in [1, 8, 36, 37, 100] {
            let b = cross_attention_blocked(&src, &src, &v, &p.heads[0], block).unwrap();
            assert_eq!(b, dense, "block {block}");
        }
    }

    #[test]
    fn tape_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let src = Matrix::<f64>::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let v = Matrix::<f64>::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let p = CrossAttentionParams::<f64>::init(3, 4, 3, "t", &mut rng);
        let plain = multi_head(&src, &src, &v, &p, 0).unwrap();
        let mut tape = Tape::new();
        let s = tape.constant(src);
        let vv = tape.constant(v);
        let heads = record_heads(&mut tape, &p);
        let out = multi_head_tape(&mut tape, s, s, vv, &heads).unwrap();
        assert_eq!(tape.value(out), &plain);
    }

    #[test]
    fn row_mismatch_is_shape_error() {
        let a = Matrix::<f64>::zeros(3, 2);
        let v = Matrix::<f64>::zeros(2, 2);
        let err = cross_attention(&a, &a, &v, &identity_head(2)).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }
}
