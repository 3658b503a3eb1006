//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] is built fresh for every forward pass. Each operation appends a
//! node holding its value and enough context to push gradients back to its
//! inputs; [`Tape::backward`] walks the nodes in reverse insertion order,
//! which is a valid topological order because inputs always precede outputs.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numkit::{CsrMatrix, Matrix, Parameter};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    SpMM(Arc<CsrMatrix<T>>, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Dropout(Var, Vec<T>),
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    Sum(Var),
    Nll {
        logits: Var,
        mask: Vec<usize>,
        labels: Vec<usize>,
        probs: Matrix<T>,
    },
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Recorded computation graph for one forward/backward pass.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value without gradient tracking.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf whose gradient is collected by [`Tape::backward`].
    pub fn leaf(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a trainable parameter as a gradient-tracking leaf.
    pub fn param(&mut self, p: &Parameter<T>) -> Var {
        self.leaf(p.value.clone())
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adds the gradient recorded for `v` into `p.grad`.
    pub fn accumulate_into(&self, v: Var, p: &mut Parameter<T>) -> Result<()> {
        let g = self
            .grad(v)
            .ok_or_else(|| Error::MissingGrad(p.name.clone()))?;
        p.accumulate_grad(g)
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let g = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), g))
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_nt(self.value(b))?;
        let g = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMulNt(a, b), g))
    }

    /// Sparse constant times dense operand; gradient flows into the dense side only.
    pub fn spmm(&mut self, s: &Arc<CsrMatrix<T>>, d: Var) -> Result<Var> {
        let value = s.spmm(self.value(d))?;
        let g = self.any_grad(&[d]);
        Ok(self.push(value, Op::SpMM(Arc::clone(s), d), g))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        let g = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), g))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        let g = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), g))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let value = self.value(a).map(|x| x * c);
        let g = self.any_grad(&[a]);
        self.push(value, Op::Scale(a, c), g)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        let g = self.any_grad(&[a]);
        self.push(value, Op::Relu(a), g)
    }

    /// Inverted dropout: in training mode each entry is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 - rate)`.
    /// Evaluation mode (or `rate == 0`) returns `a` unchanged.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = T::lit(1.0 / (1.0 - rate));
        let n = self.value(a).len();
        let mask: Vec<T> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let src = self.value(a);
        let data = src
            .as_slice()
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| x * m)
            .collect();
        let value = Matrix::new(src.rows(), src.cols(), data)?;
        let g = self.any_grad(&[a]);
        Ok(self.push(value, Op::Dropout(a, mask), g))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        let g = self.any_grad(&[a]);
        self.push(value, Op::SoftmaxRows(a), g)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(Error::shape("concat_cols of zero operands"));
        };
        let rows = self.value(*first).rows();
        if let Some(bad) = parts.iter().find(|v| self.value(**v).rows() != rows) {
            return Err(Error::shape(format!(
                "concat_cols: {} rows vs {rows}",
                self.value(*bad).rows()
            )));
        }
        let cols: usize = parts.iter().map(|v| self.value(*v).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut offset = 0;
            let dst = out.row_mut(i);
            for v in parts {
                let src = self.nodes[v.0].value.row(i);
                dst[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        let g = self.any_grad(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), g))
    }

    /// Sum of all entries, as a 1x1 value.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let g = self.any_grad(&[a]);
        self.push(Matrix::filled(1, 1, s), Op::Sum(a), g)
    }

    /// Mean negative log-likelihood of `labels[i]` under `softmax(logits[i])`
    /// over the rows listed in `mask`, via a stable log-sum-exp.
    pub fn nll_loss(&mut self, logits: Var, labels: &[usize], mask: &[usize]) -> Result<Var> {
        if mask.is_empty() {
            return Err(Error::Validation("nll_loss over an empty node set".into()));
        }
        let z = self.value(logits);
        if labels.len() != z.rows() {
            return Err(Error::shape(format!(
                "{} labels for {} logit rows",
                labels.len(),
                z.rows()
            )));
        }
        let mut probs = Matrix::zeros(mask.len(), z.cols());
        let mut total = T::zero();
        for (k, &i) in mask.iter().enumerate() {
            let y = labels[i];
            if y >= z.cols() {
                return Err(Error::Validation(format!(
                    "label {y} of node {i} outside {} classes",
                    z.cols()
                )));
            }
            let row = z.row(i);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut denom = T::zero();
            for (p, &x) in probs.row_mut(k).iter_mut().zip(row) {
                *p = (x - max).exp();
                denom += *p;
            }
            for p in probs.row_mut(k) {
                *p /= denom;
            }
            total += max + denom.ln() - row[y];
        }
        let loss = total / T::lit(mask.len() as f64);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "nll loss evaluated to {loss} over {} nodes",
                mask.len()
            )));
        }
        let g = self.any_grad(&[logits]);
        Ok(self.push(
            Matrix::filled(1, 1, loss),
            Op::Nll {
                logits,
                mask: mask.to_vec(),
                labels: mask.iter().map(|&i| labels[i]).collect(),
                probs,
            },
            g,
        ))
    }

    /// Fills gradients of the 1x1 `loss` with respect to every tracked ancestor.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got {}x{}",
                shape.0, shape.1
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Matrix::filled(1, 1, T::one()));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(upstream) = self.grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &upstream)?;
            self.grads[idx] = Some(upstream);
        }
        Ok(())
    }

    fn propagate(&mut self, idx: usize, up: &Matrix<T>) -> Result<()> {
        let nodes = &self.nodes;
        let mut contributions: Vec<(Var, Matrix<T>)> = Vec::new();
        let tracked = |v: &Var| nodes[v.0].needs_grad;
        match &nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if tracked(a) {
                    contributions.push((*a, up.matmul_nt(&nodes[b.0].value)?));
                }
                if tracked(b) {
                    contributions.push((*b, nodes[a.0].value.matmul_tn(up)?));
                }
            }
            Op::MatMulNt(a, b) => {
                // out = a b^T: da = up b, db = up^T a
                if tracked(a) {
                    contributions.push((*a, up.matmul(&nodes[b.0].value)?));
                }
                if tracked(b) {
                    contributions.push((*b, up.matmul_tn(&nodes[a.0].value)?));
                }
            }
            Op::SpMM(s, d) => {
                if tracked(d) {
                    contributions.push((*d, s.spmm_t(up)?));
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if tracked(v) {
                        contributions.push((*v, up.clone()));
                    }
                }
            }
            Op::Mul(a, b) => {
                if tracked(a) {
                    contributions.push((*a, up.zip_map(&nodes[b.0].value, |g, y| g * y)?));
                }
                if tracked(b) {
                    contributions.push((*b, up.zip_map(&nodes[a.0].value, |g, x| g * x)?));
                }
            }
            Op::Scale(a, c) => {
                let c = *c;
                contributions.push((*a, up.map(|g| g * c)));
            }
            Op::Relu(a) => {
                let x = &nodes[a.0].value;
                contributions.push((*a, up.zip_map(x, |g, x| if x > T::zero() { g } else { T::zero() })?));
            }
            Op::Dropout(a, mask) => {
                let data = up.as_slice().iter().zip(mask).map(|(&g, &m)| g * m).collect();
                contributions.push((*a, Matrix::new(up.rows(), up.cols(), data)?));
            }
            Op::SoftmaxRows(a) => {
                let y = &nodes[idx].value;
                let mut dx = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let yr = y.row(i);
                    let gr = up.row(i);
                    let dot: T = yr.iter().zip(gr).map(|(&p, &g)| p * g).sum();
                    for ((d, &p), &g) in dx.row_mut(i).iter_mut().zip(yr).zip(gr) {
                        *d = p * (g - dot);
                    }
                }
                contributions.push((*a, dx));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for v in parts {
                    let w = nodes[v.0].value.cols();
                    if tracked(v) {
                        contributions.push((*v, up.column_block(offset, w)));
                    }
                    offset += w;
                }
            }
            Op::Sum(a) => {
                let (r, c) = nodes[a.0].value.shape();
                contributions.push((*a, Matrix::filled(r, c, up.get(0, 0))));
            }
            Op::Nll {
                logits,
                mask,
                labels,
                probs,
            } => {
                let z = &nodes[logits.0].value;
                let mut dz = Matrix::zeros(z.rows(), z.cols());
                let w = up.get(0, 0) / T::lit(mask.len() as f64);
                for (k, (&i, &y)) in mask.iter().zip(labels).enumerate() {
                    let dst = dz.row_mut(i);
                    for (d, &p) in dst.iter_mut().zip(probs.row(k)) {
                        *d += w * p;
                    }
                    dst[y] -= w;
                }
                contributions.push((*logits, dz));
            }
        }
        for (v, g) in contributions {
            match &mut self.grads[v.0] {
                Some(acc) => acc.add_assign(&g)?,
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }
}

/// Row-wise softmax outside of any tape.
pub fn softmax_rows<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            denom += *v;
        }
        for v in row.iter_mut() {
            *v /= denom;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn relu_clamps() {
        let mut t = Tape::<f64>::new();
        let x = t.constant(m(&[&[-1.0, 2.0]]));
        let y = t.relu(x);
        assert_eq!(t.value(y), &m(&[&[0.0, 2.0]]));
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut t = Tape::<f64>::new();
        let x = t.constant(m(&[&[0.0, 0.0]]));
        let y = t.softmax_rows(x);
        assert_eq!(t.value(y), &m(&[&[0.5, 0.5]]));
    }

    #[test]
    fn dropout_eval_is_identity() {
        let mut t = Tape::<f64>::new();
        let x = t.constant(m(&[&[1.0, -3.0]]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = t.dropout(x, 0.2, false, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(matches!(
            t.dropout(x, 1.0, true, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn square_sum_gradient() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(m(&[&[3.0]]));
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &m(&[&[6.0]]));
    }

    #[test]
    fn dead_relu_has_zero_gradient() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(m(&[&[-2.0]]));
        let r = t.relu(x);
        let s = t.sum(r);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &m(&[&[0.0]]));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(m(&[&[1.0, 2.0]]));
        assert!(matches!(t.backward(x), Err(Error::Shape(_))));
    }

    #[test]
    fn nll_closed_forms() {
        let mut t = Tape::<f64>::new();
        // one node, probability of the right class numerically 1
        let z = t.constant(m(&[&[0.0, -1000.0]]));
        let l = t.nll_loss(z, &[0], &[0]).unwrap();
        assert_eq!(t.value(l).get(0, 0), 0.0);

        let z = t.constant(Matrix::zeros(1, 7));
        let l = t.nll_loss(z, &[3], &[0]).unwrap();
        assert!((t.value(l).get(0, 0) - 7f64.ln()).abs() < 1e-12);
        assert!((t.value(l).get(0, 0) - 1.94591).abs() < 1e-5);

        // log-probabilities -1 and -3 for the true classes
        let a = (1.0 - (-1.0f64).exp()).ln();
        let b = (1.0 - (-3.0f64).exp()).ln();
        let z = t.constant(m(&[&[-1.0, a], &[b, -3.0]]));
        let l = t.nll_loss(z, &[0, 1], &[0, 1]).unwrap();
        assert!((t.value(l).get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nll_rejects_empty_mask() {
        let mut t = Tape::<f64>::new();
        let z = t.constant(Matrix::zeros(2, 3));
        assert!(t.nll_loss(z, &[0, 1], &[]).is_err());
    }

    #[test]
    fn nll_rejects_non_finite() {
        let mut t = Tape::<f64>::new();
        let z = t.constant(m(&[&[f64::NAN, 0.0]]));
        assert!(matches!(t.nll_loss(z, &[0], &[0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn concat_rejects_row_mismatch() {
        let mut t = Tape::<f64>::new();
        let a = t.constant(Matrix::zeros(2, 1));
        let b = t.constant(Matrix::zeros(3, 1));
        assert!(t.concat_cols(&[a, b]).is_err());
    }

    #[test]
    fn shared_input_accumulates() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(m(&[&[2.0, -1.0]]));
        let y = t.add(x, x).unwrap();
        let s = t.sum(y);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &m(&[&[2.0, 2.0]]));
    }
}
