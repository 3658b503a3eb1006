use std::sync::Arc;

use crate::graph::Graph;
use crate::numkit::CsrMatrix;
use crate::scalar::Scalar;

/// Renormalized propagation matrix `D^-1/2 (A_sym + I) D^-1/2`, with `D` the
/// degree matrix of `A_sym + I`.
///
/// Symmetric, entries in `(0, 1]`, nonzero exactly on the diagonal and on
/// pairs joined by an edge in either direction.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency<T> {
    matrix: Arc<CsrMatrix<T>>,
}

impl<T: Scalar> NormalizedAdjacency<T> {
    pub fn matrix(&self) -> &Arc<CsrMatrix<T>> {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }
}

pub fn normalized_adjacency<T: Scalar>(graph: &Graph) -> NormalizedAdjacency<T> {
    let adj = graph.undirected();
    let n = graph.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((adj.degree(v) + 1) as f64).sqrt())
        .collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(adj.num_entries() + n);
    let mut values = Vec::with_capacity(adj.num_entries() + n);
    indptr.push(0);
    for i in 0..n {
        let mut self_done = false;
        for &j in adj.neighbors(i) {
            if !self_done && j > i {
                indices.push(i);
                values.push(T::lit(inv_sqrt[i] * inv_sqrt[i]));
                self_done = true;
            }
            indices.push(j);
            values.push(T::lit(inv_sqrt[i] * inv_sqrt[j]));
        }
        if !self_done {
            indices.push(i);
            values.push(T::lit(inv_sqrt[i] * inv_sqrt[i]));
        }
        indptr.push(indices.len());
    }
    let matrix = CsrMatrix::from_csr(n, n, indptr, indices, values)
        .expect("neighbor lists are sorted and deduplicated");
    NormalizedAdjacency {
        matrix: Arc::new(matrix),
    }
}
