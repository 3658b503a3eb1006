//! Citation graphs: loading, splitting and GCN propagation matrices.

mod adjacency;
pub mod cache;
mod dataset;
mod split;

pub use adjacency::{normalized_adjacency, NormalizedAdjacency};
pub use dataset::{load_citation_dataset, load_citation_dataset_with_stats, LoadStats};
pub use split::{random_split, SplitAssignment};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Neighbor lists in CSR form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Adjacency {
    /// Builds sorted, deduplicated neighbor lists from `(src, dst)` pairs.
    pub fn from_pairs(num_nodes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for (s, d) in pairs {
            lists[s].push(d);
        }
        let mut indptr = Vec::with_capacity(num_nodes + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            indices.extend(l);
            indptr.push(indices.len());
        }
        Self { indptr, indices }
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.indices[self.indptr[v]..self.indptr[v + 1]]
    }

    /// Position of `v`'s first neighbor in the flat index array.
    #[inline]
    pub fn offset(&self, v: usize) -> usize {
        self.indptr[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.indptr[v + 1] - self.indptr[v]
    }

    #[inline]
    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn num_nodes(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn num_entries(&self) -> usize {
        self.indices.len()
    }
}

/// Immutable citation graph.
///
/// Edges are stored directed, citing paper to cited paper. Raw node features
/// are optional so that embedding-only pipelines can run without them.
#[derive(Debug, Clone)]
pub struct Graph {
    node_ids: Vec<String>,
    class_names: Vec<String>,
    labels: Vec<usize>,
    features: Option<Matrix<f32>>,
    edges: Vec<(usize, usize)>,
    out_adj: Adjacency,
    in_adj: Adjacency,
    undirected: Adjacency,
}

impl Graph {
    /// Validates and assembles a graph.
    ///
    /// Rejects self-loops, duplicate edges, out-of-range endpoints, labels
    /// outside `class_names` and feature rows that do not match the node count.
    pub fn new(
        node_ids: Vec<String>,
        class_names: Vec<String>,
        labels: Vec<usize>,
        features: Option<Matrix<f32>>,
        mut edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = node_ids.len();
        if labels.len() != n {
            return Err(Error::Validation(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::Validation(format!(
                "label {bad} outside {} classes",
                class_names.len()
            )));
        }
        if let Some(f) = &features {
            if f.rows() != n {
                return Err(Error::Validation(format!(
                    "{} feature rows for {n} nodes",
                    f.rows()
                )));
            }
        }
        for &(s, d) in &edges {
            if s >= n || d >= n {
                return Err(Error::Validation(format!(
                    "edge ({s}, {d}) references a node outside 0..{n}"
                )));
            }
            if s == d {
                return Err(Error::Validation(format!("self-loop on node {s}")));
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate edge".into()));
        }
        let out_adj = Adjacency::from_pairs(n, edges.iter().copied());
        let in_adj = Adjacency::from_pairs(n, edges.iter().map(|&(s, d)| (d, s)));
        let undirected = Adjacency::from_pairs(
            n,
            edges.iter().flat_map(|&(s, d)| [(s, d), (d, s)]),
        );
        Ok(Self {
            node_ids,
            class_names,
            labels,
            features,
            edges,
            out_adj,
            in_adj,
            undirected,
        })
    }

    /// Unlabeled, featureless graph over nodes `0..num_nodes`; used for
    /// synthetic structures.
    pub fn from_edges(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(
            (0..num_nodes).map(|i| i.to_string()).collect(),
            vec!["_".to_string()],
            vec![0; num_nodes],
            None,
            edges,
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, |f| f.cols())
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Directed `(citing, cited)` pairs, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_features(&self) -> bool {
        self.features.is_some()
    }

    pub fn features(&self) -> Result<&Matrix<f32>> {
        self.features
            .as_ref()
            .ok_or_else(|| Error::Config("graph was loaded without node features".into()))
    }

    /// Same graph with the feature matrix dropped.
    pub fn without_features(&self) -> Self {
        Self {
            features: None,
            ..self.clone()
        }
    }

    pub fn with_labels(mut self, class_names: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes() || labels.iter().any(|&y| y >= class_names.len()) {
            return Err(Error::Validation("labels do not fit the graph".into()));
        }
        self.class_names = class_names;
        self.labels = labels;
        Ok(self)
    }

    pub fn with_features(mut self, features: Matrix<f32>) -> Result<Self> {
        if features.rows() != self.num_nodes() {
            return Err(Error::Validation("feature rows do not match nodes".into()));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn out_adjacency(&self) -> &Adjacency {
        &self.out_adj
    }

    pub fn in_adjacency(&self) -> &Adjacency {
        &self.in_adj
    }

    /// Symmetrized neighbor lists (no self-loops).
    pub fn undirected(&self) -> &Adjacency {
        &self.undirected
    }
}
