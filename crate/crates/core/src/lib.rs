//! Framework-free graph learning: citation-graph loading, a small
//! reverse-mode tensor kernel, node2vec and TransE embeddings, cross-attention
//! fusion and a multi-branch GCN node classifier.

pub mod attention;
pub mod embedding_io;
pub mod error;
pub mod graph;
pub mod model;
pub mod node2vec;
pub mod numkit;
pub mod scalar;
pub mod transe;

pub use error::{Error, Result};
pub use numkit::{CsrMatrix, Matrix, Optimizer, OptimizerKind, Parameter, Tape, Var};
pub use scalar::Scalar;

pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Tape32 = Tape<f32>;
pub type Tape64 = Tape<f64>;
