//! Structural node embeddings: second-order biased random walks and
//! Skip-gram with negative sampling.

mod alias;
mod skipgram;
mod walk;

use serde::{Deserialize, Serialize};

pub use alias::AliasTable;
pub use skipgram::{
    cosine, positive_pair_score, sgns_pair_update, skipgram_train, train_existing, NodeEmbeddings, SkipGram,
    VectorRole,
};
pub use walk::{generate_walks, transition_weights, WalkSampler};

use crate::error::{Error, Result};

/// Walk and Skip-gram hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub window: usize,
    /// Shrink the window per center to a uniform size in `1..=window`, which
    /// weights near contexts more heavily.
    pub dynamic_window: bool,
    pub dim: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Walk-generation threads; results are deterministic per (seed, workers).
    pub workers: usize,
    /// Walk along citation direction instead of the symmetrized graph.
    pub directed: bool,
    /// Upper bound on precomputed second-order alias entries before falling
    /// back to on-the-fly normalization.
    pub alias_budget: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            p: 0.25,
            q: 0.25,
            walk_length: 80,
            walks_per_node: 10,
            window: 10,
            dynamic_window: true,
            dim: 128,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            negatives: 5,
            epochs: 5,
            seed: 0,
            workers: 1,
            directed: false,
            alias_budget: 20_000_000,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(Error::Config("node2vec p and q must be positive".into()));
        }
        if self.window > self.walk_length {
            return Err(Error::Config(format!(
                "window {} exceeds walk length {}",
                self.window, self.walk_length
            )));
        }
        if self.dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        if self.walk_length == 0 || self.workers == 0 {
            return Err(Error::Config("walk_length and workers must be positive".into()));
        }
        if self.learning_rate <= 0.0 || self.min_learning_rate < 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}
