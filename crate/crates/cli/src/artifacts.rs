//! On-disk layout under the experiment output directory.

use std::fs;
use std::path::{Path, PathBuf};

use ssagcn_core::embedding_io::{read_embeddings_tsv, EmbeddingFile};
use ssagcn_core::graph::{cache, random_split, Graph, SplitAssignment};

use crate::error::{CliError, CliResult};

pub const FINGERPRINT_FILE: &str = "FINGERPRINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Structure,
    Semantic,
}

impl EmbeddingKind {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingKind::Structure => "structure",
            EmbeddingKind::Semantic => "semantic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn graph_dir(&self) -> PathBuf {
        self.root.join("graph")
    }

    pub fn split_file(&self, seed: u64) -> PathBuf {
        self.root.join("splits").join(format!("seed-{seed}.txt"))
    }

    pub fn embedding(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join("embeddings").join(format!("{}.tsv", kind.name()))
    }

    pub fn embedding_fingerprint(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join("embeddings").join(format!("{}.fingerprint", kind.name()))
    }

    pub fn relations(&self) -> PathBuf {
        self.root.join("embeddings").join("semantic.relations.tsv")
    }

    pub fn model_dir(&self, variant: &str, seed: u64) -> PathBuf {
        self.root.join("models").join(variant).join(format!("seed-{seed}"))
    }

    pub fn results(&self) -> PathBuf {
        self.root.join("results.jsonl")
    }

    pub fn report_text(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn export_dir(&self) -> PathBuf {
        self.root.join("exports")
    }

    /// Fingerprint of the prepared graph, or a missing-artifact error.
    pub fn graph_fingerprint(&self) -> CliResult<String> {
        let path = self.graph_dir().join(FINGERPRINT_FILE);
        read_trimmed(&path).ok_or_else(|| CliError::missing("prepared graph", &path, "ssagcn prepare"))
    }

    /// The cached graph; `features.bin` is opened only if `with_features`.
    pub fn load_graph(&self, with_features: bool) -> CliResult<Graph> {
        self.graph_fingerprint()?;
        let dir = self.graph_dir();
        if with_features && !dir.join(cache::FEATURES_FILE).exists() {
            return Err(CliError::missing(
                "feature matrix",
                dir.join(cache::FEATURES_FILE),
                "ssagcn prepare",
            ));
        }
        Ok(cache::load(&dir, with_features)?)
    }

    /// Embedding table checked against the graph it should describe.
    pub fn load_embedding(&self, kind: EmbeddingKind, graph: &Graph) -> CliResult<EmbeddingFile> {
        let path = self.embedding(kind);
        let fix = format!("ssagcn embed --which {}", kind.name());
        if !path.exists() {
            return Err(CliError::missing(format!("{} embeddings", kind.name()), &path, fix));
        }
        let recorded = read_trimmed(&self.embedding_fingerprint(kind)).unwrap_or_default();
        let graph_fp = self.graph_fingerprint()?;
        if !recorded.starts_with(&format!("{graph_fp}:")) {
            return Err(CliError::missing(
                format!("{} embeddings for the current graph", kind.name()),
                &path,
                fix,
            ));
        }
        let file = read_embeddings_tsv(&path)?;
        if file.node_ids != graph.node_ids() {
            return Err(CliError::Core(ssagcn_core::Error::Validation(format!(
                "{}: node order differs from the graph cache",
                path.display()
            ))));
        }
        Ok(file)
    }

    /// Reads the split for `seed`, drawing and saving it if absent.
    pub fn split(&self, num_nodes: usize, seed: u64) -> CliResult<SplitAssignment> {
        let path = self.split_file(seed);
        if let Ok(text) = fs::read_to_string(&path) {
            let split = SplitAssignment::from_text(&text)?;
            if split.seed == seed && split.num_nodes() == num_nodes {
                split.validate(num_nodes)?;
                return Ok(split);
            }
            log::warn!("{} is stale; redrawing", path.display());
        }
        let split = random_split(num_nodes, seed)?;
        write_file(&path, split.to_text())?;
        Ok(split)
    }
}

pub fn read_trimmed(path: &Path) -> Option<String> {
    fs::read_to_string(path).ok().map(|s| s.trim().to_string())
}

pub fn write_file(path: &Path, body: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}
