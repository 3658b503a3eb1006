//! Experiment configuration: a TOML file with one section per module.
//! Unknown keys anywhere are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ssagcn_core::attention::AttentionConfig;
use ssagcn_core::model::ModelConfig;
use ssagcn_core::node2vec::WalkConfig;
use ssagcn_core::transe::KGEConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// `<id> <features...> <label>` rows.
    pub content: PathBuf,
    /// `<cited> <citing>` rows.
    pub cites: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub num_runs: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Reuse the `base_seed` split for every run instead of redrawing.
    pub fixed_split: bool,
    /// Runs trained concurrently; 1 trains them in order on this thread.
    pub threads: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            num_runs: 10,
            base_seed: 0,
            output_dir: PathBuf::from("runs"),
            fixed_split: false,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub node2vec: WalkConfig,
    #[serde(default)]
    pub transe: KGEConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub attention: AttentionConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parses `path`; relative paths inside are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.dataset.content,
            &mut cfg.dataset.cites,
            &mut cfg.experiment.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.experiment.num_runs == 0 {
            return Err(CliError::Config("num_runs must be at least 1".into()));
        }
        if self.experiment.threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        self.node2vec.validate()?;
        self.transe.validate()?;
        self.model.validate()?;
        self.attention.validate()?;
        Ok(())
    }

    /// Applies the global command-line overrides.
    pub fn apply_overrides(&mut self, seed: Option<u64>, runs: Option<usize>, deterministic: bool) {
        if let Some(s) = seed {
            self.experiment.base_seed = s;
        }
        if let Some(r) = runs {
            self.experiment.num_runs = r;
        }
        if deterministic {
            self.experiment.threads = 1;
            self.node2vec.workers = 1;
        }
    }

    /// Hash of every field that can change a result. Output location and
    /// thread count are excluded; dataset paths are replaced by the hash of
    /// the files' contents at preparation time, see [`input_fingerprint`].
    pub fn fingerprint(&self) -> String {
        let mut semantic = self.clone();
        semantic.experiment.output_dir = PathBuf::new();
        semantic.experiment.threads = 1;
        semantic.dataset.content = PathBuf::new();
        semantic.dataset.cites = PathBuf::new();
        fingerprint_of(&semantic)
    }
}

pub fn fingerprint_of<S: Serialize>(value: &S) -> String {
    let json = serde_json::to_string(value).expect("config values serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Hash of the raw dataset files and the dataset section.
pub fn input_fingerprint(dataset: &DatasetConfig) -> CliResult<String> {
    let mut h = Sha256::new();
    h.update(dataset.name.as_bytes());
    for p in [&dataset.content, &dataset.cites] {
        let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset]
name = "toy"
content = "a.content"
cites = "a.cites"
"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.experiment.num_runs, 10);
        assert_eq!(cfg.node2vec.dim, 128);
        assert_eq!(cfg.transe.dim, 200);
        assert_eq!(cfg.model.hidden_dim, 32);
        assert_eq!(cfg.attention.d_a, 64);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{MINIMAL}\n[model]\nhiden_dim = 16\n");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(CliError::Config(_))));
        let text = format!("{MINIMAL}\n[modle]\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn fingerprint_tracks_semantic_fields_only() {
        let a = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let reparsed =
            ExperimentConfig::from_toml(&toml::to_string(&a).unwrap()).unwrap();
        assert_eq!(a.fingerprint(), reparsed.fingerprint());

        let mut b = a.clone();
        b.experiment.output_dir = "elsewhere".into();
        b.experiment.threads = 4;
        assert_eq!(a.fingerprint(), b.fingerprint());

        let mut c = a.clone();
        c.model.dropout = 0.3;
        assert_ne!(a.fingerprint(), c.fingerprint());
        let mut d = a.clone();
        d.experiment.base_seed = 1;
        assert_ne!(a.fingerprint(), d.fingerprint());
    }
}
