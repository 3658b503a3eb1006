//! Parameter checkpoints: one tensor file per parameter plus a JSON manifest
//! recording the branch layout.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EpochRecord, Model, ModelConfig, ModelInputs};
use crate::attention::{AttentionConfig, FusedEmbeddings};
use crate::error::{Error, Result};
use crate::numkit::io::{read_tensor, write_tensor};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

pub const MANIFEST_FILE: &str = "manifest.json";
const FUSED_GRAPH: &str = "fused_graph";
const FUSED_KG: &str = "fused_kg";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    model: ModelConfig,
    attention: AttentionConfig,
    num_classes: usize,
    parameters: Vec<TensorEntry>,
    frozen_fusion: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    file: String,
    rows: usize,
    cols: usize,
}

fn file_name(name: &str) -> String {
    format!("{}.bin", name.replace(['/', '\\'], "_"))
}

fn write_matrix<T: Scalar>(path: &Path, m: &Matrix<T>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_tensor(&mut w, m)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn read_matrix<T: Scalar>(path: &Path) -> Result<Matrix<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensor(&mut BufReader::new(file))
}

/// Writes every parameter (as f32) and the manifest into `dir`.
pub fn save_checkpoint<T: Scalar>(model: &Model<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut parameters = Vec::new();
    for p in model.parameters() {
        let file = file_name(&p.name);
        write_matrix(&dir.join(&file), &p.value)?;
        parameters.push(TensorEntry {
            name: p.name.clone(),
            file,
            rows: p.value.rows(),
            cols: p.value.cols(),
        });
    }
    if let Some(f) = &model.frozen_fusion {
        write_matrix(&dir.join(file_name(FUSED_GRAPH)), &f.graph)?;
        write_matrix(&dir.join(file_name(FUSED_KG)), &f.kg)?;
    }
    let manifest = Manifest {
        model: model.config.clone(),
        attention: model.attention_config.clone(),
        num_classes: model.num_classes,
        parameters,
        frozen_fusion: model.frozen_fusion.is_some(),
    };
    let path = dir.join(MANIFEST_FILE);
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;
    fs::write(&path, body).map_err(|e| Error::io(path, e))
}

/// Rebuilds a model from `dir`. `inputs` supplies the input widths.
pub fn load_checkpoint<T: Scalar>(dir: &Path, inputs: &ModelInputs<T>) -> Result<Model<T>> {
    let path = dir.join(MANIFEST_FILE);
    let body = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&body).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = Model::new(
        &manifest.model,
        &manifest.attention,
        inputs,
        manifest.num_classes,
        &mut rng,
    )?;
    let mut params = model.parameters_mut();
    if params.len() != manifest.parameters.len() {
        return Err(Error::Format(format!(
            "checkpoint lists {} parameters, model has {}",
            manifest.parameters.len(),
            params.len()
        )));
    }
    for (p, entry) in params.iter_mut().zip(&manifest.parameters) {
        if p.name != entry.name || p.value.shape() != (entry.rows, entry.cols) {
            return Err(Error::Format(format!(
                "checkpoint entry `{}` {:?} does not match parameter `{}` {:?}",
                entry.name,
                (entry.rows, entry.cols),
                p.name,
                p.value.shape()
            )));
        }
        p.value = read_matrix(&dir.join(&entry.file))?;
    }
    if manifest.frozen_fusion {
        model.frozen_fusion = Some(FusedEmbeddings {
            graph: read_matrix(&dir.join(file_name(FUSED_GRAPH)))?,
            kg: read_matrix(&dir.join(file_name(FUSED_KG)))?,
        });
    }
    Ok(model)
}

/// One JSON object per line: `epoch`, `loss`, `train_acc`, `dev_acc`.
pub fn write_training_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    let mut body = String::new();
    for r in log {
        body.push_str(
            &serde_json::to_string(r).map_err(|e| Error::Format(format!("log record: {e}")))?,
        );
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}
