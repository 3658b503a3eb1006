//! Multi-branch GCN node classifier.
//!
//! Each active branch (raw features, structural embeddings, semantic
//! embeddings) gets its own GCN encoder. Final hidden states are concatenated
//! in that fixed order and a bias-free linear head produces class logits.

mod checkpoint;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, write_training_log, MANIFEST_FILE};
pub use train::{accuracy, argmax_rows, evaluate, train_model, EpochRecord, TrainOutcome};

use crate::attention::{
    fuse, multi_head_tape, record_heads, AttentionConfig, FusedEmbeddings, FusionMode,
    FusionParams,
};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::numkit::{Matrix, OptimizerKind, Parameter, Tape, Var};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Features,
    GraphEmbed,
    KgEmbed,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Features, Branch::GraphEmbed, Branch::KgEmbed];

    pub fn name(self) -> &'static str {
        match self {
            Branch::Features => "features",
            Branch::GraphEmbed => "graph_embed",
            Branch::KgEmbed => "kg_embed",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown branch `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub max_epochs: usize,
    pub patience: usize,
    pub branches: Vec<Branch>,
    pub use_attention: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            num_layers: 2,
            dropout: 0.2,
            learning_rate: 0.001,
            optimizer: OptimizerKind::Adam,
            max_epochs: 300,
            patience: 30,
            branches: vec![Branch::Features],
            use_attention: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::Config("at least one branch must be active".into()));
        }
        if self.num_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("num_layers and hidden_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Active branches in canonical order without repeats.
    pub fn active_branches(&self) -> Vec<Branch> {
        Branch::ALL
            .into_iter()
            .filter(|b| self.branches.contains(b))
            .collect()
    }
}

/// Graph and node inputs. Embedding tables are frozen.
#[derive(Debug, Clone)]
pub struct ModelInputs<T> {
    pub adjacency: NormalizedAdjacency<T>,
    pub features: Option<Matrix<T>>,
    pub graph_embed: Option<Matrix<T>>,
    pub kg_embed: Option<Matrix<T>>,
}

impl<T: Scalar> ModelInputs<T> {
    pub fn num_nodes(&self) -> usize {
        self.adjacency.num_nodes()
    }

    fn table(&self, b: Branch) -> Option<&Matrix<T>> {
        match b {
            Branch::Features => self.features.as_ref(),
            Branch::GraphEmbed => self.graph_embed.as_ref(),
            Branch::KgEmbed => self.kg_embed.as_ref(),
        }
    }

    fn require(&self, b: Branch) -> Result<&Matrix<T>> {
        let m = self
            .table(b)
            .ok_or_else(|| Error::Config(format!("branch `{b}` is active but its input is missing")))?;
        if m.rows() != self.num_nodes() {
            return Err(Error::shape(format!(
                "branch `{b}` input has {} rows for {} nodes",
                m.rows(),
                self.num_nodes()
            )));
        }
        Ok(m)
    }
}

/// `σ(Â · h · w)`, with σ = ReLU when `activate`.
pub fn gcn_layer<T: Scalar>(
    tape: &mut Tape<T>,
    adj: &NormalizedAdjacency<T>,
    h: Var,
    w: Var,
    activate: bool,
) -> Result<Var> {
    if tape.value(h).rows() != adj.num_nodes() {
        return Err(Error::shape(format!(
            "gcn_layer: {} rows for an adjacency over {} nodes",
            tape.value(h).rows(),
            adj.num_nodes()
        )));
    }
    let hw = tape.matmul(h, w)?;
    let out = tape.spmm(adj.matrix(), hw)?;
    Ok(if activate { tape.relu(out) } else { out })
}

fn glorot<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::lit(rng.random_range(-bound..bound)))
}

/// Stack of GCN weights for one branch.
#[derive(Debug, Clone)]
pub struct GcnEncoder<T> {
    pub layers: Vec<Parameter<T>>,
}

impl<T: Scalar> GcnEncoder<T> {
    pub fn init<R: Rng + ?Sized>(
        branch: Branch,
        input_dim: usize,
        hidden: usize,
        num_layers: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let rows = if l == 0 { input_dim } else { hidden };
                Parameter::new(format!("{branch}.layer{l}"), glorot(rows, hidden, rng))
            })
            .collect();
        Self { layers }
    }

    /// Dropout then propagation then ReLU, per layer.
    #[allow(clippy::too_many_arguments)]
    pub fn forward<R>(
        &self,
        tape: &mut Tape<T>,
        adj: &NormalizedAdjacency<T>,
        input: Var,
        weights: &[Var],
        dropout: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var>
    where
        R: Rng + ?Sized,
    {
        let mut h = input;
        for &w in weights {
            h = tape.dropout(h, dropout, training, rng)?;
            h = gcn_layer(tape, adj, h, w, true)?;
        }
        Ok(h)
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierHead<T> {
    pub weight: Parameter<T>,
}

/// Trainable state of the classifier.
#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    attention_config: AttentionConfig,
    num_classes: usize,
    encoders: Vec<(Branch, GcnEncoder<T>)>,
    head: ClassifierHead<T>,
    /// Trained projections (joint mode).
    fusion: Option<FusionParams<T>>,
    /// Precomputed enhanced tables (offline mode).
    frozen_fusion: Option<FusedEmbeddings<T>>,
}

/// Parameter variables recorded for one forward pass, in
/// [`Model::parameters_mut`] order.
pub struct ForwardPass {
    pub logits: Var,
    pub params: Vec<Var>,
}

impl<T: Scalar> Model<T> {
    pub fn new<R: Rng + ?Sized>(
        config: &ModelConfig,
        attention_config: &AttentionConfig,
        inputs: &ModelInputs<T>,
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let branches = config.active_branches();
        let mut encoders = Vec::with_capacity(branches.len());
        for &b in &branches {
            let dim = inputs.require(b)?.cols();
            encoders.push((
                b,
                GcnEncoder::init(b, dim, config.hidden_dim, config.num_layers, rng),
            ));
        }
        let head = ClassifierHead {
            weight: Parameter::new(
                "head",
                glorot(config.hidden_dim * branches.len(), num_classes, rng),
            ),
        };
        let (mut fusion, mut frozen_fusion) = (None, None);
        if config.use_attention {
            attention_config.validate()?;
            let g = inputs.require(Branch::GraphEmbed)?;
            let kg = inputs.require(Branch::KgEmbed)?;
            let params = FusionParams::init(g.cols(), kg.cols(), attention_config, rng);
            match attention_config.mode {
                FusionMode::Joint => fusion = Some(params),
                FusionMode::Offline => {
                    frozen_fusion = Some(fuse(g, kg, &params, attention_config.block_rows)?)
                }
            }
        }
        Ok(Self {
            config: config.clone(),
            attention_config: attention_config.clone(),
            num_classes,
            encoders,
            head,
            fusion,
            frozen_fusion,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn attention_config(&self) -> &AttentionConfig {
        &self.attention_config
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn branches(&self) -> Vec<Branch> {
        self.encoders.iter().map(|(b, _)| *b).collect()
    }

    pub fn encoder(&self, b: Branch) -> Option<&GcnEncoder<T>> {
        self.encoders.iter().find(|(x, _)| *x == b).map(|(_, e)| e)
    }

    pub fn fusion(&self) -> Option<&FusionParams<T>> {
        self.fusion.as_ref()
    }

    /// Every trainable parameter: encoder layers by branch, head, then
    /// attention projections.
    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut out: Vec<&mut Parameter<T>> = Vec::new();
        for (_, e) in &mut self.encoders {
            out.extend(e.layers.iter_mut());
        }
        out.push(&mut self.head.weight);
        if let Some(f) = &mut self.fusion {
            out.extend(f.parameters_mut());
        }
        out
    }

    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        let mut out: Vec<&Parameter<T>> = Vec::new();
        for (_, e) in &self.encoders {
            out.extend(e.layers.iter());
        }
        out.push(&self.head.weight);
        if let Some(f) = &self.fusion {
            out.extend(f.parameters());
        }
        out
    }

    /// Enhanced embedding tables under the current projections, if attention is on.
    pub fn fused_embeddings(&self, inputs: &ModelInputs<T>) -> Result<Option<FusedEmbeddings<T>>> {
        if let Some(f) = &self.frozen_fusion {
            return Ok(Some(f.clone()));
        }
        let Some(params) = &self.fusion else {
            return Ok(None);
        };
        let g = inputs.require(Branch::GraphEmbed)?;
        let kg = inputs.require(Branch::KgEmbed)?;
        fuse(g, kg, params, self.attention_config.block_rows).map(Some)
    }

    /// Records attention (joint mode) and returns the table each embedding
    /// branch should read, plus the attention parameter variables.
    pub(crate) fn record_embedding_inputs(
        &self,
        tape: &mut Tape<T>,
        inputs: &ModelInputs<T>,
    ) -> Result<(Option<Var>, Option<Var>, Vec<Var>)> {
        let mut params = Vec::new();
        if let Some(f) = &self.frozen_fusion {
            let g = tape.constant(f.graph.clone());
            let kg = tape.constant(f.kg.clone());
            return Ok((Some(g), Some(kg), params));
        }
        let Some(fusion) = &self.fusion else {
            let g = inputs.graph_embed.as_ref().map(|m| tape.constant(m.clone()));
            let kg = inputs.kg_embed.as_ref().map(|m| tape.constant(m.clone()));
            return Ok((g, kg, params));
        };
        let h_g = tape.constant(inputs.require(Branch::GraphEmbed)?.clone());
        let h_kg = tape.constant(inputs.require(Branch::KgEmbed)?.clone());
        let to_graph = record_heads(tape, &fusion.to_graph);
        let to_kg = record_heads(tape, &fusion.to_kg);
        let v_g = multi_head_tape(tape, h_kg, h_kg, h_g, &to_graph)?;
        let v_kg = multi_head_tape(tape, h_g, h_g, h_kg, &to_kg)?;
        for h in to_graph.iter().chain(&to_kg) {
            params.push(h.query);
            params.push(h.key);
        }
        Ok((Some(v_g), Some(v_kg), params))
    }

    /// Logits for every node.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        inputs: &ModelInputs<T>,
        training: bool,
        rng: &mut R,
    ) -> Result<ForwardPass> {
        let (g_in, kg_in, attn_params) = self.record_embedding_inputs(tape, inputs)?;
        self.forward_with(tape, inputs, g_in, kg_in, attn_params, training, rng)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn forward_with<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        inputs: &ModelInputs<T>,
        g_in: Option<Var>,
        kg_in: Option<Var>,
        attn_params: Vec<Var>,
        training: bool,
        rng: &mut R,
    ) -> Result<ForwardPass> {
        let mut params = Vec::new();
        let mut branch_outputs = Vec::with_capacity(self.encoders.len());
        for (b, enc) in &self.encoders {
            let input = match b {
                Branch::Features => tape.constant(inputs.require(*b)?.clone()),
                Branch::GraphEmbed => g_in.ok_or_else(|| missing(*b))?,
                Branch::KgEmbed => kg_in.ok_or_else(|| missing(*b))?,
            };
            let weights: Vec<Var> = enc.layers.iter().map(|p| tape.param(p)).collect();
            params.extend(&weights);
            branch_outputs.push(enc.forward(
                tape,
                &inputs.adjacency,
                input,
                &weights,
                self.config.dropout,
                training,
                rng,
            )?);
        }
        let hidden = if branch_outputs.len() == 1 {
            branch_outputs[0]
        } else {
            tape.concat_cols(&branch_outputs)?
        };
        let w = tape.param(&self.head.weight);
        params.push(w);
        params.extend(attn_params);
        let logits = tape.matmul(hidden, w)?;
        Ok(ForwardPass { logits, params })
    }

    /// Eval-mode logits for every node.
    pub fn predict(&self, inputs: &ModelInputs<T>) -> Result<Matrix<T>> {
        let mut tape = Tape::new();
        // Eval mode never draws from the generator.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pass = self.forward(&mut tape, inputs, false, &mut rng)?;
        Ok(tape.value(pass.logits).clone())
    }

    /// Mean NLL over `nodes`, without recording gradients into the model.
    pub fn loss<R: Rng + ?Sized>(
        &self,
        inputs: &ModelInputs<T>,
        labels: &[usize],
        nodes: &[usize],
        training: bool,
        rng: &mut R,
    ) -> Result<T> {
        let mut tape = Tape::new();
        let pass = self.forward(&mut tape, inputs, training, rng)?;
        let loss = tape.nll_loss(pass.logits, labels, nodes)?;
        Ok(tape.value(loss).get(0, 0))
    }

    /// Mean NLL over `nodes`; gradients are added into each parameter's `grad`.
    pub fn accumulate_gradients<R: Rng + ?Sized>(
        &mut self,
        inputs: &ModelInputs<T>,
        labels: &[usize],
        nodes: &[usize],
        training: bool,
        rng: &mut R,
    ) -> Result<T> {
        let mut tape = Tape::new();
        let pass = self.forward(&mut tape, inputs, training, rng)?;
        let loss = tape.nll_loss(pass.logits, labels, nodes)?;
        tape.backward(loss)?;
        for (v, p) in pass.params.iter().zip(self.parameters_mut()) {
            tape.accumulate_into(*v, p)?;
        }
        Ok(tape.value(loss).get(0, 0))
    }
}

fn missing(b: Branch) -> Error {
    Error::Config(format!("branch `{b}` is active but its input is missing"))
}
