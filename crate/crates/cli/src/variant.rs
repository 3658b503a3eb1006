use std::fmt;
use std::str::FromStr;

use ssagcn_core::model::{Branch, ModelConfig};

use crate::error::CliError;

/// A named branch/attention setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Gcn,
    SsaGcn,
    /// All three branches, attention off.
    NoAttention,
    /// Features and structural embeddings, attention off.
    NoAttentionKge,
    PrivacySsaGcn,
    PrivacyGcnGe,
    PrivacyGcnKge,
    PrivacyGcnKgeGe,
}

/// The four ablation rows, from the full model down to plain GCN.
pub const ABLATION_LADDER: [Variant; 4] = [
    Variant::SsaGcn,
    Variant::NoAttention,
    Variant::NoAttentionKge,
    Variant::Gcn,
];

pub const PRIVACY_VARIANTS: [Variant; 4] = [
    Variant::PrivacyGcnGe,
    Variant::PrivacyGcnKge,
    Variant::PrivacyGcnKgeGe,
    Variant::PrivacySsaGcn,
];

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Gcn,
        Variant::SsaGcn,
        Variant::NoAttention,
        Variant::NoAttentionKge,
        Variant::PrivacySsaGcn,
        Variant::PrivacyGcnGe,
        Variant::PrivacyGcnKge,
        Variant::PrivacyGcnKgeGe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gcn => "gcn",
            Variant::SsaGcn => "ssa-gcn",
            Variant::NoAttention => "ssa-gcn-no-attention",
            Variant::NoAttentionKge => "ssa-gcn-no-attention-kge",
            Variant::PrivacySsaGcn => "privacy-ssa-gcn",
            Variant::PrivacyGcnGe => "privacy-gcn+ge",
            Variant::PrivacyGcnKge => "privacy-gcn+kge",
            Variant::PrivacyGcnKgeGe => "privacy-gcn+kge+ge",
        }
    }

    pub fn branches(self) -> Vec<Branch> {
        use Branch::*;
        match self {
            Variant::Gcn => vec![Features],
            Variant::SsaGcn | Variant::NoAttention => vec![Features, GraphEmbed, KgEmbed],
            Variant::NoAttentionKge => vec![Features, GraphEmbed],
            Variant::PrivacySsaGcn | Variant::PrivacyGcnKgeGe => vec![GraphEmbed, KgEmbed],
            Variant::PrivacyGcnGe => vec![GraphEmbed],
            Variant::PrivacyGcnKge => vec![KgEmbed],
        }
    }

    pub fn use_attention(self) -> bool {
        matches!(self, Variant::SsaGcn | Variant::PrivacySsaGcn)
    }

    /// Whether the raw feature matrix is needed at all.
    pub fn reads_features(self) -> bool {
        self.branches().contains(&Branch::Features)
    }

    pub fn needs_structure(self) -> bool {
        self.use_attention() || self.branches().contains(&Branch::GraphEmbed)
    }

    pub fn needs_semantic(self) -> bool {
        self.use_attention() || self.branches().contains(&Branch::KgEmbed)
    }

    /// `base` with this variant's branch set and attention flag.
    pub fn model_config(self, base: &ModelConfig) -> ModelConfig {
        ModelConfig {
            branches: self.branches(),
            use_attention: self.use_attention(),
            ..base.clone()
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown variant `{s}`")))
    }
}

/// What `train --variant` accepts: one variant or a named group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantSelection {
    One(Variant),
    Ablation,
    Privacy,
}

impl VariantSelection {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantSelection::One(v) => vec![v],
            VariantSelection::Ablation => ABLATION_LADDER.to_vec(),
            VariantSelection::Privacy => PRIVACY_VARIANTS.to_vec(),
        }
    }
}

impl FromStr for VariantSelection {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "ablation" => Ok(VariantSelection::Ablation),
            "privacy" => Ok(VariantSelection::Privacy),
            _ => s.parse().map(VariantSelection::One),
        }
    }
}
