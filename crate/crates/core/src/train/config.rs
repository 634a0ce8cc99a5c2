use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::autodiff::{AdamConfig, Aggregation};
use crate::edge::{EdgeActivation, EdgeMode, DEFAULT_DENSE_NODE_CAP};
use crate::oversample::OversampleScale;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Origin,
    OversampleDup,
    Reweight,
    RawSmote,
    EmbedSmote,
    GsT,
    GsO,
    GsPreT,
    GsPreO,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Origin,
        Variant::OversampleDup,
        Variant::Reweight,
        Variant::RawSmote,
        Variant::EmbedSmote,
        Variant::GsT,
        Variant::GsO,
        Variant::GsPreT,
        Variant::GsPreO,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Origin => "origin",
            Variant::OversampleDup => "oversample_dup",
            Variant::Reweight => "reweight",
            Variant::RawSmote => "raw_smote",
            Variant::EmbedSmote => "embed_smote",
            Variant::GsT => "gs_t",
            Variant::GsO => "gs_o",
            Variant::GsPreT => "gs_pre_t",
            Variant::GsPreO => "gs_pre_o",
        }
    }

    /// Latent-space SMOTE with a learned edge generator.
    pub fn is_graphsmote(self) -> bool {
        matches!(self, Variant::GsT | Variant::GsO | Variant::GsPreT | Variant::GsPreO)
    }

    pub fn pretrains(self) -> bool {
        matches!(self, Variant::GsPreT | Variant::GsPreO)
    }

    pub fn soft_edges(self) -> bool {
        matches!(self, Variant::GsO | Variant::GsPreO)
    }

    pub fn edge_mode(self, eta: f64) -> Option<EdgeMode> {
        match self {
            Variant::GsT | Variant::GsPreT => Some(EdgeMode::Thresholded { eta }),
            Variant::GsO | Variant::GsPreO => Some(EdgeMode::Soft),
            _ => None,
        }
    }

    /// Needs a sampling plan.
    pub fn oversamples(self) -> bool {
        !matches!(self, Variant::Origin | Variant::Reweight)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

/// Which labeled nodes the nearest-neighbor search may return.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborPool {
    #[default]
    Train,
    TrainVal,
}

/// How the reconstruction loss visits node pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePairs {
    Dense,
    /// All edges plus `negatives_per_edge` random pairs per edge, drawn once.
    Sampled {
        negatives_per_edge: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub lambda: f64,
    pub eta: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Epochs without a validation macro-F improvement before stopping.
    pub patience: usize,
    pub pretrain_max_epochs: usize,
    pub pretrain_patience: usize,
    /// Relative edge-loss decrease that counts as a pretraining improvement.
    pub pretrain_min_delta: f64,
    #[serde(serialize_with = "display")]
    pub scale: OversampleScale,
    pub seed: u64,
    pub aggregation: Aggregation,
    pub edge_activation: EdgeActivation,
    pub relu_logits: bool,
    pub k: usize,
    pub k2: usize,
    /// Classes a fixed scale applies to; `None` means every class smaller
    /// than the largest.
    pub minority_classes: Option<Vec<usize>>,
    pub neighbor_pool: NeighborPool,
    pub edge_pairs: EdgePairs,
    pub dense_node_cap: usize,
}

fn display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::GsPreO,
            lambda: 1e-6,
            eta: 0.5,
            lr: 1e-3,
            weight_decay: 5e-4,
            max_epochs: 5000,
            patience: 200,
            pretrain_max_epochs: 1000,
            pretrain_patience: 20,
            pretrain_min_delta: 1e-4,
            scale: OversampleScale::Fixed(2.0),
            seed: 0,
            aggregation: Aggregation::Mean,
            edge_activation: EdgeActivation::Sigmoid,
            relu_logits: false,
            k: 64,
            k2: 64,
            minority_classes: None,
            neighbor_pool: NeighborPool::Train,
            edge_pairs: EdgePairs::Dense,
            dense_node_cap: DEFAULT_DENSE_NODE_CAP,
        }
    }
}

impl TrainConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(format!("lambda must be a finite value >= 0, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if self.max_epochs == 0 {
            return Err("max_epochs must be at least 1".into());
        }
        if self.k == 0 || self.k2 == 0 {
            return Err("layer widths must be positive".into());
        }
        if !(self.lr >= 0.0 && self.weight_decay >= 0.0) {
            return Err("lr and weight_decay must be >= 0".into());
        }
        Ok(())
    }
}
