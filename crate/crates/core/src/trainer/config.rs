use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::objectives::MtlWeights;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Randomly initialised trunk, no pretraining.
    None,
    SpkCls,
    Contrastive,
    MtlAdversarial,
    Mtl,
}

impl Mode {
    /// Every mode, in report row order.
    pub const ALL: [Mode; 5] = [
        Mode::None,
        Mode::SpkCls,
        Mode::Contrastive,
        Mode::MtlAdversarial,
        Mode::Mtl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::SpkCls => "spk_cls",
            Mode::Contrastive => "contrastive",
            Mode::MtlAdversarial => "mtl_adversarial",
            Mode::Mtl => "mtl",
        }
    }

    /// Human-readable row label for report tables.
    pub fn label(self) -> &'static str {
        match self {
            Mode::None => "no pretraining",
            Mode::SpkCls => "speaker classification",
            Mode::Contrastive => "cluster contrastive",
            Mode::MtlAdversarial => "cluster contrastive + speaker adversarial",
            Mode::Mtl => "cluster contrastive + speaker multi-task",
        }
    }

    pub fn uses_contrastive(self) -> bool {
        matches!(self, Mode::Contrastive | Mode::Mtl | Mode::MtlAdversarial)
    }

    pub fn uses_speaker(self) -> bool {
        matches!(self, Mode::SpkCls | Mode::Mtl | Mode::MtlAdversarial)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mode {s:?}")))
    }
}

/// Layer widths of the trunk and heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub trunk_hidden: usize,
    /// Hidden width of the contrastive head; `None` uses the input dimension.
    pub projection_dim: Option<usize>,
    pub projection_out: usize,
    pub head_hidden: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            trunk_hidden: 64,
            projection_dim: None,
            projection_out: 128,
            head_hidden: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Pretraining optimizer steps.
    pub steps: usize,
    pub batch_size: usize,
    /// Emotion fine-tuning learning rate.
    pub lr: f64,
    pub pretrain_lr: f64,
    pub weight_decay: f64,
    pub epochs_ser: usize,
    /// Epochs without validation-accuracy improvement before stopping.
    pub patience: usize,
    pub tau: f64,
    pub n_clusters: usize,
    pub kmeans_restarts: usize,
    pub seeds: Vec<u64>,
    pub mtl_weights: MtlWeights,
    pub resample_pairs_each_epoch: bool,
    pub include_positive_in_denominator: bool,
    pub arch: ArchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Contrastive,
            steps: 5000,
            batch_size: 8,
            lr: 1e-5,
            pretrain_lr: 1e-4,
            weight_decay: 0.01,
            epochs_ser: 30,
            patience: 5,
            tau: 0.1,
            n_clusters: 20,
            kmeans_restarts: 10,
            seeds: vec![1, 2, 3, 4, 5],
            mtl_weights: MtlWeights::default(),
            resample_pairs_each_epoch: false,
            include_positive_in_denominator: false,
            arch: ArchConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.batch_size == 0 || self.epochs_ser == 0 {
            return bad("batch_size and epochs_ser must be positive");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.lr > 0.0 && self.pretrain_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.n_clusters < 2 {
            return bad("n_clusters must be at least 2");
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans_restarts must be positive");
        }
        let a = &self.arch;
        if a.trunk_hidden == 0 || a.projection_out == 0 || a.head_hidden == 0 || a.projection_dim == Some(0) {
            return bad("layer widths must be positive");
        }
        self.mtl_weights.validate()
    }

    /// Loss weights for the configured mode, with the adversarial flag set
    /// from the mode itself.
    pub fn mode_weights(&self) -> MtlWeights {
        MtlWeights {
            adversarial: self.mode == Mode::MtlAdversarial,
            ..self.mtl_weights
        }
    }
}
