//! Multi-mode, multi-seed comparison of pretraining strategies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::nn::Checkpoint;
use crate::{Error, Result};

use super::config::{Mode, TrainConfig};
use super::pretrain::{pretrain, PretrainSummary};
use super::ser::{evaluate_uar, train_ser, SerSplits, SplitFractions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub train: TrainConfig,
    pub modes: Vec<Mode>,
    /// Fraction of training utterances that keep their emotion label.
    pub label_fraction: f64,
    pub split: SplitFractions,
    /// Seed for the speaker split and label subsampling.
    pub data_seed: u64,
    /// Seed for pretraining; each mode is pretrained once.
    pub pretrain_seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            modes: Mode::ALL.to_vec(),
            label_fraction: 0.05,
            split: SplitFractions::default(),
            data_seed: 0,
            pretrain_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub uar: f64,
    pub val_uar: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRow {
    pub mode: Mode,
    pub label: String,
    pub mean_uar: f64,
    pub per_seed: Vec<SeedResult>,
    pub pretraining: Option<PretrainSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub rows: Vec<ProtocolRow>,
    pub config: ProtocolConfig,
    pub n_train_labelled: usize,
    pub n_test: usize,
}

impl ProtocolReport {
    pub fn row(&self, mode: Mode) -> Option<&ProtocolRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    /// Aligned text table, one row per mode, UAR in percent.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$}  {:>8}  per seed\n", "method", "mean UAR");
        for r in &self.rows {
            let seeds: Vec<String> = r.per_seed.iter().map(|s| format!("{:.2}", 100.0 * s.uar)).collect();
            let _ = writeln!(out, "{:<width$}  {:>8.2}  {}", r.label, 100.0 * r.mean_uar, seeds.join(" "));
        }
        out
    }
}

/// Pretrain every configured mode on `pretrain_corpus` (labels ignored), then
/// fine-tune and evaluate on speaker-disjoint splits of `ser_corpus` once per
/// seed.
pub fn run_protocol(pretrain_corpus: &Corpus, ser_corpus: &Corpus, config: &ProtocolConfig) -> Result<ProtocolReport> {
    config.train.validate()?;
    if config.train.seeds.is_empty() {
        return Err(Error::InvalidArgument("protocol needs at least one seed".into()));
    }
    if config.modes.is_empty() {
        return Err(Error::InvalidArgument("protocol needs at least one mode".into()));
    }
    if pretrain_corpus.dim() != ser_corpus.dim() {
        return Err(Error::DimensionMismatch {
            expected: pretrain_corpus.dim(),
            found: ser_corpus.dim(),
            context: "pretraining vs emotion corpus".into(),
        });
    }
    let splits = SerSplits::with_label_fraction(ser_corpus, config.split, config.label_fraction, config.data_seed)?;

    let unlabelled = pretrain_corpus.without_labels();
    let pretrained: BTreeMap<Mode, (Checkpoint, PretrainSummary)> = config
        .modes
        .par_iter()
        .filter(|m| **m != Mode::None)
        .map(|&mode| {
            let cfg = TrainConfig {
                mode,
                ..config.train.clone()
            };
            pretrain(&unlabelled, &cfg, config.pretrain_seed).map(|o| (mode, (o.checkpoint, o.summary)))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(Mode, u64)> = config
        .modes
        .iter()
        .flat_map(|&m| config.train.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results: BTreeMap<(Mode, u64), SeedResult> = jobs
        .par_iter()
        .map(|&(mode, s)| {
            let ckpt = pretrained.get(&mode).map(|(c, _)| c);
            let out = train_ser(ckpt, &splits, &config.train, s)?;
            let test = evaluate_uar(&out.model, &splits.test, s)?;
            Ok((
                (mode, s),
                SeedResult {
                    seed: s,
                    uar: test.uar,
                    val_uar: out.validation.uar,
                    best_epoch: out.best_epoch,
                },
            ))
        })
        .collect::<Result<_>>()?;

    let rows = config
        .modes
        .iter()
        .map(|&mode| {
            let per_seed: Vec<SeedResult> = config.train.seeds.iter().map(|&s| results[&(mode, s)].clone()).collect();
            let mean_uar = per_seed.iter().map(|r| r.uar).sum::<f64>() / per_seed.len() as f64;
            ProtocolRow {
                mode,
                label: mode.label().to_string(),
                mean_uar,
                per_seed,
                pretraining: pretrained.get(&mode).map(|(_, s)| s.clone()),
            }
        })
        .collect();
    Ok(ProtocolReport {
        rows,
        config: config.clone(),
        n_train_labelled: splits.train.len(),
        n_test: splits.test.len(),
    })
}
