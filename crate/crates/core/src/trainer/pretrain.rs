//! Pretraining on emotion-unlabelled embeddings: cluster-contrastive,
//! speaker classification, and their multi-task / adversarial combinations.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_speakers, ClusteringRun, KMeansConfig};
use crate::corpus::{length_normalize, Corpus};
use crate::nn::{AdamWConfig, Checkpoint, OptimizerState};
use crate::pair_miner::{mine_tuples, ContrastiveTuple, MiningConfig, SkipReport};
use crate::{seed, Error, Result};

use super::config::{Mode, TrainConfig};
use super::network::{
    classification_gradients, predict, tuple_batch_gradients, BatchLoss, ContrastiveSettings,
    Network, TupleBatch,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub mode: Mode,
    pub seed: u64,
    pub steps: usize,
    pub n_tuples: usize,
    pub skipped: Option<SkipReport>,
    pub first_loss_mean: Option<f64>,
    pub final_loss_mean: Option<f64>,
    pub speaker_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub network: Network,
    pub checkpoint: Checkpoint,
    /// Total loss after every step.
    pub losses: Vec<f64>,
    pub summary: PretrainSummary,
}

fn window_mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Mutable state of one pretraining run.
pub struct Pretrainer<'a> {
    corpus: &'a Corpus,
    config: TrainConfig,
    pub network: Network,
    optimizers: Vec<OptimizerState>,
    speaker_index: BTreeMap<String, usize>,
    step: usize,
}

impl<'a> Pretrainer<'a> {
    pub fn new(corpus: &'a Corpus, config: &TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.mode == Mode::None {
            return Err(Error::InvalidArgument("pretraining needs a mode other than none".into()));
        }
        if corpus.is_empty() {
            return Err(Error::InvalidArgument("empty pretraining corpus".into()));
        }
        let speaker_index: BTreeMap<String, usize> = corpus
            .speaker_ids()
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        let mut network = Network::trunk_only(corpus.dim(), &config.arch, seed);
        if config.mode.uses_contrastive() {
            network = network.with_contrastive_head(&config.arch, seed);
        }
        if config.mode.uses_speaker() {
            network = network.with_speaker_head(speaker_index.len(), &config.arch, seed);
        }
        let opt = AdamWConfig {
            lr: config.pretrain_lr,
            weight_decay: config.weight_decay,
            ..Default::default()
        };
        let optimizers = network
            .models()
            .iter()
            .map(|m| OptimizerState::new(m, opt))
            .collect();
        Ok(Self {
            corpus,
            config: config.clone(),
            network,
            optimizers,
            speaker_index,
            step: 0,
        })
    }

    pub fn speaker_class(&self, spk: &str) -> usize {
        self.speaker_index[spk]
    }

    fn row(&self, utt: &str) -> Result<&[f32]> {
        self.corpus
            .get(utt)
            .map(|r| r.vec.as_slice())
            .ok_or_else(|| Error::InvalidArgument(format!("utterance {utt:?} not in corpus")))
    }

    pub fn tuple_batch(&self, tuples: &[&ContrastiveTuple]) -> Result<TupleBatch> {
        let dim = self.corpus.dim();
        let n_rows: usize = tuples.iter().map(|t| t.negatives.len() + 2).sum();
        let mut x = Array2::zeros((n_rows, dim));
        let mut r = 0;
        for t in tuples {
            let ids = [t.anchor.as_str(), t.positive.as_str()]
                .into_iter()
                .chain(t.negatives.iter().map(|n| n.utt_id.as_str()));
            for id in ids {
                for (j, &v) in self.row(id)?.iter().enumerate() {
                    x[[r, j]] = f64::from(v);
                }
                r += 1;
            }
        }
        Ok(TupleBatch {
            x,
            n_negatives: tuples.iter().map(|t| t.negatives.len()).collect(),
            speakers: tuples.iter().map(|t| self.speaker_class(&t.spk_id)).collect(),
        })
    }

    fn apply(&mut self, grads: Vec<&crate::nn::Gradients>) -> Result<()> {
        let mut models: Vec<&mut crate::nn::ModelParams> = std::iter::once(&mut self.network.trunk)
            .chain(self.network.contrastive.as_mut())
            .chain(self.network.speaker.as_mut())
            .collect();
        for ((m, opt), g) in models.iter_mut().zip(&mut self.optimizers).zip(grads) {
            opt.step(m, g)?;
        }
        self.step += 1;
        Ok(())
    }

    /// One optimizer step on a batch of tuples (contrastive and multi-task modes).
    pub fn tuple_step(&mut self, tuples: &[&ContrastiveTuple]) -> Result<BatchLoss> {
        let batch = self.tuple_batch(tuples)?;
        let settings = ContrastiveSettings {
            tau: self.config.tau,
            include_positive_in_denominator: self.config.include_positive_in_denominator,
        };
        let weights = self.config.mode_weights();
        let mtl = self.config.mode.uses_speaker().then_some(&weights);
        let (loss, grads) = tuple_batch_gradients(&self.network, &batch, settings, mtl)?;
        if !loss.total.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss at step {}", self.step)));
        }
        let mut list = vec![&grads.trunk, &grads.contrastive];
        list.extend(grads.speaker.as_ref());
        self.apply(list)?;
        Ok(loss)
    }

    /// One optimizer step of speaker classification on corpus rows.
    pub fn speaker_step(&mut self, rows: &[usize]) -> Result<f64> {
        let (x, labels) = self.rows_with_speakers(rows);
        let head = self
            .network
            .speaker
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("network has no speaker head".into()))?;
        let (loss, g_trunk, g_head) = classification_gradients(&self.network.trunk, head, x.view(), &labels)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss at step {}", self.step)));
        }
        self.apply(vec![&g_trunk, &g_head])?;
        Ok(loss)
    }

    fn rows_with_speakers(&self, rows: &[usize]) -> (Array2<f64>, Vec<usize>) {
        let recs = self.corpus.records();
        let x = Array2::from_shape_fn((rows.len(), self.corpus.dim()), |(i, j)| f64::from(recs[rows[i]].vec[j]));
        let labels = rows.iter().map(|&i| self.speaker_class(&recs[i].spk_id)).collect();
        (x, labels)
    }

    /// Speaker accuracy over the whole pretraining corpus.
    pub fn speaker_accuracy(&self) -> Result<Option<f64>> {
        let Some(head) = &self.network.speaker else {
            return Ok(None);
        };
        let all: Vec<usize> = (0..self.corpus.len()).collect();
        let mut hits = 0usize;
        for chunk in all.chunks(512) {
            let (x, labels) = self.rows_with_speakers(chunk);
            let pred = predict(&self.network.trunk, head, x.view())?;
            hits += pred.iter().zip(&labels).filter(|(p, l)| p == l).count();
        }
        Ok(Some(hits as f64 / self.corpus.len() as f64))
    }
}

/// Cluster every speaker with k = N for pair mining. Clustering always sees
/// length-normalized vectors; the network input is left as given.
pub fn pretraining_clusters(corpus: &Corpus, config: &TrainConfig, seed: u64) -> Result<ClusteringRun> {
    cluster_speakers(
        &length_normalize(corpus)?,
        &KMeansConfig {
            k: config.n_clusters,
            n_restarts: config.kmeans_restarts,
            seed: seed::derive(seed, "clusters"),
            ..Default::default()
        },
    )
}

/// Train for `config.steps` optimizer steps and package the result.
///
/// Contrastive modes cluster the corpus with k = N and mine one tuple per
/// anchor; tuples are reshuffled every pass, and re-mined with a fresh seed
/// when `resample_pairs_each_epoch` is set.
pub fn pretrain(corpus: &Corpus, config: &TrainConfig, seed: u64) -> Result<PretrainOutcome> {
    let mut trainer = Pretrainer::new(corpus, config, seed)?;
    let mut losses = Vec::with_capacity(config.steps);
    let mut shuffle_rng = seed::rng(seed::derive(seed, "pretrain_shuffle"));
    let mut n_tuples = 0;
    let mut skipped = None;

    if config.mode.uses_contrastive() {
        let run = pretraining_clusters(corpus, config, seed)?;
        let mine = |epoch: u64| {
            let mseed = seed::derive_index(seed::derive(seed, "mining"), epoch);
            mine_tuples(
                &run,
                corpus,
                &MiningConfig {
                    n_clusters: config.n_clusters,
                    seed: mseed,
                    allow_fewer_negatives: true,
                },
            )
        };
        let mut mined = mine(0)?;
        if mined.tuples.is_empty() {
            return Err(Error::NoTuples(format!(
                "all {} anchors skipped",
                mined.skipped.total()
            )));
        }
        n_tuples = mined.tuples.len();
        skipped = Some(mined.skipped);
        let mut order: Vec<usize> = (0..mined.tuples.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let (mut cursor, mut epoch) = (0usize, 0u64);
        for _ in 0..config.steps {
            if cursor >= order.len() {
                epoch += 1;
                if config.resample_pairs_each_epoch {
                    mined = mine(epoch)?;
                    order = (0..mined.tuples.len()).collect();
                }
                order.shuffle(&mut shuffle_rng);
                cursor = 0;
            }
            let end = (cursor + config.batch_size).min(order.len());
            let batch: Vec<&ContrastiveTuple> = order[cursor..end].iter().map(|&i| &mined.tuples[i]).collect();
            cursor = end;
            losses.push(trainer.tuple_step(&batch)?.total);
        }
    } else {
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let mut cursor = 0usize;
        for _ in 0..config.steps {
            if cursor >= order.len() {
                order.shuffle(&mut shuffle_rng);
                cursor = 0;
            }
            let end = (cursor + config.batch_size).min(order.len());
            let rows = order[cursor..end].to_vec();
            cursor = end;
            losses.push(trainer.speaker_step(&rows)?);
        }
    }

    let head_len = losses.len().min(100);
    let summary = PretrainSummary {
        mode: config.mode,
        seed,
        steps: config.steps,
        n_tuples,
        skipped,
        first_loss_mean: window_mean(&losses[..head_len]),
        final_loss_mean: window_mean(&losses[losses.len() - head_len..]),
        speaker_accuracy: trainer.speaker_accuracy()?,
    };
    let extra = serde_json::json!({
        "config": config,
        "summary": summary,
    });
    let network = trainer.network;
    let checkpoint = Checkpoint::new(network.models(), seed, config.steps as u64, extra);
    Ok(PretrainOutcome {
        network,
        checkpoint,
        losses,
        summary,
    })
}
