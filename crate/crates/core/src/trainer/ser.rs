//! Supervised emotion recognition on top of a (pre)trained trunk, speaker
//! disjoint splits and UAR evaluation.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::nn::{AdamWConfig, Checkpoint, HeadKind, ModelParams, OptimizerState};
use crate::{seed, Error, Result};

use super::config::TrainConfig;
use super::network::{classification_gradients, predict, Network};

/// Speaker-level split fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerSplits {
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
}

impl SerSplits {
    /// Assign whole speakers to train/val/test. Validation and test each get
    /// at least one speaker and train keeps the rest.
    pub fn by_speaker(corpus: &Corpus, fractions: SplitFractions, seed: u64) -> Result<Self> {
        let SplitFractions { train, val, test } = fractions;
        if !(train > 0.0 && val > 0.0 && test > 0.0) {
            return Err(Error::InvalidArgument("split fractions must be positive".into()));
        }
        let mut speakers = corpus.speaker_ids();
        let n = speakers.len();
        if n < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 speakers for a train/val/test split, got {n}"
            )));
        }
        speakers.shuffle(&mut seed::rng(seed::derive(seed, "speaker_split")));
        let total = train + val + test;
        let n_val = ((val / total * n as f64).round() as usize).max(1);
        let n_test = ((test / total * n as f64).round() as usize).max(1).min(n - n_val - 1);
        let val_set: BTreeSet<&String> = speakers[..n_val].iter().collect();
        let test_set: BTreeSet<&String> = speakers[n_val..n_val + n_test].iter().collect();
        let splits = Self {
            train: corpus.filter(|r| !val_set.contains(&r.spk_id) && !test_set.contains(&r.spk_id)),
            val: corpus.filter(|r| val_set.contains(&r.spk_id)),
            test: corpus.filter(|r| test_set.contains(&r.spk_id)),
        };
        splits.check_disjoint()?;
        Ok(splits)
    }

    /// Speaker split followed by label subsampling of the training part only;
    /// validation and test stay fully labelled.
    pub fn with_label_fraction(corpus: &Corpus, fractions: SplitFractions, label_fraction: f64, seed: u64) -> Result<Self> {
        let full = Self::by_speaker(corpus, fractions, seed)?;
        Ok(Self {
            train: subsample_labels(&full.train, label_fraction, seed::derive(seed, "train_labels"))?,
            val: full.val,
            test: full.test,
        })
    }

    pub fn check_disjoint(&self) -> Result<()> {
        let ids = |c: &Corpus| c.speaker_ids().into_iter().collect::<BTreeSet<_>>();
        let (tr, va, te) = (ids(&self.train), ids(&self.val), ids(&self.test));
        for (a, b, name) in [(&tr, &va, "train/val"), (&tr, &te, "train/test"), (&va, &te, "val/test")] {
            if let Some(spk) = a.intersection(b).next() {
                return Err(Error::SplitLeakage(format!("speaker {spk} appears in {name}")));
            }
        }
        Ok(())
    }
}

/// Keep a stratified `fraction` of the labelled utterances (at least one per
/// emotion); unlabelled records are dropped.
pub fn subsample_labels(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("label fraction must lie in (0, 1], got {fraction}")));
    }
    let mut by_emotion: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in corpus.records() {
        if let Some(e) = &r.emotion {
            by_emotion.entry(e).or_default().push(&r.utt_id);
        }
    }
    let mut keep = BTreeSet::new();
    for (emotion, mut utts) in by_emotion {
        utts.sort_unstable();
        utts.shuffle(&mut seed::rng(seed::derive(seed, emotion)));
        let n = ((fraction * utts.len() as f64).round() as usize).clamp(1, utts.len());
        keep.extend(utts[..n].iter().map(|u| u.to_string()));
    }
    Ok(corpus.filter(|r| keep.contains(&r.utt_id)))
}

/// Labelled rows of a corpus as a matrix plus class indices. Records whose
/// emotion is missing are skipped; unknown emotions are an error.
fn labelled_rows(corpus: &Corpus, classes: &[String]) -> Result<(Array2<f64>, Vec<usize>)> {
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, r) in corpus.records().iter().enumerate() {
        let Some(e) = &r.emotion else { continue };
        let &c = index
            .get(e.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("emotion {e:?} of {} unknown to the model", r.utt_id)))?;
        rows.push(i);
        labels.push(c);
    }
    let recs = corpus.records();
    let x = Array2::from_shape_fn((rows.len(), corpus.dim()), |(i, j)| f64::from(recs[rows[i]].vec[j]));
    Ok((x, labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerModel {
    pub trunk: ModelParams,
    pub head: ModelParams,
    /// Emotion name of each output unit.
    pub classes: Vec<String>,
}

impl SerModel {
    pub fn predict(&self, corpus: &Corpus) -> Result<Vec<usize>> {
        let recs = corpus.records();
        let x = Array2::from_shape_fn((recs.len(), corpus.dim()), |(i, j)| f64::from(recs[i].vec[j]));
        predict(&self.trunk, &self.head, x.view())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub uar: f64,
    pub per_class_recall: BTreeMap<String, f64>,
    /// Rows are true classes, columns predictions, both in model class order.
    pub confusion: Vec<Vec<u64>>,
    pub classes: Vec<String>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Mean recall over the classes with nonzero support.
pub fn uar_from_confusion(confusion: &[Vec<u64>]) -> Option<f64> {
    let recalls: Vec<f64> = confusion
        .iter()
        .enumerate()
        .filter_map(|(i, row)| {
            let support: u64 = row.iter().sum();
            (support > 0).then(|| row[i] as f64 / support as f64)
        })
        .collect();
    (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64)
}

pub fn evaluate_uar(model: &SerModel, corpus: &Corpus, seed: u64) -> Result<EvalResult> {
    let (x, labels) = labelled_rows(corpus, &model.classes)?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("evaluation corpus has no labelled utterances".into()));
    }
    let pred = predict(&model.trunk, &model.head, x.view())?;
    let c = model.classes.len();
    let mut confusion = vec![vec![0u64; c]; c];
    for (&t, &p) in labels.iter().zip(&pred) {
        confusion[t][p] += 1;
    }
    let mut per_class_recall = BTreeMap::new();
    let mut warnings = Vec::new();
    for (i, name) in model.classes.iter().enumerate() {
        let support: u64 = confusion[i].iter().sum();
        if support == 0 {
            warnings.push(format!("class {name} absent from evaluation set; excluded from UAR"));
        } else {
            per_class_recall.insert(name.clone(), confusion[i][i] as f64 / support as f64);
        }
    }
    let uar = uar_from_confusion(&confusion).unwrap_or(0.0);
    Ok(EvalResult {
        uar,
        per_class_recall,
        confusion,
        classes: model.classes.clone(),
        seed,
        warnings,
    })
}

fn accuracy(model: &SerModel, x: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let pred = predict(&model.trunk, &model.head, x.view())?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerOutcome {
    pub model: SerModel,
    pub validation: EvalResult,
    /// Epoch (1-based) whose parameters were kept; 0 means the initial model.
    pub best_epoch: usize,
    pub val_accuracy: Vec<f64>,
}

/// Fine-tune a trunk plus a fresh emotion head on `splits.train`, keeping the
/// epoch with the best validation accuracy.
///
/// The trunk comes from `checkpoint` when given, otherwise it is freshly
/// initialised from `seed`. All layers are updated.
pub fn train_ser(checkpoint: Option<&Checkpoint>, splits: &SerSplits, config: &TrainConfig, seed: u64) -> Result<SerOutcome> {
    config.validate()?;
    splits.check_disjoint()?;
    let classes = splits.train.emotions();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "emotion training needs at least 2 classes, found {}",
            classes.len()
        )));
    }
    let dim = splits.train.dim();
    let trunk = match checkpoint {
        Some(ckpt) => {
            let t = ckpt
                .model(HeadKind::Trunk)
                .ok_or_else(|| Error::InvalidArgument("checkpoint has no trunk".into()))?;
            if t.input_dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: t.input_dim(),
                    found: dim,
                    context: "checkpoint trunk input".into(),
                });
            }
            t.clone()
        }
        None => Network::trunk_only(dim, &config.arch, seed::derive(seed, "ser_trunk")).trunk,
    };
    let net = Network {
        trunk,
        contrastive: None,
        speaker: None,
        emotion: None,
    }
    .with_emotion_head(classes.len(), &config.arch, seed);
    let mut model = SerModel {
        trunk: net.trunk,
        head: net.emotion.expect("emotion head attached"),
        classes,
    };

    let (x_train, y_train) = labelled_rows(&splits.train, &model.classes)?;
    let (x_val, y_val) = labelled_rows(&splits.val, &model.classes)?;
    if y_val.is_empty() {
        return Err(Error::InvalidArgument("validation split has no labelled utterances".into()));
    }

    let opt = AdamWConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..Default::default()
    };
    let mut opt_trunk = OptimizerState::new(&model.trunk, opt);
    let mut opt_head = OptimizerState::new(&model.head, opt);
    let mut rng = seed::rng(seed::derive(seed, "ser_shuffle"));
    let mut order: Vec<usize> = (0..y_train.len()).collect();

    let mut best = (accuracy(&model, &x_val, &y_val)?, 0usize, model.clone());
    let mut val_accuracy = Vec::with_capacity(config.epochs_ser);
    for epoch in 1..=config.epochs_ser {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let xb = x_train.select(ndarray::Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y_train[i]).collect();
            let (loss, g_trunk, g_head) = classification_gradients(&model.trunk, &model.head, xb.view(), &yb)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite emotion loss in epoch {epoch}")));
            }
            opt_trunk.step(&mut model.trunk, &g_trunk)?;
            opt_head.step(&mut model.head, &g_head)?;
        }
        let acc = accuracy(&model, &x_val, &y_val)?;
        val_accuracy.push(acc);
        if acc > best.0 {
            best = (acc, epoch, model.clone());
        } else if epoch - best.1 >= config.patience.max(1) {
            break;
        }
    }
    let (_, best_epoch, model) = best;
    let validation = evaluate_uar(&model, &splits.val, seed)?;
    Ok(SerOutcome {
        model,
        validation,
        best_epoch,
        val_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uar_examples() {
        assert_eq!(uar_from_confusion(&[vec![5, 0], vec![0, 7]]), Some(1.0));
        assert_eq!(uar_from_confusion(&[vec![4, 0], vec![2, 2]]), Some(0.75));
        let majority = vec![vec![10, 0, 0, 0], vec![10, 0, 0, 0], vec![10, 0, 0, 0], vec![10, 0, 0, 0]];
        assert_eq!(uar_from_confusion(&majority), Some(0.25));
        assert_eq!(uar_from_confusion(&[vec![0, 0], vec![0, 0]]), None);
    }
}
