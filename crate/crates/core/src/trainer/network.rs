//! Trunk + heads and the batched loss/gradient routines the trainer and the
//! gradient checks share.

use ndarray::{s, Array2, ArrayView2};

use crate::nn::{backward, forward, grl_backward, grl_forward, Activation, Gradients, HeadKind, ModelParams};
use crate::objectives::{cross_entropy, ntxent_variant, ContrastiveBatch, MtlWeights};
use crate::{seed, Error, Result};

use super::config::ArchConfig;

/// Utterance-level inputs carry a single frame, so average pooling over
/// frames is the identity. Kept as an explicit stage in front of every head.
pub fn average_pool(x: ArrayView2<f64>) -> Array2<f64> {
    x.to_owned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub trunk: ModelParams,
    pub contrastive: Option<ModelParams>,
    pub speaker: Option<ModelParams>,
    pub emotion: Option<ModelParams>,
}

impl Network {
    pub fn trunk_only(input_dim: usize, arch: &ArchConfig, seed: u64) -> Self {
        let h = arch.trunk_hidden;
        Self {
            trunk: ModelParams::init(
                HeadKind::Trunk,
                &[input_dim, h, h],
                &[Activation::Relu, Activation::Relu],
                seed::derive(seed, "trunk"),
            ),
            contrastive: None,
            speaker: None,
            emotion: None,
        }
    }

    pub fn trunk_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    /// Dense-ReLU then dense-tanh projection used by the contrastive loss.
    pub fn with_contrastive_head(mut self, arch: &ArchConfig, seed: u64) -> Self {
        let input = self.trunk.input_dim();
        let proj = arch.projection_dim.unwrap_or(input);
        self.contrastive = Some(ModelParams::init(
            HeadKind::Contrastive,
            &[self.trunk_dim(), proj, arch.projection_out],
            &[Activation::Relu, Activation::Tanh],
            seed::derive(seed, "contrastive_head"),
        ));
        self
    }

    /// Dense-ReLU then a logit layer; softmax is folded into the cross-entropy.
    pub fn with_speaker_head(mut self, n_speakers: usize, arch: &ArchConfig, seed: u64) -> Self {
        self.speaker = Some(classifier(HeadKind::SpeakerCls, self.trunk_dim(), n_speakers, arch, seed::derive(seed, "speaker_head")));
        self
    }

    pub fn with_emotion_head(mut self, n_classes: usize, arch: &ArchConfig, seed: u64) -> Self {
        self.emotion = Some(classifier(HeadKind::EmotionCls, self.trunk_dim(), n_classes, arch, seed::derive(seed, "emotion_head")));
        self
    }

    pub fn models(&self) -> Vec<ModelParams> {
        std::iter::once(self.trunk.clone())
            .chain(self.contrastive.clone())
            .chain(self.speaker.clone())
            .chain(self.emotion.clone())
            .collect()
    }
}

fn classifier(kind: HeadKind, input: usize, classes: usize, arch: &ArchConfig, seed: u64) -> ModelParams {
    ModelParams::init(
        kind,
        &[input, arch.head_hidden, classes],
        &[Activation::Relu, Activation::Identity],
        seed,
    )
}

/// Rows of a tuple batch: for every tuple the anchor, then the positive,
/// then its negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleBatch {
    pub x: Array2<f64>,
    pub n_negatives: Vec<usize>,
    /// Speaker class of each tuple (used by the speaker branch).
    pub speakers: Vec<usize>,
}

impl TupleBatch {
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_negatives.len());
        let mut at = 0;
        for &m in &self.n_negatives {
            out.push(at);
            at += 2 + m;
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.n_negatives.iter().map(|m| m + 2).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastiveSettings {
    pub tau: f64,
    pub include_positive_in_denominator: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub contrastive: f64,
    pub speaker: Option<f64>,
    /// `w_c * contrastive + w_s * speaker`.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub trunk: Gradients,
    pub contrastive: Gradients,
    pub speaker: Option<Gradients>,
}

/// Loss and gradients of the contrastive objective on a tuple batch, plus the
/// speaker-classification branch on the anchors when `mtl` is given.
///
/// Head gradients are scaled by their loss weight. In adversarial mode the
/// speaker head still descends its own loss while the trunk receives the
/// branch gradient through gradient reversal.
pub fn tuple_batch_gradients(
    net: &Network,
    batch: &TupleBatch,
    settings: ContrastiveSettings,
    mtl: Option<&MtlWeights>,
) -> Result<(BatchLoss, NetworkGrads)> {
    let head = net
        .contrastive
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("network has no contrastive head".into()))?;
    if batch.x.nrows() != batch.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: batch.n_rows(),
            found: batch.x.nrows(),
            context: "tuple batch rows".into(),
        });
    }
    let (h, trunk_cache) = forward(&net.trunk, batch.x.view())?;
    let pooled = average_pool(h.view());
    let (z, head_cache) = forward(head, pooled.view())?;

    let offsets = batch.offsets();
    let p = z.ncols();
    let cbatch = ContrastiveBatch {
        anchors: Array2::from_shape_fn((offsets.len(), p), |(i, j)| z[[offsets[i], j]]),
        positives: Array2::from_shape_fn((offsets.len(), p), |(i, j)| z[[offsets[i] + 1, j]]),
        negatives: offsets
            .iter()
            .zip(&batch.n_negatives)
            .map(|(&o, &m)| z.slice(s![o + 2..o + 2 + m, ..]).to_owned())
            .collect(),
        tau: settings.tau,
    };
    let closs = ntxent_variant(&cbatch, settings.include_positive_in_denominator)?;
    let mut gz = Array2::zeros(z.raw_dim());
    for (i, &o) in offsets.iter().enumerate() {
        gz.row_mut(o).assign(&closs.grad_anchors.row(i));
        gz.row_mut(o + 1).assign(&closs.grad_positives.row(i));
        gz.slice_mut(s![o + 2..o + 2 + batch.n_negatives[i], ..])
            .assign(&closs.grad_negatives[i]);
    }

    let w_c = mtl.map_or(1.0, |w| w.w_contrastive);
    let (mut g_head, gh_con) = backward(head, &head_cache, gz.view())?;
    g_head.scale(w_c);
    let mut gh = gh_con * w_c;

    let mut speaker_loss = None;
    let mut g_speaker = None;
    if let Some(w) = mtl {
        w.validate()?;
        let spk_head = net
            .speaker
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("multi-task training needs a speaker head".into()))?;
        let anchors = Array2::from_shape_fn((offsets.len(), pooled.ncols()), |(i, j)| pooled[[offsets[i], j]]);
        let hs = grl_forward(anchors.view());
        let (logits, spk_cache) = forward(spk_head, hs.view())?;
        let (l_spk, g_logits) = cross_entropy(logits.view(), &batch.speakers)?;
        let (mut g_spk_head, g_hs) = backward(spk_head, &spk_cache, g_logits.view())?;
        g_spk_head.scale(w.w_speaker);
        let g_hs = if w.adversarial {
            grl_backward(g_hs.view(), w.grl_lambda)
        } else {
            g_hs
        };
        for (i, &o) in offsets.iter().enumerate() {
            let mut row = gh.row_mut(o);
            row.scaled_add(w.w_speaker, &g_hs.row(i));
        }
        speaker_loss = Some(l_spk);
        g_speaker = Some(g_spk_head);
    }

    let (g_trunk, _) = backward(&net.trunk, &trunk_cache, gh.view())?;
    let total = w_c * closs.loss + mtl.map_or(0.0, |w| w.w_speaker * speaker_loss.unwrap_or(0.0));
    Ok((
        BatchLoss {
            contrastive: closs.loss,
            speaker: speaker_loss,
            total,
        },
        NetworkGrads {
            trunk: g_trunk,
            contrastive: g_head,
            speaker: g_speaker,
        },
    ))
}

/// Cross-entropy of `head(pool(trunk(x)))` with gradients for trunk and head.
pub fn classification_gradients(
    trunk: &ModelParams,
    head: &ModelParams,
    x: ArrayView2<f64>,
    labels: &[usize],
) -> Result<(f64, Gradients, Gradients)> {
    let (h, trunk_cache) = forward(trunk, x)?;
    let pooled = average_pool(h.view());
    let (logits, head_cache) = forward(head, pooled.view())?;
    let (loss, g_logits) = cross_entropy(logits.view(), labels)?;
    let (g_head, g_h) = backward(head, &head_cache, g_logits.view())?;
    let (g_trunk, _) = backward(trunk, &trunk_cache, g_h.view())?;
    Ok((loss, g_trunk, g_head))
}

/// Argmax class of every row.
pub fn predict(trunk: &ModelParams, head: &ModelParams, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    let (h, _) = forward(trunk, x)?;
    let (logits, _) = forward(head, average_pool(h.view()).view())?;
    Ok(logits
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                .0
        })
        .collect())
}
