//! Loss functions with analytic gradients.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cosine similarity `x.y / (|x| |y|)`.
pub fn cosine_sim(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    cosine_with_grad(ArrayView1::from(x), ArrayView1::from(y)).map(|(s, _, _)| s)
}

/// Similarity and its gradients wrt both arguments.
fn cosine_with_grad(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    let nx = x.dot(&x).sqrt();
    let ny = y.dot(&y).sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::InvalidArgument("cosine similarity of a zero vector".into()));
    }
    let s = x.dot(&y) / (nx * ny);
    let dx = &y / (nx * ny) - &x * (s / (nx * nx));
    let dy = &x / (nx * ny) - &y * (s / (ny * ny));
    Ok((s, dx, dy))
}

/// Projected vectors for a contrastive batch. Row `i` of `anchors` and
/// `positives` form a positive pair; `negatives[i]` holds that anchor's mined
/// negatives, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub anchors: Array2<f64>,
    pub positives: Array2<f64>,
    pub negatives: Vec<Array2<f64>>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveLoss {
    /// Mean over anchors.
    pub loss: f64,
    pub per_anchor: Vec<f64>,
    pub grad_anchors: Array2<f64>,
    pub grad_positives: Array2<f64>,
    pub grad_negatives: Vec<Array2<f64>>,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Cluster-contrastive loss over mined negatives:
///
/// `l = -log( exp(sim(a,p)/tau) / sum_k exp(sim(a,n_k)/tau) )`
///
/// With `include_positive_in_denominator` the positive term joins the sum,
/// giving the usual NT-Xent form (bounded below by 0). Without it the loss
/// can go negative. Returns the mean over anchors and gradients wrt every
/// input vector.
pub fn ntxent_variant(batch: &ContrastiveBatch, include_positive_in_denominator: bool) -> Result<ContrastiveLoss> {
    let tau = batch.tau;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    let (b, dim) = batch.anchors.dim();
    if batch.positives.dim() != (b, dim) || batch.negatives.len() != b {
        return Err(Error::DimensionMismatch {
            expected: b,
            found: batch.positives.nrows().min(batch.negatives.len()),
            context: "contrastive batch rows".into(),
        });
    }
    if b == 0 {
        return Err(Error::InvalidArgument("empty contrastive batch".into()));
    }

    let mut per_anchor = Vec::with_capacity(b);
    let mut grad_anchors = Array2::zeros((b, dim));
    let mut grad_positives = Array2::zeros((b, dim));
    let mut grad_negatives = Vec::with_capacity(b);
    let scale = 1.0 / b as f64;

    for i in 0..b {
        let negs = &batch.negatives[i];
        if negs.nrows() == 0 {
            return Err(Error::InvalidArgument(format!("anchor {i} has no negatives")));
        }
        if negs.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: negs.ncols(),
                context: format!("negatives of anchor {i}"),
            });
        }
        let a = batch.anchors.row(i);
        let (sp, dap, dp) = cosine_with_grad(a, batch.positives.row(i))?;
        let mut logits = Vec::with_capacity(negs.nrows() + 1);
        let mut neg_grads = Vec::with_capacity(negs.nrows());
        for n in negs.rows() {
            let (sn, dan, dn) = cosine_with_grad(a, n)?;
            logits.push(sn / tau);
            neg_grads.push((dan, dn));
        }
        if include_positive_in_denominator {
            logits.push(sp / tau);
        }
        let lse = log_sum_exp(&logits);
        per_anchor.push(lse - sp / tau);

        // dl/d(logit) = softmax weight, minus 1 for the numerator term
        let weights: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
        let wp = if include_positive_in_denominator { weights[negs.nrows()] } else { 0.0 };
        let coeff_p = (wp - 1.0) / tau * scale;
        let mut ga = &dap * coeff_p;
        grad_positives.row_mut(i).assign(&(&dp * coeff_p));
        let mut gn = Array2::zeros(negs.raw_dim());
        for (k, (dan, dn)) in neg_grads.iter().enumerate() {
            let c = weights[k] / tau * scale;
            ga.scaled_add(c, dan);
            gn.row_mut(k).assign(&(dn * c));
        }
        grad_anchors.row_mut(i).assign(&ga);
        grad_negatives.push(gn);
    }
    let loss = per_anchor.iter().sum::<f64>() * scale;
    Ok(ContrastiveLoss {
        loss,
        per_anchor,
        grad_anchors,
        grad_positives,
        grad_negatives,
    })
}

/// Mean cross-entropy of softmax(logits) against integer labels, with the
/// gradient wrt the logits.
pub fn cross_entropy(logits: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (b, c) = logits.dim();
    if labels.len() != b {
        return Err(Error::LengthMismatch {
            left: b,
            right: labels.len(),
        });
    }
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for {c} classes")));
    }
    let mut grad = Array2::zeros((b, c));
    let mut total = 0.0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        let lse = log_sum_exp(&row.to_vec());
        total += lse - row[labels[i]];
        for j in 0..c {
            grad[[i, j]] = (row[j] - lse).exp() / b as f64;
        }
        grad[[i, labels[i]]] -= 1.0 / b as f64;
    }
    Ok((total / b as f64, grad))
}

/// Weights of the contrastive + speaker-classification objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MtlWeights {
    pub w_contrastive: f64,
    pub w_speaker: f64,
    /// Route the speaker branch through gradient reversal.
    pub adversarial: bool,
    pub grl_lambda: f64,
}

impl Default for MtlWeights {
    fn default() -> Self {
        Self {
            w_contrastive: 1.0,
            w_speaker: 1.0,
            adversarial: false,
            grl_lambda: 1.0,
        }
    }
}

impl MtlWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_contrastive >= 0.0 && self.w_speaker >= 0.0 && self.grl_lambda >= 0.0) {
            return Err(Error::InvalidArgument("loss weights and grl lambda must be non-negative".into()));
        }
        if self.w_contrastive == 0.0 && self.w_speaker == 0.0 {
            return Err(Error::InvalidArgument("at least one loss weight must be positive".into()));
        }
        Ok(())
    }
}

/// Reported multi-task loss `w_c * l_con + w_s * l_spk`. Gradient reversal
/// only changes what reaches the trunk, never this scalar.
pub fn mtl_combine(l_con: f64, l_spk: f64, weights: &MtlWeights) -> Result<f64> {
    weights.validate()?;
    Ok(weights.w_contrastive * l_con + weights.w_speaker * l_spk)
}
