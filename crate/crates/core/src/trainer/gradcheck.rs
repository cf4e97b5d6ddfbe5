//! Finite-difference checks of every trainable component on a small
//! randomly initialised network.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nn::{forward, grad_check_with, Activation, GradCheckReport, ModelParams, Stencil};
use crate::objectives::MtlWeights;
use crate::{seed, Error, Result};

use super::config::ArchConfig;
use super::network::{classification_gradients, tuple_batch_gradients, ContrastiveSettings, Network, TupleBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckTarget {
    Contrastive,
    Speaker,
    Emotion,
    Mtl,
    All,
}

impl FromStr for CheckTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "contrastive" => Self::Contrastive,
            "speaker" | "spk_cls" => Self::Speaker,
            "emotion" => Self::Emotion,
            "mtl" => Self::Mtl,
            "all" => Self::All,
            _ => return Err(Error::InvalidArgument(format!("unknown grad-check head {s:?}"))),
        })
    }
}

impl fmt::Display for CheckTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Contrastive => "contrastive",
            Self::Speaker => "speaker",
            Self::Emotion => "emotion",
            Self::Mtl => "mtl",
            Self::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCheck {
    /// e.g. `contrastive[include_positive=false]/head`.
    pub name: String,
    pub report: GradCheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckSummary {
    pub checks: Vec<ComponentCheck>,
    pub max_rel_error: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Step and formula of the numerical derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifference {
    pub eps: f64,
    pub stencil: Stencil,
}

impl Default for FiniteDifference {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            stencil: Stencil::Central,
        }
    }
}

pub const GRL_LAMBDAS: [f64; 3] = [0.0, 0.5, 1.0];

const INPUT_DIM: usize = 6;
const N_SPEAKERS: usize = 3;
const N_EMOTIONS: usize = 4;
const CLASSIFIER_ROWS: usize = 7;
const KINK_MARGIN: f64 = 1e-2;

fn small_arch() -> ArchConfig {
    ArchConfig {
        trunk_hidden: 8,
        projection_dim: Some(6),
        projection_out: 5,
        head_hidden: 6,
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

fn tuple_batch(rng: &mut impl Rng) -> TupleBatch {
    let n_negatives = vec![2, 3, 1];
    let rows: usize = n_negatives.iter().map(|m| m + 2).sum();
    TupleBatch {
        x: gaussian_matrix(rows, INPUT_DIM, rng),
        n_negatives,
        speakers: vec![0, 2, 1],
    }
}

fn random_network(rng: &mut impl Rng, seed: u64) -> Network {
    let arch = small_arch();
    let mut net = Network::trunk_only(INPUT_DIM, &arch, seed)
        .with_contrastive_head(&arch, seed)
        .with_speaker_head(N_SPEAKERS, &arch, seed)
        .with_emotion_head(N_EMOTIONS, &arch, seed);
    let models = std::iter::once(&mut net.trunk)
        .chain(net.contrastive.as_mut())
        .chain(net.speaker.as_mut())
        .chain(net.emotion.as_mut());
    for model in models {
        for layer in &mut model.layers {
            layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
    }
    net
}

/// Smallest distance of any ReLU pre-activation from the kink at zero.
fn relu_margin(model: &ModelParams, x: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    let (out, cache) = forward(model, x)?;
    let margin = model
        .layers
        .iter()
        .zip(cache.pre_activations())
        .filter(|(l, _)| l.activation == Activation::Relu)
        .flat_map(|(_, pre)| pre.iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min);
    Ok((margin, out))
}

struct Fixture {
    net: Network,
    batch: TupleBatch,
    /// Inputs for the classifier checks.
    x: Array2<f64>,
}

impl Fixture {
    fn margin(&self) -> Result<f64> {
        let mut margin = f64::INFINITY;
        for x in [&self.batch.x, &self.x] {
            let (m, h) = relu_margin(&self.net.trunk, x.view())?;
            margin = margin.min(m);
            for head in [&self.net.contrastive, &self.net.speaker, &self.net.emotion].into_iter().flatten() {
                margin = margin.min(relu_margin(head, h.view())?.0);
            }
        }
        Ok(margin)
    }
}

/// Random network and inputs whose ReLU pre-activations all stay at least
/// `KINK_MARGIN` away from zero, so the loss is smooth within a step of `eps`.
fn fixture(seed: u64) -> Result<Fixture> {
    for attempt in 0..10_000u64 {
        let s = seed::derive_index(seed, attempt);
        let mut rng = seed::rng(seed::derive(s, "gradcheck"));
        let f = Fixture {
            net: random_network(&mut rng, s),
            batch: tuple_batch(&mut rng),
            x: gaussian_matrix(CLASSIFIER_ROWS, INPUT_DIM, &mut rng),
        };
        if f.margin()? >= KINK_MARGIN {
            return Ok(f);
        }
    }
    Err(Error::Numerical("no gradient-check fixture away from ReLU kinks".into()))
}

fn with_params(model: &ModelParams, theta: &[f64]) -> ModelParams {
    let mut m = model.clone();
    m.assign_flat(theta);
    m
}

fn check(fd: FiniteDifference, name: String, model: &ModelParams, analytic: Vec<f64>, mut loss: impl FnMut(&ModelParams) -> f64) -> ComponentCheck {
    let theta = model.flatten();
    let report = grad_check_with(&theta, &analytic, fd.eps, fd.stencil, |t| loss(&with_params(model, t)));
    ComponentCheck { name, report }
}

fn contrastive_checks(fd: FiniteDifference, net: &Network, batch: &TupleBatch, include_positive: bool) -> Result<Vec<ComponentCheck>> {
    let settings = ContrastiveSettings {
        tau: 0.5,
        include_positive_in_denominator: include_positive,
    };
    let (_, grads) = tuple_batch_gradients(net, batch, settings, None)?;
    let eval = |n: &Network| tuple_batch_gradients(n, batch, settings, None).map(|(l, _)| l.contrastive).unwrap_or(f64::NAN);
    let tag = format!("contrastive[include_positive={include_positive}]");
    let head = net.contrastive.as_ref().expect("contrastive head");
    Ok(vec![
        check(fd, format!("{tag}/head"), head, grads.contrastive.flatten(), |m| {
            eval(&Network {
                contrastive: Some(m.clone()),
                ..net.clone()
            })
        }),
        check(fd, format!("{tag}/trunk"), &net.trunk, grads.trunk.flatten(), |m| {
            eval(&Network {
                trunk: m.clone(),
                ..net.clone()
            })
        }),
    ])
}

fn classifier_checks(fd: FiniteDifference, net: &Network, x: &Array2<f64>, name: &str, head: &ModelParams) -> Result<Vec<ComponentCheck>> {
    let n_classes = head.output_dim();
    let labels: Vec<usize> = (0..x.nrows()).map(|i| i % n_classes).collect();
    let (_, g_trunk, g_head) = classification_gradients(&net.trunk, head, x.view(), &labels)?;
    let eval = |t: &ModelParams, h: &ModelParams| {
        classification_gradients(t, h, x.view(), &labels).map(|r| r.0).unwrap_or(f64::NAN)
    };
    Ok(vec![
        check(fd, format!("{name}/head"), head, g_head.flatten(), |m| eval(&net.trunk, m)),
        check(fd, format!("{name}/trunk"), &net.trunk, g_trunk.flatten(), |m| eval(m, head)),
    ])
}

/// The trunk oracle is the finite difference of `w_c * l_con - lambda * w_s * l_spk`
/// (adversarial) or `w_c * l_con + w_s * l_spk`; heads descend their own weighted loss.
fn mtl_checks(fd: FiniteDifference, net: &Network, batch: &TupleBatch, weights: MtlWeights) -> Result<Vec<ComponentCheck>> {
    let settings = ContrastiveSettings {
        tau: 0.5,
        include_positive_in_denominator: false,
    };
    let (_, grads) = tuple_batch_gradients(net, batch, settings, Some(&weights))?;
    let parts = |n: &Network| {
        tuple_batch_gradients(n, batch, settings, Some(&weights))
            .map(|(l, _)| (l.contrastive, l.speaker.unwrap_or(f64::NAN)))
            .unwrap_or((f64::NAN, f64::NAN))
    };
    let spk_sign = if weights.adversarial { -weights.grl_lambda } else { 1.0 };
    let tag = if weights.adversarial {
        format!("mtl_adversarial[lambda={}]", weights.grl_lambda)
    } else {
        "mtl".to_string()
    };
    let trunk_obj = |n: &Network| {
        let (c, s) = parts(n);
        weights.w_contrastive * c + spk_sign * weights.w_speaker * s
    };
    let spk = net.speaker.as_ref().expect("speaker head");
    let con = net.contrastive.as_ref().expect("contrastive head");
    Ok(vec![
        check(fd, format!("{tag}/trunk"), &net.trunk, grads.trunk.flatten(), |m| {
            trunk_obj(&Network {
                trunk: m.clone(),
                ..net.clone()
            })
        }),
        check(
            fd,
            format!("{tag}/speaker_head"),
            spk,
            grads.speaker.as_ref().expect("speaker grads").flatten(),
            |m| {
                weights.w_speaker
                    * parts(&Network {
                        speaker: Some(m.clone()),
                        ..net.clone()
                    })
                    .1
            },
        ),
        check(fd, format!("{tag}/contrastive_head"), con, grads.contrastive.flatten(), |m| {
            weights.w_contrastive
                * parts(&Network {
                    contrastive: Some(m.clone()),
                    ..net.clone()
                })
                .0
        }),
    ])
}

/// Run the finite-difference checks for `target` and compare against `tol`.
pub fn run_grad_checks(target: CheckTarget, tol: f64, fd: FiniteDifference, seed: u64) -> Result<GradCheckSummary> {
    let Fixture { net, batch, x } = fixture(seed)?;
    let mut checks = Vec::new();
    let all = target == CheckTarget::All;
    if all || target == CheckTarget::Contrastive {
        checks.extend(contrastive_checks(fd, &net, &batch, false)?);
        checks.extend(contrastive_checks(fd, &net, &batch, true)?);
    }
    if all || target == CheckTarget::Speaker {
        let head = net.speaker.as_ref().expect("speaker head");
        checks.extend(classifier_checks(fd, &net, &x, "speaker", head)?);
    }
    if all || target == CheckTarget::Emotion {
        let head = net.emotion.as_ref().expect("emotion head");
        checks.extend(classifier_checks(fd, &net, &x, "emotion", head)?);
    }
    if all || target == CheckTarget::Mtl {
        let base = MtlWeights {
            w_contrastive: 1.0,
            w_speaker: 0.7,
            adversarial: false,
            grl_lambda: 1.0,
        };
        checks.extend(mtl_checks(fd, &net, &batch, base)?);
        for lambda in GRL_LAMBDAS {
            checks.extend(mtl_checks(
                fd,
                &net,
                &batch,
                MtlWeights {
                    adversarial: true,
                    grl_lambda: lambda,
                    ..base
                },
            )?);
        }
    }
    let max_rel_error = checks.iter().map(|c| c.report.max_rel_error).fold(0.0, f64::max);
    let passed = checks.iter().all(|c| c.report.max_rel_error <= tol);
    Ok(GradCheckSummary {
        checks,
        max_rel_error,
        tol,
        passed,
    })
}
