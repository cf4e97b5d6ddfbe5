use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::layer::{Gradients, ModelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// AdamW moments for one [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub step: u64,
    first: Vec<(Array2<f64>, Array1<f64>)>,
    second: Vec<(Array2<f64>, Array1<f64>)>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, config: AdamWConfig) -> Self {
        let zeros: Vec<_> = params
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// One AdamW update: decoupled weight decay `p -= lr * wd * p`, then the
    /// bias-corrected Adam step.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != params.layers.len() || self.first.len() != params.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: params.layers.len(),
                found: grads.layers.len(),
                context: "optimizer layer count".into(),
            });
        }
        for (i, (l, g)) in params.layers.iter().zip(&grads.layers).enumerate() {
            if g.weights.raw_dim() != l.weights.raw_dim() || g.bias.len() != l.bias.len() {
                return Err(Error::DimensionMismatch {
                    expected: l.n_params(),
                    found: g.weights.len() + g.bias.len(),
                    context: format!("{:?} layer {i} gradient", params.kind),
                });
            }
            if g.weights.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("{:?} layer {i} weights", params.kind)));
            }
            if g.bias.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("{:?} layer {i} bias", params.kind)));
            }
        }

        self.step += 1;
        let AdamWConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *p -= lr * weight_decay * *p;
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((l, g), m), v) in params
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            ndarray::Zip::from(&mut l.weights)
                .and(&g.weights)
                .and(&mut m.0)
                .and(&mut v.0)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut l.bias)
                .and(&g.bias)
                .and(&mut m.1)
                .and(&mut v.1)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}
