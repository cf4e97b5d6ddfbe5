use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Softmax,
    Identity,
}

impl Activation {
    fn apply(self, pre: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => pre.mapv(|v| v.max(0.0)),
            Activation::Tanh => pre.mapv(f64::tanh),
            Activation::Identity => pre.clone(),
            Activation::Softmax => {
                let mut out = pre.clone();
                for mut row in out.rows_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|v| v / sum);
                }
                out
            }
        }
    }

    /// Gradient wrt the pre-activation given the gradient wrt the output.
    fn backprop(self, pre: &Array2<f64>, out: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => {
                let mut g = grad.clone();
                g.zip_mut_with(pre, |g, &p| {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                });
                g
            }
            Activation::Tanh => {
                let mut g = grad.clone();
                g.zip_mut_with(out, |g, &y| *g *= 1.0 - y * y);
                g
            }
            Activation::Identity => grad.clone(),
            Activation::Softmax => {
                // dy_i/dz_j = y_i (delta_ij - y_j)
                let mut g = grad.clone();
                for (mut grow, yrow) in g.rows_mut().into_iter().zip(out.rows()) {
                    let dot = grow.dot(&yrow);
                    grow.zip_mut_with(&yrow, |gi, &yi| *gi = yi * (*gi - dot));
                }
                g
            }
        }
    }
}

/// `y = act(x W^T + b)` with `W` stored as out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Uniform fan-in initialisation `U(-sqrt(3/in), sqrt(3/in))`, zero bias.
    pub fn init(input: usize, output: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (3.0 / input as f64).sqrt();
        let weights = Array2::from_shape_fn((output, input), |_| rng.random_range(-limit..limit));
        Self {
            weights,
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Shared encoder over utterance embeddings.
    Trunk,
    Contrastive,
    SpeakerCls,
    EmotionCls,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: HeadKind,
    pub layers: Vec<DenseLayer>,
}

impl ModelParams {
    /// Stack of layers with widths `dims[0] -> dims[1] -> ...`.
    pub fn init(kind: HeadKind, dims: &[usize], activations: &[Activation], seed: u64) -> Self {
        assert_eq!(dims.len(), activations.len() + 1, "one activation per layer");
        let mut rng = seed::rng(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| DenseLayer::init(w[0], w[1], a, &mut rng))
            .collect();
        Self { kind, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::output_dim)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: w[0].output_dim(),
                    found: w[1].input_dim(),
                    context: format!("input of layer {}", i + 1),
                });
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: l.output_dim(),
                    found: l.bias.len(),
                    context: format!("bias of layer {i}"),
                });
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite parameter in layer {i}")));
            }
        }
        Ok(())
    }

    /// Parameters in layer order, each layer's weights row-major then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn assign_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.n_params(), "flat parameter length");
        let mut it = values.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
    }
}

/// Intermediate values kept by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Pre-activation values of every layer, in layer order.
    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre
    }
}

pub fn forward(params: &ModelParams, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
    if x.ncols() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            found: x.ncols(),
            context: format!("{:?} input", params.kind),
        });
    }
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(params.layers.len()),
        pre: Vec::with_capacity(params.layers.len()),
        outputs: Vec::with_capacity(params.layers.len()),
    };
    let mut h = x.to_owned();
    for l in &params.layers {
        let pre = h.dot(&l.weights.t()) + &l.bias;
        let out = l.activation.apply(&pre);
        cache.inputs.push(h);
        cache.pre.push(pre);
        h = out.clone();
        cache.outputs.push(out);
    }
    Ok((h, cache))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.mapv_inplace(|v| v * factor);
            l.bias.mapv_inplace(|v| v * factor);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }
}

/// Reverse-mode pass: parameter gradients and the gradient wrt the input.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    grad_out: ArrayView2<f64>,
) -> Result<(Gradients, Array2<f64>)> {
    let last = cache.outputs.last();
    if cache.pre.len() != params.layers.len() || last.map(|o| o.dim()) != Some(grad_out.dim()) {
        return Err(Error::DimensionMismatch {
            expected: last.map_or(0, |o| o.ncols()),
            found: grad_out.ncols(),
            context: format!("{:?} upstream gradient", params.kind),
        });
    }
    let mut grad = grad_out.to_owned();
    let mut layers = Vec::with_capacity(params.layers.len());
    for (i, l) in params.layers.iter().enumerate().rev() {
        let dpre = l.activation.backprop(&cache.pre[i], &cache.outputs[i], &grad);
        layers.push(LayerGrad {
            weights: dpre.t().dot(&cache.inputs[i]),
            bias: dpre.sum_axis(Axis(0)),
        });
        grad = dpre.dot(&l.weights);
    }
    layers.reverse();
    Ok((Gradients { layers }, grad))
}

/// Gradient reversal: identity on the way forward.
pub fn grl_forward(x: ArrayView2<f64>) -> Array2<f64> {
    x.to_owned()
}

/// Gradient reversal on the way back: `-lambda * g`.
pub fn grl_backward(grad: ArrayView2<f64>, lambda: f64) -> Array2<f64> {
    grad.mapv(|g| -lambda * g)
}
