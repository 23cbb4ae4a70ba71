//! Minimal dense feedforward network with reverse-mode gradients.
//!
//! Everything is `f64` and deterministic: the same `(specs, seed)` pair
//! produces bit-identical parameters, and forward/backward are pure
//! functions of their inputs. Weights are row-major `(out_dim, in_dim)`.

mod optimizer;

pub use optimizer::{Optimizer, OptimizerKind};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{first_non_finite, rng_for};

/// Element-wise activation applied after the affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    /// Leaky ReLU; the payload is the negative-side slope, in (0, 1).
    LeakyRelu(f64),
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        if let Activation::LeakyRelu(slope) = self {
            if !(*slope > 0.0 && *slope < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "leaky_relu slope must be in (0, 1), got {slope}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation. At the kink (z = 0) the
    /// subgradient on the negative side is used, matching the loss module's
    /// subgradient-0 convention.
    #[inline]
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    *slope
                }
            }
        }
    }
}

/// Shape and activation of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_width: usize, output_width: usize, activation: Activation) -> Result<Self> {
        if input_width == 0 || output_width == 0 {
            return Err(Error::InvalidConfig(format!(
                "layer widths must be >= 1, got {input_width}x{output_width}"
            )));
        }
        activation.validate()?;
        Ok(Self {
            input_width,
            output_width,
            activation,
        })
    }
}

/// One dense layer's parameters. `weights` is row-major `(out, in)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Full parameter set plus the seed it was initialized from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
    pub seed: u64,
}

/// Per-layer activation record produced by [`NetworkParams::forward`].
/// `post` holds every layer's post-activation vector; the final entry is the
/// raw network output (experiment heads use an identity output layer).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// The network output (last post-activation vector).
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace has at least one layer")
    }
}

/// Gradients shaped exactly like the parameters they correspond to.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    /// Zero gradients matching `params`.
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    /// Scales every entry by `c`.
    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            for x in &mut l.weights {
                *x *= c;
            }
            for x in &mut l.bias {
                *x *= c;
            }
        }
    }
}

impl NetworkParams {
    /// He-style initialization: weights i.i.d. normal with per-layer scale
    /// `1/sqrt(fan_in)`, biases zero. Identical seeds give bit-identical
    /// parameters.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::EmptyInput("layer spec list".into()));
        }
        for w in specs.windows(2) {
            if w[0].output_width != w[1].input_width {
                return Err(Error::InvalidConfig(format!(
                    "layer widths do not chain: {} -> {}",
                    w[0].output_width, w[1].input_width
                )));
            }
        }
        let mut rng = rng_for(seed, 0);
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            spec.activation.validate()?;
            let scale = 1.0 / (spec.input_width as f64).sqrt();
            let dist = Normal::new(0.0, scale).expect("positive std");
            let weights: Vec<f64> = (0..spec.input_width * spec.output_width)
                .map(|_| dist.sample(&mut rng))
                .collect();
            layers.push(Layer {
                input_width: spec.input_width,
                output_width: spec.output_width,
                activation: spec.activation,
                weights,
                bias: vec![0.0; spec.output_width],
            });
        }
        Ok(NetworkParams { layers, seed })
    }

    /// Input width the network expects.
    pub fn input_width(&self) -> usize {
        self.layers[0].input_width
    }

    /// Width of the raw network output.
    pub fn output_width(&self) -> usize {
        self.layers.last().expect("nonempty").output_width
    }

    /// Evaluates the network, recording every layer's pre- and
    /// post-activation vectors.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_width() {
            return Err(Error::DimensionMismatch {
                context: "forward input (layer 0)".into(),
                expected: self.input_width(),
                found: x.len(),
            });
        }
        if let Some(i) = first_non_finite(x) {
            return Err(Error::NonFinite {
                context: "forward input".into(),
                index: i,
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = x;
        for layer in &self.layers {
            let mut z = vec![0.0; layer.output_width];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.input_width..(o + 1) * layer.input_width];
                let mut acc = layer.bias[o];
                for (w, xi) in row.iter().zip(current) {
                    acc += w * xi;
                }
                *zo = acc;
            }
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
            current = post.last().expect("just pushed");
        }
        Ok(ForwardTrace {
            input: x.to_vec(),
            pre,
            post,
        })
    }

    /// Reverse accumulation through the trace produced by [`forward`].
    /// `output_grad` is the loss gradient with respect to the network output.
    ///
    /// [`forward`]: NetworkParams::forward
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &[f64]) -> Result<Gradients> {
        let out_w = self.output_width();
        if output_grad.len() != out_w {
            return Err(Error::DimensionMismatch {
                context: format!("backward output_grad (layer {})", self.layers.len() - 1),
                expected: out_w,
                found: output_grad.len(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut upstream = output_grad.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let pre = &trace.pre[li];
            // d loss / d pre-activation
            let dz: Vec<f64> = upstream
                .iter()
                .zip(pre)
                .map(|(g, &z)| g * layer.activation.derivative(z))
                .collect();
            let prev: &[f64] = if li == 0 {
                &trace.input
            } else {
                &trace.post[li - 1]
            };
            let lg = &mut grads.layers[li];
            for (o, &dzo) in dz.iter().enumerate() {
                let row = &mut lg.weights[o * layer.input_width..(o + 1) * layer.input_width];
                for (w, &p) in row.iter_mut().zip(prev) {
                    *w += dzo * p;
                }
                lg.bias[o] += dzo;
            }
            if let Some(i) = first_non_finite(&lg.weights) {
                return Err(Error::NonFinite {
                    context: format!("gradient of layer {li} weights"),
                    index: i,
                });
            }
            // Propagate to the previous layer's post-activation.
            let mut down = vec![0.0; layer.input_width];
            for (o, &dzo) in dz.iter().enumerate() {
                let row = &layer.weights[o * layer.input_width..(o + 1) * layer.input_width];
                for (d, &w) in down.iter_mut().zip(row) {
                    *d += dzo * w;
                }
            }
            upstream = down;
        }
        Ok(grads)
    }

    /// Serializes the checkpoint as pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network params serialize")
    }

    /// Reads a checkpoint previously written by [`to_json`].
    ///
    /// [`to_json`]: NetworkParams::to_json
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Builds the chained layer specs for an experiment head: `input` features,
/// hidden layers with `hidden_activation`, and an identity output layer of
/// width `output`.
pub fn head_specs(
    input: usize,
    hidden: &[usize],
    hidden_activation: Activation,
    output: usize,
) -> Result<Vec<LayerSpec>> {
    let mut specs = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input;
    for &h in hidden {
        specs.push(LayerSpec::new(prev, h, hidden_activation)?);
        prev = h;
    }
    specs.push(LayerSpec::new(prev, output, Activation::Identity)?);
    Ok(specs)
}
