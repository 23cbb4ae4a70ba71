//! First-order optimizers over [`NetworkParams`].

use serde::{Deserialize, Serialize};

use super::{Gradients, NetworkParams};
use crate::error::{Error, Result};

/// Optimizer selection and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerKind {
    /// Adam with the usual defaults (betas 0.9/0.999, eps 1e-8).
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            OptimizerKind::Sgd { lr } => *lr > 0.0,
            OptimizerKind::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => *lr > 0.0 && (0.0..1.0).contains(beta1) && (0.0..1.0).contains(beta2) && *eps >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad optimizer settings: {self:?}")))
        }
    }
}

/// Optimizer state: moment accumulators shaped like the parameters plus a
/// step counter.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    first_moment: Option<Gradients>,
    second_moment: Option<Gradients>,
    pub step_count: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Result<Self> {
        kind.validate()?;
        Ok(Optimizer {
            kind,
            first_moment: None,
            second_moment: None,
            step_count: 0,
        })
    }

    /// Applies one update in place. SGD: `p -= lr * g`. Adam: the standard
    /// bias-corrected moment update. The step counter increments by 1.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != params.layers.len() {
            return Err(Error::DimensionMismatch {
                context: "optimizer step".into(),
                expected: params.layers.len(),
                found: grads.layers.len(),
            });
        }
        self.step_count += 1;
        match self.kind {
            OptimizerKind::Sgd { lr } => {
                for (layer, lg) in params.layers.iter_mut().zip(&grads.layers) {
                    for (p, g) in layer.weights.iter_mut().zip(&lg.weights) {
                        *p -= lr * g;
                    }
                    for (p, g) in layer.bias.iter_mut().zip(&lg.bias) {
                        *p -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                if self.first_moment.is_none() {
                    self.first_moment = Some(Gradients::zeros_like(params));
                    self.second_moment = Some(Gradients::zeros_like(params));
                }
                let m = self.first_moment.as_mut().expect("initialized above");
                let v = self.second_moment.as_mut().expect("initialized above");
                let c1 = 1.0 - beta1.powi(self.step_count as i32);
                let c2 = 1.0 - beta2.powi(self.step_count as i32);
                for li in 0..params.layers.len() {
                    let layer = &mut params.layers[li];
                    let lg = &grads.layers[li];
                    let lm = &mut m.layers[li];
                    let lv = &mut v.layers[li];
                    for i in 0..layer.weights.len() {
                        let g = lg.weights[i];
                        lm.weights[i] = beta1 * lm.weights[i] + (1.0 - beta1) * g;
                        lv.weights[i] = beta2 * lv.weights[i] + (1.0 - beta2) * g * g;
                        let mhat = lm.weights[i] / c1;
                        let vhat = lv.weights[i] / c2;
                        layer.weights[i] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                    for i in 0..layer.bias.len() {
                        let g = lg.bias[i];
                        lm.bias[i] = beta1 * lm.bias[i] + (1.0 - beta1) * g;
                        lv.bias[i] = beta2 * lv.bias[i] + (1.0 - beta2) * g * g;
                        let mhat = lm.bias[i] / c1;
                        let vhat = lv.bias[i] / c2;
                        layer.bias[i] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
