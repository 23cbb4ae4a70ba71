//! Deterministic training loop for magnitude-direction heads, plus scoring
//! helpers shared by the experiments and the CLI.

use serde::{Deserialize, Serialize};

use crate::data::{mixup, LabeledSet, MixupMode};
use crate::error::{Error, Result};
use crate::head::{HcmOutput, TargetDecomposition};
use crate::loss::{loss_grad, loss_total, LossSpec};
use crate::nn::{NetworkParams, Optimizer, OptimizerKind};
use crate::util::rng_for;

/// Everything the trainer needs beyond the initial parameters and data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seed for the shuffle and mixup streams (independent of init).
    pub seed: u64,
    /// When set, every training batch is replaced by its mixed version.
    pub mixup: Option<MixupMode>,
    /// Classification runs may stop at the first epoch whose training
    /// accuracy (argmax of the recomposed prediction) reaches this value.
    pub stop_at_train_accuracy: Option<f64>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.optimizer.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch size must be positive".into(),
            ));
        }
        if let Some(mode) = &self.mixup {
            mode.validate()?;
        }
        if let Some(acc) = self.stop_at_train_accuracy {
            if !(0.0..=1.0).contains(&acc) {
                return Err(Error::InvalidConfig(format!(
                    "accuracy stop target must be in [0, 1], got {acc}"
                )));
            }
        }
        Ok(())
    }
}

/// Trained parameters plus the loss history.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: NetworkParams,
    /// Mean per-sample loss of each completed epoch.
    pub epoch_losses: Vec<f64>,
    pub epochs_run: usize,
    /// How many forward passes produced a negative magnitude head.
    pub negative_magnitude_count: u64,
}

/// Trains `params` on `data` (targets must already be at least
/// two-dimensional; scalar targets go through the duplication embedding
/// first). Batching accumulates per-sample gradients with mean reduction;
/// shuffling, mixup draws, and therefore the final parameters are a pure
/// function of `(params, data, config)`.
pub fn train(
    mut params: NetworkParams,
    data: &LabeledSet,
    config: &TrainConfig,
) -> Result<TrainResult> {
    config.validate()?;
    if data.target_dim() < 2 {
        return Err(Error::DimensionMismatch {
            context: "training targets (embed scalars first)".into(),
            expected: 2,
            found: data.target_dim(),
        });
    }
    if data.input_dim() != params.input_width() {
        return Err(Error::DimensionMismatch {
            context: "training inputs vs network".into(),
            expected: params.input_width(),
            found: data.input_dim(),
        });
    }
    if params.output_width() != data.target_dim() + 1 {
        return Err(Error::DimensionMismatch {
            context: "network output vs target dimension + magnitude".into(),
            expected: data.target_dim() + 1,
            found: params.output_width(),
        });
    }

    let n = data.len();
    let mut optimizer = Optimizer::new(config.optimizer)?;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut negative_magnitude_count = 0u64;
    let mut epochs_run = 0;

    for epoch in 0..config.epochs {
        let mut indices: Vec<usize> = (0..n).collect();
        let mut rng = rng_for(config.seed, 0xE0000 + epoch as u64);
        for i in (1..n).rev() {
            let j = rand::Rng::random_range(&mut rng, 0..=i);
            indices.swap(i, j);
        }

        let mut epoch_loss = 0.0;
        for (batch_idx, batch_indices) in indices.chunks(config.batch_size).enumerate() {
            let batch = data.subset(batch_indices)?;
            let batch = match &config.mixup {
                Some(mode) => mixup(
                    &batch,
                    *mode,
                    crate::util::derive_seed(
                        config.seed,
                        0xB000_0000 + (epoch * 1_000_003 + batch_idx) as u64,
                    ),
                )?,
                None => batch,
            };

            let mut grads = crate::nn::Gradients::zeros_like(&params);
            let mut batch_loss = 0.0;
            for i in 0..batch.len() {
                let target = TargetDecomposition::decompose(batch.target(i))?;
                let trace = params.forward(batch.input(i))?;
                let out = HcmOutput::from_raw_output(trace.output())?;
                if out.has_negative_magnitude() {
                    negative_magnitude_count += 1;
                }
                let breakdown = loss_total(&config.loss, &target, &out)?;
                batch_loss += breakdown.total;
                let (grad_mag, grad_dir) = loss_grad(&config.loss, &target, &out)?;
                let mut output_grad = Vec::with_capacity(out.dim() + 1);
                output_grad.push(grad_mag);
                output_grad.extend_from_slice(&grad_dir);
                let sample_grads = params.backward(&trace, &output_grad)?;
                grads.add_assign(&sample_grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            grads.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut params, &grads)?;
            epoch_loss += batch_loss;
        }
        epoch_losses.push(epoch_loss / n as f64);
        epochs_run = epoch + 1;

        if let Some(target_acc) = config.stop_at_train_accuracy {
            if classification_accuracy(&params, data)? >= target_acc {
                break;
            }
        }
    }

    Ok(TrainResult {
        params,
        epoch_losses,
        epochs_run,
        negative_magnitude_count,
    })
}

/// One scored sample: the head output plus its derived quantities.
#[derive(Debug, Clone)]
pub struct ScoredSample {
    pub output: HcmOutput,
    pub prediction: Vec<f64>,
    pub uncertainty: f64,
    pub sigma_sq: f64,
}

/// Scores of a whole set plus the negative-magnitude diagnostic counter.
#[derive(Debug, Clone)]
pub struct ScoredSet {
    pub samples: Vec<ScoredSample>,
    pub negative_magnitude_count: u64,
}

impl ScoredSet {
    pub fn uncertainties(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.uncertainty).collect()
    }
}

/// Evaluates the head on one input.
pub fn score_sample(params: &NetworkParams, x: &[f64]) -> Result<ScoredSample> {
    let trace = params.forward(x)?;
    let out = HcmOutput::from_raw_output(trace.output())?;
    Ok(ScoredSample {
        prediction: out.recompose(),
        uncertainty: out.uncertainty_score(),
        sigma_sq: out.sigma_hat_sq(),
        output: out,
    })
}

/// Evaluates the head on every row of `inputs`.
pub fn score_inputs(params: &NetworkParams, inputs: &[Vec<f64>]) -> Result<ScoredSet> {
    let mut samples = Vec::with_capacity(inputs.len());
    let mut negative = 0;
    for x in inputs {
        let s = score_sample(params, x)?;
        if s.output.has_negative_magnitude() {
            negative += 1;
        }
        samples.push(s);
    }
    Ok(ScoredSet {
        samples,
        negative_magnitude_count: negative,
    })
}

/// Per-sample RMSE between a prediction vector and its target:
/// `||y_hat - y|| / sqrt(D)`.
pub fn per_sample_rmse(prediction: &[f64], target: &[f64]) -> f64 {
    let d = prediction.len() as f64;
    (prediction
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / d)
        .sqrt()
}

/// Fraction of samples whose recomposed prediction argmax matches the
/// target argmax.
pub fn classification_accuracy(params: &NetworkParams, data: &LabeledSet) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..data.len() {
        let s = score_sample(params, data.input(i))?;
        if argmax(&s.prediction) == argmax(data.target(i)) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_two_moons, Meta};
    use crate::nn::{head_specs, Activation};

    fn tiny_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            loss: LossSpec::squared(),
            optimizer: OptimizerKind::adam(0.01),
            epochs,
            batch_size: 16,
            seed: 5,
            mixup: None,
            stop_at_train_accuracy: None,
        }
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let data = gen_two_moons(64, 0.1, 2).unwrap();
        let specs = head_specs(2, &[16], Activation::Relu, 3).unwrap();
        let init = NetworkParams::init(&specs, 9).unwrap();
        let a = train(init.clone(), &data, &tiny_config(40)).unwrap();
        let b = train(init, &data, &tiny_config(40)).unwrap();
        assert!(a.epoch_losses.last().unwrap() < a.epoch_losses.first().unwrap());
        assert_eq!(a.params.to_json(), b.params.to_json());
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn training_rejects_scalar_targets() {
        let data = LabeledSet::new(
            vec![vec![0.0], vec![1.0]],
            vec![vec![1.0], vec![2.0]],
            Meta::new(),
        )
        .unwrap();
        let specs = head_specs(1, &[4], Activation::Relu, 3).unwrap();
        let init = NetworkParams::init(&specs, 1).unwrap();
        assert!(train(init, &data, &tiny_config(1)).is_err());
    }

    #[test]
    fn accuracy_stop_halts_early() {
        let data = gen_two_moons(128, 0.05, 3).unwrap();
        let specs = head_specs(2, &[16, 16], Activation::Relu, 3).unwrap();
        let init = NetworkParams::init(&specs, 4).unwrap();
        let mut config = tiny_config(500);
        config.optimizer = OptimizerKind::adam(0.005);
        config.stop_at_train_accuracy = Some(0.95);
        let result = train(init, &data, &config).unwrap();
        assert!(result.epochs_run < 500, "ran {} epochs", result.epochs_run);
        let acc = classification_accuracy(&result.params, &data).unwrap();
        assert!(acc >= 0.95);
    }

    #[test]
    fn mixup_training_runs_and_is_deterministic() {
        let data = gen_two_moons(64, 0.1, 6).unwrap();
        let specs = head_specs(2, &[8], Activation::Relu, 3).unwrap();
        let init = NetworkParams::init(&specs, 2).unwrap();
        let mut config = tiny_config(10);
        config.mixup = Some(MixupMode::Dirichlet { k: 8, alpha: 0.5 });
        let a = train(init.clone(), &data, &config).unwrap();
        let b = train(init, &data, &config).unwrap();
        assert_eq!(a.params.to_json(), b.params.to_json());
    }

    #[test]
    fn per_sample_rmse_matches_hand_value() {
        assert!((per_sample_rmse(&[1.0, 1.0], &[0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((per_sample_rmse(&[3.0, 0.0], &[0.0, 4.0]) - (25.0f64 / 2.0).sqrt()).abs() < 1e-12);
    }
}
