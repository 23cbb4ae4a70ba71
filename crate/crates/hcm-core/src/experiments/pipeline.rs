//! Shared plumbing for the experiment runners: seed layout, network
//! construction, calibration fitting, and score-table assembly.

use crate::calibrate::{
    fit_minmax, fit_quantile, fit_temperature, fit_threshold, CalibrationModel, ThresholdPolicy,
};
use crate::data::LabeledSet;
use crate::error::Result;
use crate::experiments::config::{NormalizerKind, RunConfig};
use crate::metrics::EvalPair;
use crate::nn::{head_specs, NetworkParams};
use crate::train::{per_sample_rmse, score_inputs, train, ScoredSet, TrainConfig, TrainResult};
use crate::util::derive_seed;

/// Derived seed streams of a run. Data uses the config seed directly.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_TRAIN: u64 = 2;
pub(crate) const STREAM_SPLIT: u64 = 3;
pub(crate) const STREAM_PERTURB: u64 = 4;

pub(crate) fn init_seed(config: &RunConfig) -> u64 {
    derive_seed(config.seed, STREAM_INIT)
}

pub(crate) fn split_seed(config: &RunConfig) -> u64 {
    derive_seed(config.seed, STREAM_SPLIT)
}

/// Builds the network for `data` and trains it per the config.
pub(crate) fn build_and_train(config: &RunConfig, train_set: &LabeledSet) -> Result<TrainResult> {
    let specs = head_specs(
        train_set.input_dim(),
        &config.network.hidden,
        config.network.activation,
        train_set.target_dim() + 1,
    )?;
    let params = NetworkParams::init(&specs, init_seed(config))?;
    let train_config = TrainConfig {
        loss: config.loss,
        optimizer: config.optimizer,
        epochs: config.epochs,
        batch_size: config.batch_size,
        seed: derive_seed(config.seed, STREAM_TRAIN),
        mixup: config.mixup,
        stop_at_train_accuracy: config.stop_at_train_accuracy,
    };
    train(params, train_set, &train_config)
}

/// Scores a labeled set: per-sample uncertainty and RMSE.
pub(crate) fn score_labeled(
    params: &NetworkParams,
    set: &LabeledSet,
) -> Result<(ScoredSet, Vec<f64>, Vec<f64>)> {
    let scored = score_inputs(params, set.inputs())?;
    let u: Vec<f64> = scored.samples.iter().map(|s| s.uncertainty).collect();
    let r: Vec<f64> = scored
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| per_sample_rmse(&s.prediction, set.target(i)))
        .collect();
    Ok((scored, u, r))
}

/// Fits the calibration model and threshold policy on a validation set.
pub(crate) fn fit_calibration(
    config: &RunConfig,
    params: &NetworkParams,
    val: &LabeledSet,
) -> Result<(CalibrationModel, ThresholdPolicy)> {
    let (_, u, r) = score_labeled(params, val)?;
    let temperature = fit_temperature(&u, &r)?;
    let confidences: Vec<f64> = u
        .iter()
        .map(|ui| crate::calibrate::confidence(*ui, temperature))
        .collect();
    let normalizer = match config.calibration.normalizer {
        NormalizerKind::MinMax => fit_minmax(&confidences)?,
        NormalizerKind::Quantile => fit_quantile(&confidences)?,
    };
    let policy = fit_threshold(config.calibration.threshold, &u)?;
    Ok((
        CalibrationModel {
            temperature,
            normalizer,
        },
        policy,
    ))
}

/// Builds metric pairs from uncertainty/error vectors.
pub(crate) fn eval_pairs(model: &CalibrationModel, u: &[f64], r: &[f64]) -> Vec<EvalPair> {
    u.iter()
        .zip(r)
        .map(|(ui, ri)| EvalPair::new(model.calibrate(*ui), *ri))
        .collect()
}

/// Shortest round-trip decimal formatting, shared by every table writer so
/// reruns are byte-identical.
pub(crate) fn fmt(x: f64) -> String {
    x.to_string()
}
