//! Norm-penalty weight ablation: retrain the same configuration for each
//! lambda and tabulate validation error, mean uncertainty, and a stability
//! flag. Divergence is data, not an error.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::config::{DatasetConfig, RunConfig};
use super::pipeline::{self, fmt};
use super::rundir::RunDir;
use super::Outcome;
use crate::data::gen_cubic_with_noise;
use crate::error::{Error, Result};
use crate::util::{mean, median};

/// A lambda is flagged stable when losses stayed finite and the median
/// direction-norm deviation on validation stays below this bound.
pub const STABLE_NORM_DEVIATION: f64 = 0.5;

/// One row of the sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// Mean per-sample RMSE on the validation split (NaN when diverged).
    pub val_error: f64,
    /// Mean raw uncertainty on the validation split (NaN when diverged).
    pub mean_u: f64,
    /// Median `| ||d_hat|| - 1 |` on validation (NaN when diverged).
    pub median_norm_deviation: f64,
    pub stable: bool,
    pub epochs_run: usize,
}

pub fn run_lambda_sweep(config: &RunConfig, out_dir: &Path) -> Result<(Outcome, Vec<SweepRow>)> {
    let lambdas = config
        .lambdas
        .clone()
        .ok_or_else(|| Error::InvalidConfig("lambda-sweep needs a lambdas list".into()))?;
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("lambdas list is empty".into()));
    }

    let data = match &config.dataset {
        DatasetConfig::Cubic { n, noise } => {
            gen_cubic_with_noise(*n, *noise, config.seed)?.embed_scalar_targets()?
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "lambda-sweep needs a cubic dataset, got {other:?}"
            )))
        }
    };
    let (train_set, val_set, _test) = data.split3(0.8, 0.1, pipeline::split_seed(config))?;

    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let mut cell = config.clone();
        cell.loss.lambda_norm = lambda;
        match pipeline::build_and_train(&cell, &train_set) {
            Ok(trained) => {
                let (scored, u, r) = pipeline::score_labeled(&trained.params, &val_set)?;
                let deviations: Vec<f64> = scored
                    .samples
                    .iter()
                    .map(|s| (s.output.direction_norm() - 1.0).abs())
                    .collect();
                let med_dev = median(&deviations);
                let finite = trained.epoch_losses.iter().all(|l| l.is_finite());
                rows.push(SweepRow {
                    lambda,
                    val_error: mean(&r),
                    mean_u: mean(&u),
                    median_norm_deviation: med_dev,
                    stable: finite && med_dev < STABLE_NORM_DEVIATION,
                    epochs_run: trained.epochs_run,
                });
            }
            Err(crate::error::Error::TrainingDiverged { .. }) => {
                rows.push(SweepRow {
                    lambda,
                    val_error: f64::NAN,
                    mean_u: f64::NAN,
                    median_norm_deviation: f64::NAN,
                    stable: false,
                    epochs_run: 0,
                });
            }
            Err(other) => return Err(other),
        }
    }

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            vec![
                fmt(row.lambda),
                if row.val_error.is_nan() {
                    String::new()
                } else {
                    fmt(row.val_error)
                },
                if row.mean_u.is_nan() {
                    String::new()
                } else {
                    fmt(row.mean_u)
                },
                if row.median_norm_deviation.is_nan() {
                    String::new()
                } else {
                    fmt(row.median_norm_deviation)
                },
                row.stable.to_string(),
                row.epochs_run.to_string(),
            ]
        })
        .collect();

    let mut outcome = Outcome::new();
    outcome
        .summary
        .insert("lambda_count".into(), rows.len() as f64);
    outcome.summary.insert(
        "stable_count".into(),
        rows.iter().filter(|r| r.stable).count() as f64,
    );
    if let Some(zero_row) = rows.iter().find(|r| r.lambda == 0.0) {
        outcome.summary.insert(
            "lambda_zero_stable".into(),
            if zero_row.stable { 1.0 } else { 0.0 },
        );
        outcome
            .summary
            .insert("lambda_zero_val_error".into(), zero_row.val_error);
    }

    let mut run = RunDir::create(out_dir)?;
    run.write_string("config.json", &config.to_json())?;
    run.write_json(
        "metrics.json",
        &json!({
            "summary": outcome.summary,
            "rows": rows,
        }),
    )?;
    run.write_table(
        "sweep.csv",
        &[
            "lambda",
            "val_error",
            "mean_u",
            "median_norm_deviation",
            "stable",
            "epochs_run",
        ],
        &table,
    )?;
    run.finish()?;

    Ok((outcome, rows))
}
