//! Cubic toy study: heteroscedastic noise on a known curve, so the variance
//! surrogate can be compared against the generating noise level, and the
//! region beyond the training domain probes the score's growth off-data.

use std::path::Path;

use serde_json::json;

use super::config::{DatasetConfig, RunConfig};
use super::pipeline::{self, fmt};
use super::rundir::RunDir;
use super::Outcome;
use crate::data::{gen_cubic_with_noise, NoiseProfile, CUBIC_NOISE};
use crate::error::{Error, Result};
use crate::head::scalar_readback;
use crate::metrics::build_report;
use crate::train::score_inputs;
use crate::util::mean;

/// Dense evaluation grid for the band table.
const GRID_LO: f64 = -6.0;
const GRID_HI: f64 = 6.0;
const GRID_STEP: f64 = 0.02;

pub fn run_toy1d(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let (n, noise) = match &config.dataset {
        DatasetConfig::Cubic { n, noise } => (*n, *noise),
        other => {
            return Err(Error::InvalidConfig(format!(
                "toy1d needs a cubic dataset, got {other:?}"
            )))
        }
    };

    let raw = gen_cubic_with_noise(n, noise, config.seed)?;
    let embedded = raw.embed_scalar_targets()?;
    let (train_set, val_set, test_set) =
        embedded.split3(0.8, 0.1, pipeline::split_seed(config))?;

    let trained = pipeline::build_and_train(config, &train_set)?;
    let (calibration, _policy) = pipeline::fit_calibration(config, &trained.params, &val_set)?;

    // per-sample score table on the test split
    let (scored_test, u_test, r_test) = pipeline::score_labeled(&trained.params, &test_set)?;
    let mut rows = Vec::with_capacity(test_set.len());
    for (i, s) in scored_test.samples.iter().enumerate() {
        rows.push(vec![
            fmt(test_set.input(i)[0]),
            fmt(test_set.target(i)[0]),
            fmt(test_set.target(i)[1]),
            fmt(s.prediction[0]),
            fmt(s.prediction[1]),
            fmt(s.output.magnitude()),
            fmt(s.output.direction_norm()),
            fmt(s.uncertainty),
            fmt(calibration.calibrate(s.uncertainty)),
            fmt(calibration.confidence_of(s.uncertainty)),
            fmt(r_test[i]),
        ]);
    }

    // band table on a dense grid
    let grid_len = ((GRID_HI - GRID_LO) / GRID_STEP).round() as usize + 1;
    let grid: Vec<f64> = (0..grid_len).map(|i| GRID_LO + GRID_STEP * i as f64).collect();
    let grid_inputs: Vec<Vec<f64>> = grid.iter().map(|x| vec![*x]).collect();
    let scored_grid = score_inputs(&trained.params, &grid_inputs)?;
    let sigma_hat: Vec<f64> = scored_grid.samples.iter().map(|s| s.sigma_sq.sqrt()).collect();
    let sigma_true: Vec<f64> = grid.iter().map(|x| noise.sigma_at(*x)).collect();
    let band_rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            vec![
                fmt(grid[i]),
                fmt(scalar_readback(&scored_grid.samples[i].prediction)),
                fmt(sigma_hat[i]),
                fmt(sigma_true[i]),
            ]
        })
        .collect();

    // noise tracking: correlation of sigma_hat with the generating sigma on
    // the noisy interval; band growth beyond the training domain
    let noisy_range = match noise {
        NoiseProfile::PiecewiseLinearGaussian { x_lo, x_hi, .. } => (x_lo, x_hi),
        _ => {
            let d = CUBIC_NOISE;
            match d {
                NoiseProfile::PiecewiseLinearGaussian { x_lo, x_hi, .. } => (x_lo, x_hi),
                _ => unreachable!(),
            }
        }
    };
    let in_noisy: Vec<usize> = (0..grid.len())
        .filter(|&i| grid[i] >= noisy_range.0 && grid[i] <= noisy_range.1)
        .collect();
    let sigma_tracking = if matches!(noise, NoiseProfile::PiecewiseLinearGaussian { .. }) {
        let a: Vec<f64> = in_noisy.iter().map(|&i| sigma_hat[i]).collect();
        let b: Vec<f64> = in_noisy.iter().map(|&i| sigma_true[i]).collect();
        pearson_slice(&a, &b)?
    } else {
        f64::NAN
    };
    let band = |lo: f64, hi: f64| -> f64 {
        let vals: Vec<f64> = (0..grid.len())
            .filter(|&i| grid[i] >= lo && grid[i] <= hi)
            .map(|i| sigma_hat[i])
            .collect();
        mean(&vals)
    };
    let sigma_beyond_domain = band(5.0, 6.0);
    let sigma_noise_free = band(3.0, 4.0);
    let mean_u_in_domain = {
        let vals: Vec<f64> = (0..grid.len())
            .filter(|&i| grid[i] >= -4.0 && grid[i] <= 4.0)
            .map(|i| scored_grid.samples[i].uncertainty)
            .collect();
        mean(&vals)
    };
    let mean_abs_y_in_domain = {
        let vals: Vec<f64> = grid
            .iter()
            .filter(|x| (-4.0..=4.0).contains(*x))
            .map(|x| x.powi(3).abs())
            .collect();
        mean(&vals)
    };

    let pairs = pipeline::eval_pairs(&calibration, &u_test, &r_test);
    let report = build_report(&pairs, config.calibration.bins)?;

    let mut outcome = Outcome::new();
    outcome.reports.insert("test".into(), report);
    outcome
        .summary
        .insert("sigma_tracking_pearson".into(), sigma_tracking);
    outcome
        .summary
        .insert("mean_sigma_beyond_domain".into(), sigma_beyond_domain);
    outcome
        .summary
        .insert("mean_sigma_noise_free".into(), sigma_noise_free);
    outcome
        .summary
        .insert("mean_u_in_domain".into(), mean_u_in_domain);
    outcome
        .summary
        .insert("mean_abs_y_in_domain".into(), mean_abs_y_in_domain);
    outcome
        .summary
        .insert("epochs_run".into(), trained.epochs_run as f64);
    outcome.summary.insert(
        "final_loss".into(),
        *trained.epoch_losses.last().expect("at least one epoch"),
    );
    outcome.diagnostics.insert(
        "negative_magnitude_train".into(),
        trained.negative_magnitude_count,
    );
    outcome.diagnostics.insert(
        "negative_magnitude_score".into(),
        scored_test.negative_magnitude_count,
    );

    let mut run = RunDir::create(out_dir)?;
    run.write_string("config.json", &config.to_json())?;
    run.write_string("params.json", &trained.params.to_json())?;
    run.write_json("calibration.json", &calibration)?;
    run.write_json(
        "metrics.json",
        &json!({
            "reports": outcome.reports,
            "summary": outcome.summary,
            "diagnostics": outcome.diagnostics,
        }),
    )?;
    run.write_table(
        "scores.csv",
        &[
            "x0", "y0", "y1", "y_hat0", "y_hat1", "r_hat", "d_norm", "u", "u_cal", "conf", "r",
        ],
        &rows,
    )?;
    run.write_table(
        "bands.csv",
        &["x", "y_hat", "sigma_hat", "sigma_true"],
        &band_rows,
    )?;
    let loss_rows: Vec<Vec<String>> = trained
        .epoch_losses
        .iter()
        .enumerate()
        .map(|(e, l)| vec![e.to_string(), fmt(*l)])
        .collect();
    run.write_table("training_loss.csv", &["epoch", "mean_loss"], &loss_rows)?;
    run.finish()?;

    Ok(outcome)
}

fn pearson_slice(a: &[f64], b: &[f64]) -> Result<f64> {
    let pairs: Vec<crate::metrics::EvalPair> = a
        .iter()
        .zip(b)
        .map(|(x, y)| crate::metrics::EvalPair::new(*x, *y))
        .collect();
    crate::metrics::pearson(&pairs)
}
