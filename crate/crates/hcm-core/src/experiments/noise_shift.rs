//! Input-noise shift study: calibrate on clean validation data, then watch
//! confidence and the uncertainty-error relation respond to test-time input
//! perturbation.

use std::path::Path;

use serde_json::json;

use super::config::{DatasetConfig, RunConfig};
use super::pipeline::{self, fmt};
use super::rundir::RunDir;
use super::Outcome;
use crate::calibrate::CalibrationModel;
use crate::data::{gen_blobs, gen_cubic_with_noise, perturb_inputs, LabeledSet};
use crate::error::{Error, Result};
use crate::metrics::{build_report, spearman_raw};
use crate::train::ScoredSet;
use crate::util::{derive_seed, mean};

/// Confidence-curve bin count (equal-width bins over [0, 1]).
const CURVE_BINS: usize = 10;

pub fn run_noise_shift(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let a_max = config.perturb_a_max.ok_or_else(|| {
        Error::InvalidConfig("noise-shift needs perturb_a_max in the config".into())
    })?;

    // Any regression set works; the defaults use the blob clusters as a
    // multivariate regression onto one-hot targets (classification is
    // treated as regression throughout).
    let data = match &config.dataset {
        DatasetConfig::Blobs {
            n_id,
            input_dim,
            params,
            ..
        } => gen_blobs(*n_id, *input_dim, params, config.seed)?,
        DatasetConfig::Cubic { n, noise } => {
            gen_cubic_with_noise(*n, *noise, config.seed)?.embed_scalar_targets()?
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "noise-shift needs a blobs or cubic dataset, got {other:?}"
            )))
        }
    };

    let (train_set, val_set, test_set) = data.split3(0.8, 0.1, pipeline::split_seed(config))?;
    let trained = pipeline::build_and_train(config, &train_set)?;
    let (calibration, _policy) = pipeline::fit_calibration(config, &trained.params, &val_set)?;

    let perturbed_set = perturb_inputs(
        &test_set,
        a_max,
        derive_seed(config.seed, pipeline::STREAM_PERTURB),
    )?;

    let (scored_clean, u_clean, r_clean) = pipeline::score_labeled(&trained.params, &test_set)?;
    let (scored_pert, u_pert, r_pert) =
        pipeline::score_labeled(&trained.params, &perturbed_set)?;

    let clean_pairs = pipeline::eval_pairs(&calibration, &u_clean, &r_clean);
    let pert_pairs = pipeline::eval_pairs(&calibration, &u_pert, &r_pert);
    let report_clean = build_report(&clean_pairs, config.calibration.bins)?;
    let report_pert = build_report(&pert_pairs, config.calibration.bins)?;

    let conf_clean: Vec<f64> = u_clean
        .iter()
        .map(|u| calibration.confidence_of(*u))
        .collect();
    let conf_pert: Vec<f64> = u_pert
        .iter()
        .map(|u| calibration.confidence_of(*u))
        .collect();

    // confidence bin -> mean error curve on the perturbed split
    let (curve_rows, curve_conf, curve_err) = confidence_curve(&conf_pert, &r_pert);
    let curve_spearman = if curve_conf.len() >= 2 {
        spearman_raw(&curve_conf, &curve_err)?
    } else {
        f64::NAN
    };

    let mut outcome = Outcome::new();
    outcome.reports.insert("clean".into(), report_clean.clone());
    outcome.reports.insert("perturbed".into(), report_pert.clone());
    outcome
        .summary
        .insert("mean_confidence_clean".into(), mean(&conf_clean));
    outcome
        .summary
        .insert("mean_confidence_perturbed".into(), mean(&conf_pert));
    outcome
        .summary
        .insert("pearson_clean".into(), report_clean.pearson);
    outcome
        .summary
        .insert("pearson_perturbed".into(), report_pert.pearson);
    outcome
        .summary
        .insert("curve_spearman".into(), curve_spearman);
    outcome
        .summary
        .insert("curve_nonempty_bins".into(), curve_conf.len() as f64);
    outcome
        .summary
        .insert("temperature".into(), calibration.temperature);
    outcome
        .summary
        .insert("epochs_run".into(), trained.epochs_run as f64);
    outcome.diagnostics.insert(
        "negative_magnitude_train".into(),
        trained.negative_magnitude_count,
    );
    outcome.diagnostics.insert(
        "negative_magnitude_score".into(),
        scored_clean.negative_magnitude_count + scored_pert.negative_magnitude_count,
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
    let header = score_header(&test_set);
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    run.write_table(
        "scores.csv",
        &header_refs,
        &score_rows(&perturbed_set, &scored_pert, &u_pert, &r_pert, &calibration),
    )?;
    run.write_table(
        "scores_clean.csv",
        &header_refs,
        &score_rows(&test_set, &scored_clean, &u_clean, &r_clean, &calibration),
    )?;
    run.write_table(
        "calibration-curve.csv",
        &["bin_lo", "bin_hi", "count", "mean_conf", "mean_r"],
        &curve_rows,
    )?;
    run.finish()?;

    Ok(outcome)
}

fn score_header(set: &LabeledSet) -> Vec<String> {
    let mut header: Vec<String> = (0..set.input_dim()).map(|i| format!("x{i}")).collect();
    header.extend(
        ["r_hat", "d_norm", "u", "u_cal", "conf", "conf_norm", "r"]
            .iter()
            .map(|s| s.to_string()),
    );
    header
}

fn score_rows(
    set: &LabeledSet,
    scored: &ScoredSet,
    u: &[f64],
    r: &[f64],
    calibration: &CalibrationModel,
) -> Vec<Vec<String>> {
    (0..set.len())
        .map(|i| {
            let s = &scored.samples[i];
            let mut row: Vec<String> = set.input(i).iter().map(|v| fmt(*v)).collect();
            let conf = calibration.confidence_of(u[i]);
            row.extend([
                fmt(s.output.magnitude()),
                fmt(s.output.direction_norm()),
                fmt(u[i]),
                fmt(calibration.calibrate(u[i])),
                fmt(conf),
                fmt(calibration.normalize(conf)),
                fmt(r[i]),
            ]);
            row
        })
        .collect()
}

/// Equal-width confidence bins over [0, 1]; returns the table rows plus the
/// per-bin mean confidence and mean error for nonempty bins.
fn confidence_curve(conf: &[f64], r: &[f64]) -> (Vec<Vec<String>>, Vec<f64>, Vec<f64>) {
    let mut count = [0usize; CURVE_BINS];
    let mut sum_conf = [0.0; CURVE_BINS];
    let mut sum_r = [0.0; CURVE_BINS];
    for (c, err) in conf.iter().zip(r) {
        let b = ((c * CURVE_BINS as f64) as usize).min(CURVE_BINS - 1);
        count[b] += 1;
        sum_conf[b] += c;
        sum_r[b] += err;
    }
    let mut rows = Vec::with_capacity(CURVE_BINS);
    let mut mean_conf = Vec::new();
    let mut mean_r = Vec::new();
    for b in 0..CURVE_BINS {
        let lo = b as f64 / CURVE_BINS as f64;
        let hi = (b + 1) as f64 / CURVE_BINS as f64;
        if count[b] > 0 {
            let mc = sum_conf[b] / count[b] as f64;
            let mr = sum_r[b] / count[b] as f64;
            mean_conf.push(mc);
            mean_r.push(mr);
            rows.push(vec![
                fmt(lo),
                fmt(hi),
                count[b].to_string(),
                fmt(mc),
                fmt(mr),
            ]);
        } else {
            rows.push(vec![fmt(lo), fmt(hi), "0".into(), String::new(), String::new()]);
        }
    }
    (rows, mean_conf, mean_r)
}
