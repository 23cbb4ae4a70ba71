//! Blob out-of-distribution study: clusters with one-hot targets, an OOD
//! cluster placed beyond the gap between the first two classes, optional
//! mixup training, and probe points along the between-class directions.

use std::path::Path;

use serde_json::json;

use super::config::{DatasetConfig, RunConfig};
use super::pipeline::{self, fmt};
use super::rundir::RunDir;
use super::Outcome;
use crate::data::{gen_blobs_ood, BlobParams};
use crate::error::{Error, Result};
use crate::metrics::{build_report, EvalPair};
use crate::train::{classification_accuracy, score_inputs};
use crate::util::mean;

/// Probe points sit on the between-class rays at this multiple of the
/// class-center radius, just beyond the data shell.
pub const PROBE_RADIUS_FACTOR: f64 = 1.3;

/// Between-class probe points: for every class pair, the unit bisector
/// direction scaled to `PROBE_RADIUS_FACTOR` times the center radius.
pub fn blob_probe_points(params: &BlobParams, input_dim: usize) -> Vec<Vec<f64>> {
    let centers = params.class_centers(input_dim);
    let mut probes = Vec::new();
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let sum: Vec<f64> = centers[i]
                .iter()
                .zip(&centers[j])
                .map(|(a, b)| a + b)
                .collect();
            let norm = crate::util::l2_norm(&sum);
            probes.push(
                sum.iter()
                    .map(|v| v / norm * params.spacing * PROBE_RADIUS_FACTOR)
                    .collect(),
            );
        }
    }
    probes
}

pub fn run_blob_ood(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let (n_id, n_ood, input_dim, params) = match &config.dataset {
        DatasetConfig::Blobs {
            n_id,
            n_ood,
            input_dim,
            params,
        } => (*n_id, *n_ood, *input_dim, *params),
        other => {
            return Err(Error::InvalidConfig(format!(
                "blob-ood needs a blobs dataset, got {other:?}"
            )))
        }
    };

    let (id_set, ood_set) = gen_blobs_ood(n_id, n_ood, input_dim, &params, config.seed)?;
    let (train_set, val_set, test_set) = id_set.split3(0.8, 0.1, pipeline::split_seed(config))?;

    let trained = pipeline::build_and_train(config, &train_set)?;
    let (calibration, _policy) = pipeline::fit_calibration(config, &trained.params, &val_set)?;
    let accuracy = classification_accuracy(&trained.params, &test_set)?;

    let (scored_id, u_id, r_id) = pipeline::score_labeled(&trained.params, &test_set)?;
    let scored_ood = score_inputs(&trained.params, ood_set.inputs())?;
    let u_ood: Vec<f64> = scored_ood.samples.iter().map(|s| s.uncertainty).collect();

    // metric pairs: ID test samples carry errors; OOD rows only rank
    let mut pairs: Vec<EvalPair> = u_id
        .iter()
        .zip(&r_id)
        .map(|(u, r)| EvalPair::with_ood(calibration.calibrate(*u), *r, false))
        .collect();
    pairs.extend(
        u_ood
            .iter()
            .map(|u| EvalPair::with_ood(calibration.calibrate(*u), 0.0, true)),
    );
    // coverage/correlation metrics come from the ID part only
    let id_pairs: Vec<EvalPair> = pairs[..u_id.len()].to_vec();
    let mut report = build_report(&id_pairs, config.calibration.bins)?;
    report.auroc = Some(crate::metrics::auroc(
        &pairs.iter().map(|p| p.u_cal).collect::<Vec<f64>>(),
        &pairs.iter().map(|p| p.ood.unwrap()).collect::<Vec<bool>>(),
    )?);
    report.fpr_at_95tpr = Some(crate::metrics::fpr_at_95tpr(
        &pairs.iter().map(|p| p.u_cal).collect::<Vec<f64>>(),
        &pairs.iter().map(|p| p.ood.unwrap()).collect::<Vec<bool>>(),
    )?);

    // mechanism probes: between-class rays vs class centers
    let probes = blob_probe_points(&params, input_dim);
    let centers = params.class_centers(input_dim);
    let u_probes: Vec<f64> = score_inputs(&trained.params, &probes)?
        .samples
        .iter()
        .map(|s| s.uncertainty)
        .collect();
    let u_centers: Vec<f64> = score_inputs(&trained.params, &centers)?
        .samples
        .iter()
        .map(|s| s.uncertainty)
        .collect();

    let mut outcome = Outcome::new();
    outcome.summary.insert(
        "auroc".into(),
        report.auroc.expect("set above"),
    );
    outcome.summary.insert(
        "fpr_at_95tpr".into(),
        report.fpr_at_95tpr.expect("set above"),
    );
    outcome
        .summary
        .insert("mean_u_probes".into(), mean(&u_probes));
    outcome
        .summary
        .insert("mean_u_centers".into(), mean(&u_centers));
    outcome.summary.insert("test_accuracy".into(), accuracy);
    outcome.summary.insert(
        "ood_separation".into(),
        params.ood_separation(input_dim),
    );
    outcome.summary.insert(
        "mixup_enabled".into(),
        if config.mixup.is_some() { 1.0 } else { 0.0 },
    );
    outcome
        .summary
        .insert("epochs_run".into(), trained.epochs_run as f64);
    outcome.reports.insert("id_vs_ood".into(), report);
    outcome.diagnostics.insert(
        "negative_magnitude_train".into(),
        trained.negative_magnitude_count,
    );
    outcome.diagnostics.insert(
        "negative_magnitude_score".into(),
        scored_id.negative_magnitude_count + scored_ood.negative_magnitude_count,
    );

    // score table: ID test rows then OOD rows
    let mut rows = Vec::with_capacity(test_set.len() + ood_set.len());
    for i in 0..test_set.len() {
        let s = &scored_id.samples[i];
        let mut row: Vec<String> = test_set.input(i).iter().map(|v| fmt(*v)).collect();
        row.extend([
            "0".to_string(),
            fmt(s.output.magnitude()),
            fmt(s.output.direction_norm()),
            fmt(u_id[i]),
            fmt(calibration.calibrate(u_id[i])),
            fmt(calibration.confidence_of(u_id[i])),
            fmt(r_id[i]),
        ]);
        rows.push(row);
    }
    for (i, s) in scored_ood.samples.iter().enumerate() {
        let mut row: Vec<String> = ood_set.input(i).iter().map(|v| fmt(*v)).collect();
        row.extend([
            "1".to_string(),
            fmt(s.output.magnitude()),
            fmt(s.output.direction_norm()),
            fmt(u_ood[i]),
            fmt(calibration.calibrate(u_ood[i])),
            fmt(calibration.confidence_of(u_ood[i])),
            String::new(),
        ]);
        rows.push(row);
    }
    let mut header: Vec<String> = (0..input_dim).map(|i| format!("x{i}")).collect();
    header.extend(
        ["is_ood", "r_hat", "d_norm", "u", "u_cal", "conf", "r"]
            .iter()
            .map(|s| s.to_string()),
    );
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();

    let probe_rows: Vec<Vec<String>> = u_probes
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let mut row: Vec<String> = probes[i].iter().map(|v| fmt(*v)).collect();
            row.push("probe".into());
            row.push(fmt(*u));
            row
        })
        .chain(u_centers.iter().enumerate().map(|(i, u)| {
            let mut row: Vec<String> = centers[i].iter().map(|v| fmt(*v)).collect();
            row.push("center".into());
            row.push(fmt(*u));
            row
        }))
        .collect();
    let mut probe_header: Vec<String> = (0..input_dim).map(|i| format!("x{i}")).collect();
    probe_header.extend(["kind".to_string(), "u".to_string()]);
    let probe_header_refs: Vec<&str> = probe_header.iter().map(|s| s.as_str()).collect();

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
    run.write_table("scores.csv", &header_refs, &rows)?;
    run.write_table("probes.csv", &probe_header_refs, &probe_rows)?;
    run.finish()?;

    Ok(outcome)
}
