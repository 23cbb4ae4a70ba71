//! Two-moons geometry study: where does the uncertainty score live relative
//! to the decision boundary?

use std::path::Path;

use serde_json::json;

use super::config::{DatasetConfig, RunConfig};
use super::pipeline::{self, fmt};
use super::rundir::RunDir;
use super::Outcome;
use crate::data::gen_two_moons;
use crate::error::{Error, Result};
use crate::metrics::{build_report, spearman_raw, EvalPair};
use crate::nn::NetworkParams;
use crate::train::{argmax, classification_accuracy};
use crate::util::median;

/// Grid resolution for the boundary scan.
const BOUNDARY_GRID: usize = 200;
/// Bounding-box padding fraction on each side.
const BOUNDARY_PAD: f64 = 0.2;
/// Samples with uncertainty above this are the "ambiguous" group.
pub const HIGH_U_THRESHOLD: f64 = 0.15;

pub fn run_two_moons(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let (n, noise_std) = match &config.dataset {
        DatasetConfig::TwoMoons { n, noise_std } => (*n, *noise_std),
        other => {
            return Err(Error::InvalidConfig(format!(
                "two-moons needs a two-moons dataset, got {other:?}"
            )))
        }
    };

    // The study is geometric: train on the full sample and inspect the
    // same points, so every score row has a boundary distance.
    let data = gen_two_moons(n, noise_std, config.seed)?;
    let trained = pipeline::build_and_train(config, &data)?;
    let accuracy = classification_accuracy(&trained.params, &data)?;

    let (scored, u, r) = pipeline::score_labeled(&trained.params, &data)?;
    let distances = boundary_distances(&trained.params, data.inputs())?;

    let spearman_u_distance = spearman_raw(&u, &distances)?;
    let high_u: Vec<usize> = (0..data.len())
        .filter(|&i| u[i] > HIGH_U_THRESHOLD)
        .collect();
    let median_all = median(&distances);
    let median_high_u = if high_u.is_empty() {
        f64::NAN
    } else {
        median(&high_u.iter().map(|&i| distances[i]).collect::<Vec<f64>>())
    };

    let pairs: Vec<EvalPair> = u
        .iter()
        .zip(&r)
        .map(|(ui, ri)| EvalPair::new(*ui, *ri))
        .collect();
    let report = build_report(&pairs, config.calibration.bins)?;

    let mut rows = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let s = &scored.samples[i];
        rows.push(vec![
            fmt(data.input(i)[0]),
            fmt(data.input(i)[1]),
            argmax(data.target(i)).to_string(),
            argmax(&s.prediction).to_string(),
            fmt(s.output.direction()[0]),
            fmt(s.output.direction()[1]),
            fmt(s.output.magnitude()),
            fmt(s.output.direction_norm()),
            fmt(s.uncertainty),
            fmt(distances[i]),
            fmt(r[i]),
        ]);
    }

    let mut outcome = Outcome::new();
    outcome.reports.insert("train".into(), report);
    outcome
        .summary
        .insert("spearman_u_boundary".into(), spearman_u_distance);
    outcome
        .summary
        .insert("median_distance_all".into(), median_all);
    outcome
        .summary
        .insert("median_distance_high_u".into(), median_high_u);
    outcome
        .summary
        .insert("high_u_count".into(), high_u.len() as f64);
    outcome.summary.insert("train_accuracy".into(), accuracy);
    outcome
        .summary
        .insert("epochs_run".into(), trained.epochs_run as f64);
    outcome.diagnostics.insert(
        "negative_magnitude_train".into(),
        trained.negative_magnitude_count,
    );

    let mut run = RunDir::create(out_dir)?;
    run.write_string("config.json", &config.to_json())?;
    run.write_string("params.json", &trained.params.to_json())?;
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
            "x0",
            "x1",
            "label",
            "pred_class",
            "d_hat0",
            "d_hat1",
            "r_hat",
            "d_norm",
            "u",
            "boundary_dist",
            "r",
        ],
        &rows,
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

/// Distance from every sample to the classifier's decision boundary,
/// located by a dense grid scan over the padded bounding box: a cell is a
/// boundary cell when the predicted class changes to its right or lower
/// neighbor, and each sample maps to its nearest boundary-cell center.
pub fn boundary_distances(params: &NetworkParams, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    if inputs.is_empty() || inputs[0].len() != 2 {
        return Err(Error::InvalidConfig(
            "boundary scan expects two-dimensional inputs".into(),
        ));
    }
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in inputs {
        lo_x = lo_x.min(p[0]);
        hi_x = hi_x.max(p[0]);
        lo_y = lo_y.min(p[1]);
        hi_y = hi_y.max(p[1]);
    }
    let pad_x = BOUNDARY_PAD * (hi_x - lo_x);
    let pad_y = BOUNDARY_PAD * (hi_y - lo_y);
    lo_x -= pad_x;
    hi_x += pad_x;
    lo_y -= pad_y;
    hi_y += pad_y;

    let coord = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (BOUNDARY_GRID - 1) as f64;
    let mut classes = vec![0usize; BOUNDARY_GRID * BOUNDARY_GRID];
    for ix in 0..BOUNDARY_GRID {
        for iy in 0..BOUNDARY_GRID {
            let x = vec![coord(lo_x, hi_x, ix), coord(lo_y, hi_y, iy)];
            let trace = params.forward(&x)?;
            let out = crate::head::HcmOutput::from_raw_output(trace.output())?;
            classes[ix * BOUNDARY_GRID + iy] = argmax(&out.recompose());
        }
    }

    let mut boundary = Vec::new();
    for ix in 0..BOUNDARY_GRID {
        for iy in 0..BOUNDARY_GRID {
            let c = classes[ix * BOUNDARY_GRID + iy];
            let right = ix + 1 < BOUNDARY_GRID && classes[(ix + 1) * BOUNDARY_GRID + iy] != c;
            let down = iy + 1 < BOUNDARY_GRID && classes[ix * BOUNDARY_GRID + iy + 1] != c;
            if right || down {
                boundary.push((coord(lo_x, hi_x, ix), coord(lo_y, hi_y, iy)));
            }
        }
    }
    if boundary.is_empty() {
        return Err(Error::DegenerateClassifier);
    }

    Ok(inputs
        .iter()
        .map(|p| {
            boundary
                .iter()
                .map(|(bx, by)| ((p[0] - bx).powi(2) + (p[1] - by).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

