//! Cross-module behavior of the experiment runners on their default (or
//! slightly reduced) configurations.

use hcm_core::calibrate::{fit_threshold, CalibrationModel, ThresholdKind};
use hcm_core::data::{gen_cubic_with_noise, NoiseProfile};
use hcm_core::error::Error;
use hcm_core::experiments::{
    boundary_distances, run_noise_shift, run_toy1d, ExperimentKind, RunConfig,
};
use hcm_core::head::{error_lower_bound, HcmOutput, TargetDecomposition};
use hcm_core::metrics::{build_report, EvalPair};
use hcm_core::nn::{Activation, Layer, NetworkParams};

#[test]
fn noise_shift_confidence_and_curve_respond_to_perturbation() {
    // Default config: calibrate on clean validation data, evaluate on a
    // perturbed test split.
    let config = RunConfig::default_for(ExperimentKind::NoiseShift);
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_noise_shift(&config, dir.path()).unwrap();

    // injected input noise must push mean confidence down
    let conf_clean = outcome.summary_value("mean_confidence_clean");
    let conf_pert = outcome.summary_value("mean_confidence_perturbed");
    assert!(
        conf_pert < conf_clean,
        "confidence did not drop: {conf_pert} vs {conf_clean}"
    );

    // the confidence-vs-error curve decreases across a spread of bins
    let bins = outcome.summary_value("curve_nonempty_bins");
    let curve = outcome.summary_value("curve_spearman");
    assert!(bins >= 8.0, "only {bins} nonempty confidence bins");
    assert!(curve <= -0.7, "curve Spearman {curve}");

    // the uncertainty-error alignment strengthens under perturbation
    let p_clean = outcome.summary_value("pearson_clean");
    let p_pert = outcome.summary_value("pearson_perturbed");
    assert!(
        p_pert > p_clean,
        "perturbed Pearson {p_pert} did not exceed clean {p_clean}"
    );

    // artifacts present
    for file in [
        "scores.csv",
        "scores_clean.csv",
        "calibration-curve.csv",
        "metrics.json",
        "manifest.json",
    ] {
        assert!(dir.path().join(file).is_file(), "missing {file}");
    }
}

#[test]
fn toy1d_zero_noise_run_has_small_uncertainty() {
    // Converged run on noise-free data: mean in-domain uncertainty below
    // 10% of the mean absolute target.
    let mut config = RunConfig::default_for(ExperimentKind::Toy1d);
    config.dataset = hcm_core::experiments::DatasetConfig::Cubic {
        n: 2000,
        noise: NoiseProfile::None,
    };
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_toy1d(&config, dir.path()).unwrap();
    let mean_u = outcome.summary_value("mean_u_in_domain");
    let mean_abs_y = outcome.summary_value("mean_abs_y_in_domain");
    assert!(
        mean_u < 0.1 * mean_abs_y,
        "mean u {mean_u} not below 10% of mean |y| {mean_abs_y}"
    );
}

#[test]
fn toy1d_metrics_are_recomputable_from_the_score_table() {
    let mut config = RunConfig::default_for(ExperimentKind::Toy1d);
    config.epochs = 120;
    config.dataset = hcm_core::experiments::DatasetConfig::Cubic {
        n: 600,
        noise: hcm_core::data::CUBIC_NOISE,
    };
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_toy1d(&config, dir.path()).unwrap();

    let text = std::fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (u_cal_idx, r_idx) = (col("u_cal"), col("r"));
    let pairs: Vec<EvalPair> = lines
        .map(|line| {
            let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            EvalPair::new(fields[u_cal_idx], fields[r_idx])
        })
        .collect();
    let recomputed = build_report(&pairs, config.calibration.bins).unwrap();
    let stored = &outcome.reports["test"];
    for (a, b) in [
        (recomputed.cov_1s, stored.cov_1s),
        (recomputed.cov_2s, stored.cov_2s),
        (recomputed.cov_3s, stored.cov_3s),
        (recomputed.ece_reg, stored.ece_reg),
        (recomputed.pearson, stored.pearson),
        (recomputed.spearman, stored.spearman),
        (recomputed.rmse, stored.rmse),
    ] {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn flagged_samples_obey_the_error_lower_bound() {
    // Tolerance-threshold semantics on trained outputs: for any flagged
    // sample with a defined epsilon below one, the true (embedded-space)
    // error necessarily exceeds eps * (1 - epsilon).
    let mut config = RunConfig::default_for(ExperimentKind::Toy1d);
    config.epochs = 150;
    config.dataset = hcm_core::experiments::DatasetConfig::Cubic {
        n: 600,
        noise: hcm_core::data::CUBIC_NOISE,
    };
    let data = gen_cubic_with_noise(600, hcm_core::data::CUBIC_NOISE, config.seed)
        .unwrap()
        .embed_scalar_targets()
        .unwrap();
    let specs = hcm_core::nn::head_specs(1, &config.network.hidden, Activation::Relu, 3).unwrap();
    let params = NetworkParams::init(&specs, 9).unwrap();
    let trained = hcm_core::train::train(
        params,
        &data,
        &hcm_core::train::TrainConfig {
            loss: config.loss,
            optimizer: config.optimizer,
            epochs: config.epochs,
            batch_size: config.batch_size,
            seed: 11,
            mixup: None,
            stop_at_train_accuracy: None,
        },
    )
    .unwrap();

    let eps = 2.0;
    let policy = fit_threshold(ThresholdKind::Tolerance { eps }, &[]).unwrap();
    let mut flagged = 0;
    for i in 0..data.len() {
        let trace = trained.params.forward(data.input(i)).unwrap();
        let out = HcmOutput::from_raw_output(trace.output()).unwrap();
        let u = out.uncertainty_score();
        if !policy.flag(u) {
            continue;
        }
        let target = TargetDecomposition::decompose(data.target(i)).unwrap();
        let report = error_lower_bound(&target, &out).unwrap();
        if let Some(ratio) = report.epsilon {
            if ratio < 1.0 {
                flagged += 1;
                assert!(
                    report.error_norm >= eps * (1.0 - ratio) - 1e-12,
                    "flagged sample {i}: error {} below {}",
                    report.error_norm,
                    eps * (1.0 - ratio)
                );
            }
        }
    }
    assert!(flagged > 0, "tolerance threshold flagged nothing");
}

#[test]
fn degenerate_classifier_is_reported() {
    // All-zero weights predict one class everywhere: no decision boundary.
    let zero = NetworkParams {
        layers: vec![Layer {
            input_width: 2,
            output_width: 3,
            activation: Activation::Identity,
            weights: vec![0.0; 6],
            bias: vec![0.0; 3],
        }],
        seed: 0,
    };
    let inputs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, -(i as f64)]).collect();
    let err = boundary_distances(&zero, &inputs).unwrap_err();
    assert!(matches!(err, Error::DegenerateClassifier));
}

#[test]
fn calibration_model_rescoring_round_trip() {
    // A run's calibration.json reproduces the u_cal/conf columns of its
    // score table without refitting.
    let mut config = RunConfig::default_for(ExperimentKind::Toy1d);
    config.epochs = 80;
    config.dataset = hcm_core::experiments::DatasetConfig::Cubic {
        n: 400,
        noise: hcm_core::data::CUBIC_NOISE,
    };
    let dir = tempfile::tempdir().unwrap();
    run_toy1d(&config, dir.path()).unwrap();

    let model: CalibrationModel = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("calibration.json")).unwrap(),
    )
    .unwrap();
    let text = std::fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for line in lines {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let u = fields[col("u")];
        assert!((model.calibrate(u) - fields[col("u_cal")]).abs() <= 1e-12);
        assert!((model.confidence_of(u) - fields[col("conf")]).abs() <= 1e-12);
    }
}
