//! Subcommand implementations.

use std::path::Path;

use hcm_core::calibrate::{confidence, fit_minmax, fit_quantile, fit_temperature, CalibrationModel};
use hcm_core::data::{csv_read, gen_blobs, gen_cubic_with_noise, gen_two_moons, LabeledSet};
use hcm_core::error::{Error, Result};
use hcm_core::experiments::{run_experiment, DatasetConfig, ExperimentKind, RunConfig};
use hcm_core::metrics::{build_report, EvalPair, MetricsReport};
use hcm_core::nn::{head_specs, NetworkParams};
use hcm_core::train::{per_sample_rmse, score_inputs, train, TrainConfig};
use hcm_core::util::derive_seed;

use crate::table::Table;
use crate::Verbosity;

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("cannot open {}", path.display()),
            ))
        } else {
            Error::Io(e)
        }
    })?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    Ok(config)
}

/// Materializes the config's dataset with targets ready for the head
/// (scalars embedded).
fn load_dataset(config: &RunConfig) -> Result<LabeledSet> {
    let set = match &config.dataset {
        DatasetConfig::Cubic { n, noise } => {
            gen_cubic_with_noise(*n, *noise, config.seed)?.embed_scalar_targets()?
        }
        DatasetConfig::TwoMoons { n, noise_std } => gen_two_moons(*n, *noise_std, config.seed)?,
        DatasetConfig::Blobs {
            n_id,
            input_dim,
            params,
            ..
        } => gen_blobs(*n_id, *input_dim, params, config.seed)?,
        DatasetConfig::Csv { path } => {
            let raw = csv_read(Path::new(path))?;
            if raw.target_dim() == 1 {
                raw.embed_scalar_targets()?
            } else if raw.target_dim() >= 2 {
                raw
            } else {
                return Err(Error::InvalidConfig(format!(
                    "dataset {path} has no target columns"
                )));
            }
        }
    };
    Ok(set)
}

pub fn cmd_train(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    verbosity: Verbosity,
) -> Result<()> {
    let config = load_config(config_path, seed)?;
    let data = load_dataset(&config)?;
    verbosity.detail(format!(
        "dataset: {} samples, {} -> {}",
        data.len(),
        data.input_dim(),
        data.target_dim()
    ));
    let specs = head_specs(
        data.input_dim(),
        &config.network.hidden,
        config.network.activation,
        data.target_dim() + 1,
    )?;
    let params = NetworkParams::init(&specs, derive_seed(config.seed, 1))?;
    let train_config = TrainConfig {
        loss: config.loss,
        optimizer: config.optimizer,
        epochs: config.epochs,
        batch_size: config.batch_size,
        seed: derive_seed(config.seed, 2),
        mixup: config.mixup,
        stop_at_train_accuracy: config.stop_at_train_accuracy,
    };
    let result = train(params, &data, &train_config)?;
    verbosity.info(format!(
        "trained {} epochs, final loss {:.6}",
        result.epochs_run,
        result.epoch_losses.last().unwrap()
    ));

    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("params.json"), result.params.to_json())?;
    let mut writer = csv::Writer::from_path(out.join("training_loss.csv"))?;
    writer.write_record(["epoch", "mean_loss"])?;
    for (epoch, loss) in result.epoch_losses.iter().enumerate() {
        writer.write_record([epoch.to_string(), loss.to_string()])?;
    }
    writer.flush()?;
    verbosity.info(format!("wrote {}", out.join("params.json").display()));
    Ok(())
}

pub fn cmd_score(
    params_path: &Path,
    data_path: &Path,
    out: &Path,
    verbosity: Verbosity,
) -> Result<()> {
    let params_text = std::fs::read_to_string(params_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("cannot open {}", params_path.display()),
            ))
        } else {
            Error::Io(e)
        }
    })?;
    let params = NetworkParams::from_json(&params_text)?;
    let raw = csv_read(data_path)?;

    if raw.input_dim() != params.input_width() {
        return Err(Error::DimensionMismatch {
            context: "checkpoint input width vs data".into(),
            expected: params.input_width(),
            found: raw.input_dim(),
        });
    }
    // targets: absent, direct, or scalar needing the duplication embedding
    let prediction_dim = params.output_width() - 1;
    let data = if raw.target_dim() == 1 && prediction_dim == 2 {
        raw.embed_scalar_targets()?
    } else if raw.target_dim() == 0 || raw.target_dim() == prediction_dim {
        raw
    } else {
        return Err(Error::DimensionMismatch {
            context: "checkpoint prediction width vs data targets".into(),
            expected: prediction_dim,
            found: raw.target_dim(),
        });
    };
    let has_targets = data.target_dim() > 0;

    let scored = score_inputs(&params, data.inputs())?;
    std::fs::create_dir_all(out)?;
    let mut writer = csv::Writer::from_path(out.join("scores.csv"))?;
    let mut header: Vec<String> = (0..data.input_dim()).map(|i| format!("x{i}")).collect();
    for i in 0..prediction_dim {
        header.push(format!("y_hat{i}"));
    }
    header.extend(["r_hat".into(), "d_norm".into(), "u".into()]);
    if has_targets {
        header.push("r".into());
    }
    writer.write_record(&header)?;
    for i in 0..data.len() {
        let s = &scored.samples[i];
        let mut record: Vec<String> = data.input(i).iter().map(|v| v.to_string()).collect();
        record.extend(s.prediction.iter().map(|v| v.to_string()));
        record.push(s.output.magnitude().to_string());
        record.push(s.output.direction_norm().to_string());
        record.push(s.uncertainty.to_string());
        if has_targets {
            record.push(per_sample_rmse(&s.prediction, data.target(i)).to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    verbosity.info(format!(
        "scored {} rows ({} negative magnitudes) -> {}",
        data.len(),
        scored.negative_magnitude_count,
        out.join("scores.csv").display()
    ));
    Ok(())
}

pub fn cmd_calibrate(
    scores_path: &Path,
    out: &Path,
    normalizer: &str,
    verbosity: Verbosity,
) -> Result<()> {
    let table = Table::read(scores_path)?;
    let u = table.numeric_column("u")?;
    let r = table.numeric_column("r")?;
    let temperature = fit_temperature(&u, &r)?;
    let confidences: Vec<f64> = u.iter().map(|ui| confidence(*ui, temperature)).collect();
    let normalizer = match normalizer {
        "quantile" => fit_quantile(&confidences)?,
        _ => fit_minmax(&confidences)?,
    };
    let model = CalibrationModel {
        temperature,
        normalizer,
    };

    std::fs::create_dir_all(out)?;
    let mut json = serde_json::to_string_pretty(&model)?;
    json.push('\n');
    std::fs::write(out.join("calibration.json"), json)?;

    let mut writer = csv::Writer::from_path(out.join("calibrated.csv"))?;
    let mut header = table.header.clone();
    header.extend(["u_cal".into(), "conf".into(), "conf_norm".into()]);
    writer.write_record(&header)?;
    for (row, ui) in table.rows.iter().zip(&u) {
        let mut record = row.clone();
        let conf = model.confidence_of(*ui);
        record.push(model.calibrate(*ui).to_string());
        record.push(conf.to_string());
        record.push(model.normalize(conf).to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    verbosity.info(format!(
        "fitted temperature {temperature} -> {}",
        out.join("calibration.json").display()
    ));
    Ok(())
}

pub fn cmd_eval(
    scores_path: &Path,
    calibration_path: &Path,
    out: &Path,
    bins: usize,
    verbosity: Verbosity,
) -> Result<()> {
    let table = Table::read(scores_path)?;
    let u = table.numeric_column("u")?;
    let r = table.numeric_column("r")?;
    let ood = table.flag_column("is_ood")?;
    let text = std::fs::read_to_string(calibration_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("cannot open {}", calibration_path.display()),
            ))
        } else {
            Error::Io(e)
        }
    })?;
    let model: CalibrationModel =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let pairs: Vec<EvalPair> = u
        .iter()
        .zip(&r)
        .enumerate()
        .map(|(i, (ui, ri))| {
            let mut p = EvalPair::new(model.calibrate(*ui), *ri);
            if let Some(flags) = &ood {
                p.ood = Some(flags[i]);
            }
            p
        })
        .collect();
    let report = build_report(&pairs, bins)?;

    std::fs::create_dir_all(out)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(out.join("metrics.json"), json)?;
    std::fs::write(
        out.join("metrics.csv"),
        format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.to_csv_row()),
    )?;
    verbosity.info(format!(
        "evaluated {} pairs -> {}",
        pairs.len(),
        out.join("metrics.json").display()
    ));
    Ok(())
}

pub fn cmd_experiment(
    name: &str,
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    verbosity: Verbosity,
) -> Result<()> {
    let kind = ExperimentKind::parse(name)?;
    let mut config = match config_path {
        Some(path) => {
            let config = load_config(path, None)?;
            if config.experiment != kind {
                return Err(Error::InvalidConfig(format!(
                    "config is for {:?} but the command names {name:?}",
                    config.experiment.name()
                )));
            }
            config
        }
        None => RunConfig::default_for(kind),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    verbosity.detail(config.to_json());
    verbosity.detail(format!("thread cap: {}", crate::thread_cap()));
    let outcome = run_experiment(&config, out)?;
    for (key, value) in &outcome.summary {
        verbosity.info(format!("{key} = {value}"));
    }
    verbosity.info(format!("artifacts in {}", out.display()));
    Ok(())
}
