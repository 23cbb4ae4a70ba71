//! End-to-end studies: each runner trains a head, calibrates it, evaluates
//! the metrics suite, and writes a reproducible artifact directory
//! (config.json, params.json, calibration.json, metrics.json, scores.csv,
//! experiment-specific tables, and a checksum manifest).

mod blob_ood;
mod config;
mod lambda_sweep;
mod noise_shift;
mod pipeline;
mod rundir;
mod toy1d;
mod two_moons;

pub use blob_ood::{blob_probe_points, run_blob_ood, PROBE_RADIUS_FACTOR};
pub use config::{
    CalibrationConfig, DatasetConfig, ExperimentKind, NetworkConfig, NormalizerKind, RunConfig,
};
pub use lambda_sweep::{run_lambda_sweep, SweepRow, STABLE_NORM_DEVIATION};
pub use noise_shift::run_noise_shift;
pub use rundir::{verify_manifest, RunDir};
pub use toy1d::run_toy1d;
pub use two_moons::{boundary_distances, run_two_moons, HIGH_U_THRESHOLD};

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::metrics::MetricsReport;

/// Uniform result of any experiment: named metric reports plus scalar
/// summary values, mirroring what was written into the run directory.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub reports: BTreeMap<String, MetricsReport>,
    pub summary: BTreeMap<String, f64>,
    pub diagnostics: BTreeMap<String, u64>,
}

impl Outcome {
    pub fn new() -> Self {
        Outcome {
            reports: BTreeMap::new(),
            summary: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn summary_value(&self, key: &str) -> f64 {
        *self
            .summary
            .get(key)
            .unwrap_or_else(|| panic!("missing summary value {key}"))
    }
}

impl Default for Outcome {
    fn default() -> Self {
        Self::new()
    }
}

/// Runs the experiment named by the config, writing its artifact directory
/// under `out_dir`.
pub fn run_experiment(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::Toy1d => run_toy1d(config, out_dir),
        ExperimentKind::TwoMoons => run_two_moons(config, out_dir),
        ExperimentKind::NoiseShift => run_noise_shift(config, out_dir),
        ExperimentKind::BlobOod => run_blob_ood(config, out_dir),
        ExperimentKind::LambdaSweep => {
            run_lambda_sweep(config, out_dir).map(|(outcome, _)| outcome)
        }
    }
}
