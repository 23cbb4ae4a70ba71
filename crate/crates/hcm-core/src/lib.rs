//! Hyperspherical confidence mapping toolkit.
//!
//! A target vector factors into a magnitude and a unit direction,
//! `y = R d` with `||d|| = 1`. A small dense network predicts the pair
//! `(R_hat, d_hat)` without any hard constraint on `d_hat`; how far
//! `||d_hat||` drifts from 1 is a deterministic, label-free uncertainty
//! signal, `u = |R_hat| * | ||d_hat|| - 1 |`. This crate provides:
//!
//! - [`nn`]: a minimal f64 MLP with reverse-mode gradients, SGD/Adam, and
//!   JSON checkpoints, deterministic down to the bit for a fixed seed;
//! - [`head`]: the decomposition, recomposition, uncertainty score, its
//!   variance surrogate, the prediction-error lower bound, and a Monte
//!   Carlo oracle for the score's behavior under Gaussian noise;
//! - [`loss`]: the relaxed training objective over penalty families, its
//!   analytic gradient, and the exact-primal expansion;
//! - [`calibrate`]: temperature fitting against the 68-95-99.7 rule, the
//!   exponential confidence map, min-max/quantile normalization, and
//!   threshold policies;
//! - [`metrics`]: coverage, regression calibration error, correlations,
//!   AUROC, and FPR@95TPR;
//! - [`data`]: synthetic generators (cubic, two moons, Gaussian blobs with
//!   an out-of-distribution cluster), input perturbation, mixup, and CSV
//!   persistence;
//! - [`experiments`]: end-to-end study runners with reproducible artifact
//!   directories;
//! - [`train`]: the deterministic training loop and scoring helpers.

pub mod calibrate;
pub mod data;
pub mod error;
pub mod experiments;
pub mod head;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod train;
pub mod util;

pub use calibrate::{CalibrationModel, Normalizer, ThresholdKind, ThresholdPolicy};
pub use data::{LabeledSet, MixupMode, NoiseProfile};
pub use error::{Error, Result};
pub use head::{HcmOutput, TargetDecomposition};
pub use loss::{LossBreakdown, LossSpec, PhiFamily};
pub use metrics::{EvalPair, MetricsReport};
pub use nn::{Activation, LayerSpec, NetworkParams, OptimizerKind};
pub use train::{TrainConfig, TrainResult};
