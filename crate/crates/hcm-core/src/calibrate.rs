//! Post-hoc calibration of raw uncertainty scores: temperature fitting
//! against the 68-95-99.7 coverage rule, the exponential confidence map,
//! min-max and quantile normalization, and threshold policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coverage targets for k = 1, 2, 3 scaled uncertainties.
const COVERAGE_TARGETS: [f64; 3] = [0.68, 0.95, 0.997];

/// Confidence normalizer fitted on a validation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// Affine map onto `[0, 1]` from the fitted range. A constant fitting
    /// set maps everything to 0.5.
    MinMax { lo: f64, hi: f64 },
    /// Empirical CDF against a sorted reference of fitting-set confidences.
    Quantile { reference: Vec<f64> },
}

/// A fitted temperature plus confidence normalizer. Serializes to JSON so a
/// trained run can be re-scored without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub temperature: f64,
    pub normalizer: Normalizer,
}

impl CalibrationModel {
    /// Calibrated score `u * T`.
    pub fn calibrate(&self, u: f64) -> f64 {
        u * self.temperature
    }

    /// Confidence of a raw score: `exp(-u * T)`.
    pub fn confidence_of(&self, u: f64) -> f64 {
        confidence(u, self.temperature)
    }

    /// Applies the fitted normalizer to one confidence value.
    pub fn normalize(&self, conf: f64) -> f64 {
        match &self.normalizer {
            Normalizer::MinMax { lo, hi } => {
                if hi > lo {
                    ((conf - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            }
            Normalizer::Quantile { reference } => normalize_quantile(conf, reference),
        }
    }
}

/// Mean coverage indicator `mean[ r_i <= k * T * u_i ]`.
fn coverage_at(k: f64, temperature: f64, u: &[f64], errors: &[f64]) -> f64 {
    let hits = u
        .iter()
        .zip(errors)
        .filter(|(ui, ri)| **ri <= k * temperature * **ui)
        .count();
    hits as f64 / u.len() as f64
}

/// Sum of squared deviations of the k-sigma coverages from the Gaussian
/// targets, the objective minimized by temperature fitting.
fn coverage_objective(temperature: f64, u: &[f64], errors: &[f64]) -> f64 {
    COVERAGE_TARGETS
        .iter()
        .enumerate()
        .map(|(i, target)| {
            let cov = coverage_at((i + 1) as f64, temperature, u, errors);
            (cov - target) * (cov - target)
        })
        .sum()
}

/// Fits the temperature so the empirical coverages at 1, 2, 3 scaled
/// uncertainties best match (0.68, 0.95, 0.997).
///
/// The objective is piecewise constant in `T`, so the search is a 400-point
/// log-spaced grid over `[1e-4, 1e4]` refined once by a second 400-point
/// grid spanning three cells on each side of the best point (clamped to the
/// original range). Ties break toward smaller `T`.
pub fn fit_temperature(val_u: &[f64], val_errors: &[f64]) -> Result<f64> {
    if val_u.len() != val_errors.len() {
        return Err(Error::DimensionMismatch {
            context: "temperature fit scores vs errors".into(),
            expected: val_u.len(),
            found: val_errors.len(),
        });
    }
    if val_u.len() < 10 {
        return Err(Error::EmptyInput(format!(
            "temperature fit needs at least 10 pairs, got {}",
            val_u.len()
        )));
    }
    if val_u.iter().any(|u| *u < 0.0) || val_errors.iter().any(|r| *r < 0.0) {
        return Err(Error::InvalidConfig(
            "temperature fit inputs must be nonnegative".into(),
        ));
    }
    if val_u.iter().all(|&u| u == 0.0) {
        return Err(Error::Uncalibratable("degenerate scores".into()));
    }

    const GRID: usize = 400;
    const LOG_LO: f64 = -4.0;
    const LOG_HI: f64 = 4.0;
    let cell = (LOG_HI - LOG_LO) / (GRID - 1) as f64;

    let search = |lo: f64, hi: f64| -> (f64, f64) {
        let mut best_t = 10f64.powf(lo);
        let mut best_j = f64::INFINITY;
        for i in 0..GRID {
            let t = 10f64.powf(lo + (hi - lo) * i as f64 / (GRID - 1) as f64);
            let j = coverage_objective(t, val_u, val_errors);
            // strict improvement only: ties stay at the smaller T
            if j < best_j {
                best_j = j;
                best_t = t;
            }
        }
        (best_t, best_j)
    };

    let (coarse_t, _) = search(LOG_LO, LOG_HI);
    let center = coarse_t.log10();
    let zoom_lo = (center - 3.0 * cell).max(LOG_LO);
    let zoom_hi = (center + 3.0 * cell).min(LOG_HI);
    let (fine_t, _) = search(zoom_lo, zoom_hi);
    Ok(fine_t)
}

/// Coverage of a calibrated score set at `k` scaled uncertainties,
/// `mean[ r_i <= k * T * u_i ]`.
pub fn coverage(k: u32, temperature: f64, u: &[f64], errors: &[f64]) -> Result<f64> {
    if u.is_empty() || u.len() != errors.len() {
        return Err(Error::EmptyInput("coverage inputs".into()));
    }
    Ok(coverage_at(k as f64, temperature, u, errors))
}

/// The negative-exponential confidence map `exp(-u * T)`, a strictly
/// decreasing bijection from `[0, inf)` onto `(0, 1]`.
pub fn confidence(u: f64, temperature: f64) -> f64 {
    (-u * temperature).exp()
}

/// Min-max normalizes a confidence list onto `[0, 1]`. A constant list maps
/// to all 0.5.
pub fn normalize_minmax(conf: &[f64]) -> Result<Vec<f64>> {
    if conf.is_empty() {
        return Err(Error::EmptyInput("min-max normalization".into()));
    }
    let lo = conf.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = conf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        Ok(conf.iter().map(|c| (c - lo) / (hi - lo)).collect())
    } else {
        Ok(vec![0.5; conf.len()])
    }
}

/// Fits a min-max normalizer on a confidence list.
pub fn fit_minmax(conf: &[f64]) -> Result<Normalizer> {
    if conf.is_empty() {
        return Err(Error::EmptyInput("min-max fit".into()));
    }
    let lo = conf.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = conf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(Normalizer::MinMax { lo, hi })
}

/// Fits a quantile normalizer: stores the sorted fitting-set confidences.
pub fn fit_quantile(conf: &[f64]) -> Result<Normalizer> {
    if conf.is_empty() {
        return Err(Error::EmptyInput("quantile fit".into()));
    }
    let mut reference = conf.to_vec();
    reference.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN confidence"));
    Ok(Normalizer::Quantile { reference })
}

/// Empirical CDF value of `conf` against a sorted reference:
/// `#(reference <= conf) / n`. The fitting set itself maps approximately
/// uniformly onto `[0, 1]`.
pub fn normalize_quantile(conf: f64, sorted_reference: &[f64]) -> f64 {
    debug_assert!(!sorted_reference.is_empty(), "empty quantile reference");
    // first index with reference[i] > conf
    let count = sorted_reference.partition_point(|&r| r <= conf);
    count as f64 / sorted_reference.len() as f64
}

/// How a threshold on the raw uncertainty score is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    /// A task-supplied error tolerance used directly as the cutoff.
    Tolerance { eps: f64 },
    /// The empirical q-quantile of validation scores.
    QuantileTail { q: f64 },
}

/// A fitted flagging policy: scores above `cutoff` are unreliable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub kind: ThresholdKind,
    pub cutoff: f64,
}

impl ThresholdPolicy {
    /// True when the score exceeds the cutoff (strictly).
    pub fn flag(&self, u: f64) -> bool {
        u > self.cutoff
    }
}

/// Fits a threshold policy on validation scores. `Tolerance` uses its
/// epsilon directly; `QuantileTail` takes the empirical q-quantile with
/// linear interpolation between order statistics.
pub fn fit_threshold(kind: ThresholdKind, val_u: &[f64]) -> Result<ThresholdPolicy> {
    let cutoff = match kind {
        ThresholdKind::Tolerance { eps } => {
            let positive = eps > 0.0;
            if !positive {
                return Err(Error::InvalidConfig(format!(
                    "tolerance must be positive, got {eps}"
                )));
            }
            eps
        }
        ThresholdKind::QuantileTail { q } => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "quantile must be in (0, 1), got {q}"
                )));
            }
            if val_u.is_empty() {
                return Err(Error::EmptyInput("quantile threshold fit".into()));
            }
            let mut sorted = val_u.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN score"));
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if lo + 1 < sorted.len() {
                sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
            } else {
                sorted[lo]
            }
        }
    };
    Ok(ThresholdPolicy { kind, cutoff })
}
