//! The magnitude-direction head: target decomposition, prediction
//! recomposition, the constraint-violation uncertainty score, its variance
//! surrogate, and the two supporting analyses (error lower bound, Gaussian
//! noise tracking).
//!
//! A target `y` in `R^D` (D >= 2) factors as `y = R * d` with `R = ||y||`
//! and `||d|| = 1`. A model predicts the pair `(R_hat, d_hat)`; `d_hat` is
//! not unit-norm in general, and the deviation `|| d_hat || - 1` is the
//! uncertainty signal.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{first_non_finite, l2_norm, rng_for};

/// A ground-truth pair `(R, d)` with `||d|| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDecomposition {
    magnitude: f64,
    direction: Vec<f64>,
}

impl TargetDecomposition {
    /// Splits a nonzero target into magnitude and unit direction.
    pub fn decompose(y: &[f64]) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::DimensionMismatch {
                context: "decompose target".into(),
                expected: 2,
                found: y.len(),
            });
        }
        if let Some(i) = first_non_finite(y) {
            return Err(Error::NonFinite {
                context: "decompose target".into(),
                index: i,
            });
        }
        let r = l2_norm(y);
        if r == 0.0 {
            return Err(Error::ZeroTarget);
        }
        Ok(TargetDecomposition {
            magnitude: r,
            direction: y.iter().map(|v| v / r).collect(),
        })
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// Reconstructs the original target `R * d`.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.direction.iter().map(|d| d * self.magnitude).collect()
    }
}

/// A model's predicted pair `(R_hat, d_hat)`. `d_hat` may be off the unit
/// sphere; that deviation is the signal, so no normalization happens here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcmOutput {
    magnitude: f64,
    direction: Vec<f64>,
}

impl HcmOutput {
    pub fn new(magnitude: f64, direction: Vec<f64>) -> Result<Self> {
        if direction.len() < 2 {
            return Err(Error::DimensionMismatch {
                context: "predicted direction".into(),
                expected: 2,
                found: direction.len(),
            });
        }
        if !magnitude.is_finite() {
            return Err(Error::NonFinite {
                context: "predicted magnitude".into(),
                index: 0,
            });
        }
        if let Some(i) = first_non_finite(&direction) {
            return Err(Error::NonFinite {
                context: "predicted direction".into(),
                index: i,
            });
        }
        Ok(HcmOutput {
            magnitude,
            direction,
        })
    }

    /// Splits a raw network output: first entry is the magnitude, the rest
    /// the direction vector.
    pub fn from_raw_output(raw: &[f64]) -> Result<Self> {
        if raw.len() < 3 {
            return Err(Error::DimensionMismatch {
                context: "raw head output".into(),
                expected: 3,
                found: raw.len(),
            });
        }
        Self::new(raw[0], raw[1..].to_vec())
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn direction_norm(&self) -> f64 {
        l2_norm(&self.direction)
    }

    /// True when the unconstrained magnitude head went negative; counted as
    /// a diagnostic by callers.
    pub fn has_negative_magnitude(&self) -> bool {
        self.magnitude < 0.0
    }

    /// The final prediction `R_hat * d_hat`.
    pub fn recompose(&self) -> Vec<f64> {
        self.direction.iter().map(|d| d * self.magnitude).collect()
    }

    /// The uncertainty score `|R_hat| * | ||d_hat|| - 1 |`: predicted
    /// magnitude times the unit-norm constraint violation. The magnitude
    /// enters as an absolute value; an unconstrained head can dip negative
    /// early in training.
    pub fn uncertainty_score(&self) -> f64 {
        self.magnitude.abs() * (self.direction_norm() - 1.0).abs()
    }

    /// Variance surrogate `u * R_hat * (1 + ||d_hat||) / (D - 1)`, which is
    /// algebraically `R_hat^2 * |1 - ||d_hat||^2| / (D - 1)`.
    pub fn sigma_hat_sq(&self) -> f64 {
        let d = self.dim();
        let norm = self.direction_norm();
        self.uncertainty_score() * self.magnitude.abs() * (1.0 + norm) / (d as f64 - 1.0)
    }
}

/// Embeds a scalar target into the minimal two-dimensional space by
/// duplication, `(y, y)`, so the decomposition applies unchanged. Zero stays
/// zero and is rejected downstream by [`TargetDecomposition::decompose`].
pub fn embed_scalar(y: f64) -> [f64; 2] {
    [y, y]
}

/// Reads a scalar estimate back from a duplicated-coordinate prediction:
/// the coordinate mean. Identity on exact predictions.
pub fn scalar_readback(y_hat: &[f64]) -> f64 {
    y_hat.iter().sum::<f64>() / y_hat.len() as f64
}

/// Everything the error lower bound produces for one (target, prediction)
/// pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundReport {
    /// `||y_hat - y||`, the realized prediction error norm.
    pub error_norm: f64,
    /// The uncertainty score of the prediction.
    pub uncertainty: f64,
    /// `|e_R| / (|R_hat| * ||e_d||)`; `None` when the denominator is zero.
    pub epsilon: Option<f64>,
    /// `u * (1 - epsilon)` when `epsilon < 1`, else 0. Always a valid lower
    /// bound on `error_norm`.
    pub lower_bound: f64,
    /// `|R_hat| * ||e_d|| - |e_R|`, the reverse-triangle side.
    pub sandwich_lower: f64,
    /// `|R_hat| * ||e_d|| + |e_R|`, the triangle side.
    pub sandwich_upper: f64,
}

/// The prediction-error lower bound: with `e_y = y_hat - y`,
/// `e_d = d_hat - d`, `e_R = R_hat - R` and
/// `epsilon = |e_R| / (R_hat ||e_d||)`,
///
/// ```text
/// ||e_y|| >= u * (1 - epsilon)
/// ```
///
/// together with the sandwich
/// `R_hat ||e_d|| - |e_R| <= ||e_y|| <= R_hat ||e_d|| + |e_R|`.
/// An undefined `epsilon` (zero denominator) degrades the bound to 0.
pub fn error_lower_bound(
    target: &TargetDecomposition,
    out: &HcmOutput,
) -> Result<ErrorBoundReport> {
    if target.dim() != out.dim() {
        return Err(Error::DimensionMismatch {
            context: "error bound target vs prediction".into(),
            expected: target.dim(),
            found: out.dim(),
        });
    }
    let y = target.reconstruct();
    let y_hat = out.recompose();
    let error_norm = l2_norm(
        &y_hat
            .iter()
            .zip(&y)
            .map(|(a, b)| a - b)
            .collect::<Vec<f64>>(),
    );
    let dir_err = l2_norm(
        &out.direction()
            .iter()
            .zip(target.direction())
            .map(|(a, b)| a - b)
            .collect::<Vec<f64>>(),
    );
    let mag_err = (out.magnitude() - target.magnitude()).abs();
    let scaled_dir_err = out.magnitude().abs() * dir_err;
    let uncertainty = out.uncertainty_score();
    let epsilon = if scaled_dir_err > 0.0 {
        Some(mag_err / scaled_dir_err)
    } else {
        None
    };
    let lower_bound = match epsilon {
        Some(e) if e < 1.0 => uncertainty * (1.0 - e),
        _ => 0.0,
    };
    Ok(ErrorBoundReport {
        error_norm,
        uncertainty,
        epsilon,
        lower_bound,
        sandwich_lower: scaled_dir_err - mag_err,
        sandwich_upper: scaled_dir_err + mag_err,
    })
}

/// Result of the Gaussian-noise Monte Carlo oracle.
#[derive(Debug, Clone)]
pub struct NoiseOracleEstimate {
    /// `(1/(D-1)) * R*^2 * |1 - ||d*||^2|` from the estimated population
    /// minimizers.
    pub sigma_hat_sq: f64,
    /// Monte Carlo standard error of `sigma_hat_sq` (batch means).
    pub standard_error: f64,
    /// Estimate of `E[||y||^2]` (the squared-magnitude minimizer).
    pub mean_sq_norm: f64,
}

/// Estimates what the variance surrogate converges to under additive
/// isotropic Gaussian noise: draws `y = g + xi` with `xi ~ N(0, sigma^2 I)`
/// (taking `g = ||g|| e_1`, valid by rotational symmetry), estimates the
/// population minimizers `R*^2 = E[||y||^2]` and `d* = E[y / ||y||]`, and
/// returns `(1/(D-1)) * R*^2 * |1 - ||d*||^2|`.
///
/// The estimate approaches `sigma^2` up to the remainder
/// [`noise_oracle_remainder_bound`]. The standard error comes from batch
/// means (100 batches, fixed per-batch seeds and reduction order, so the
/// result is reproducible).
pub fn noise_oracle(
    g_norm: f64,
    dim: usize,
    sigma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<NoiseOracleEstimate> {
    if dim < 2 {
        return Err(Error::DimensionMismatch {
            context: "noise oracle dimension".into(),
            expected: 2,
            found: dim,
        });
    }
    if n_samples == 0 {
        return Err(Error::EmptyInput("noise oracle sample count".into()));
    }
    let positive_center = g_norm > 0.0;
    if !positive_center || sigma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise oracle needs g_norm > 0 and sigma >= 0, got {g_norm}, {sigma}"
        )));
    }

    let n_batches = 100.min(n_samples);
    let base = n_samples / n_batches;
    let extra = n_samples % n_batches;

    struct BatchSums {
        count: usize,
        sq_norm: f64,
        unit_sum: Vec<f64>,
    }

    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("positive std");
    let mut batches = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let count = base + usize::from(b < extra);
        let mut rng = rng_for(seed, b as u64 + 1);
        let mut sq_norm = 0.0;
        let mut unit_sum = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        for _ in 0..count {
            if sigma == 0.0 {
                y.iter_mut().for_each(|v| *v = 0.0);
            } else {
                y.iter_mut().for_each(|v| *v = noise.sample(&mut rng));
            }
            y[0] += g_norm;
            let norm = l2_norm(&y);
            sq_norm += norm * norm;
            for (acc, v) in unit_sum.iter_mut().zip(&y) {
                *acc += v / norm;
            }
        }
        batches.push(BatchSums {
            count,
            sq_norm,
            unit_sum,
        });
    }

    let estimate_of = |subset: &[&BatchSums]| -> f64 {
        let total: usize = subset.iter().map(|b| b.count).sum();
        let mean_sq: f64 = subset.iter().map(|b| b.sq_norm).sum::<f64>() / total as f64;
        let mut mean_unit = vec![0.0; dim];
        for b in subset {
            for (acc, v) in mean_unit.iter_mut().zip(&b.unit_sum) {
                *acc += v;
            }
        }
        mean_unit.iter_mut().for_each(|v| *v /= total as f64);
        let unit_norm_sq: f64 = mean_unit.iter().map(|v| v * v).sum();
        mean_sq * (1.0 - unit_norm_sq).abs() / (dim as f64 - 1.0)
    };

    let refs: Vec<&BatchSums> = batches.iter().collect();
    let overall = estimate_of(&refs);
    let total: usize = batches.iter().map(|b| b.count).sum();
    let mean_sq_norm = batches.iter().map(|b| b.sq_norm).sum::<f64>() / total as f64;

    let standard_error = if n_batches > 1 {
        let per_batch: Vec<f64> = batches.iter().map(|b| estimate_of(&[b])).collect();
        let m = per_batch.iter().sum::<f64>() / per_batch.len() as f64;
        let var = per_batch.iter().map(|e| (e - m) * (e - m)).sum::<f64>()
            / (per_batch.len() - 1) as f64;
        (var / per_batch.len() as f64).sqrt()
    } else {
        f64::INFINITY
    };

    Ok(NoiseOracleEstimate {
        sigma_hat_sq: overall,
        standard_error,
        mean_sq_norm,
    })
}

/// The stated remainder bound for the noise oracle:
/// `(D+2)(D+4) sigma^4 / ((D-1) ||g||^2)`.
pub fn noise_oracle_remainder_bound(g_norm: f64, dim: usize, sigma: f64) -> f64 {
    let d = dim as f64;
    (d + 2.0) * (d + 4.0) * sigma.powi(4) / ((d - 1.0) * g_norm * g_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn decompose_pythagorean() {
        let t = TargetDecomposition::decompose(&[3.0, 4.0]).unwrap();
        assert!((t.magnitude() - 5.0).abs() < 1e-15);
        assert!((t.direction()[0] - 0.6).abs() < 1e-15);
        assert!((t.direction()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn decompose_already_unit() {
        let t = TargetDecomposition::decompose(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.magnitude(), 1.0);
        assert_eq!(t.direction(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn decompose_symmetric() {
        let t = TargetDecomposition::decompose(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((t.magnitude() - 2.0).abs() < 1e-15);
        for d in t.direction() {
            assert!((d - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn decompose_rejects_zero_and_scalar() {
        assert!(matches!(
            TargetDecomposition::decompose(&[0.0, 0.0]),
            Err(Error::ZeroTarget)
        ));
        assert!(TargetDecomposition::decompose(&[1.0]).is_err());
    }

    #[test]
    fn embed_scalar_round_trips() {
        let e = embed_scalar(5.0);
        assert_eq!(e, [5.0, 5.0]);
        let t = TargetDecomposition::decompose(&e).unwrap();
        assert!((t.magnitude() - 5.0 * 2.0_f64.sqrt()).abs() < 1e-12);
        let inv = 1.0 / 2.0_f64.sqrt();
        assert!((t.direction()[0] - inv).abs() < 1e-12);

        let neg = embed_scalar(-2.0);
        let t = TargetDecomposition::decompose(&neg).unwrap();
        assert!((t.direction()[0] + inv).abs() < 1e-12);
        assert!((t.direction()[1] + inv).abs() < 1e-12);

        // readback is the identity on exact predictions
        assert!((scalar_readback(&t.reconstruct()) - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn recompose_basic() {
        let out = HcmOutput::new(5.0, vec![0.6, 0.8]).unwrap();
        let y = out.recompose();
        assert!((y[0] - 3.0).abs() < 1e-15);
        assert!((y[1] - 4.0).abs() < 1e-15);
        let zero = HcmOutput::new(0.0, vec![0.6, 0.8]).unwrap();
        assert_eq!(zero.recompose(), vec![0.0, 0.0]);
    }

    #[test]
    fn recompose_decompose_round_trip_random() {
        let mut rng = rng_for(17, 0);
        for _ in 0..10_000 {
            let dim = rng.random_range(2..=6);
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
            if l2_norm(&y) < 1e-9 {
                continue;
            }
            let t = TargetDecomposition::decompose(&y).unwrap();
            let back = t.reconstruct();
            for (a, b) in back.iter().zip(&y) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn uncertainty_score_direct() {
        // ||d|| = 1.1 exactly via (1.1, 0)
        let out = HcmOutput::new(2.0, vec![1.1, 0.0]).unwrap();
        assert!((out.uncertainty_score() - 0.2).abs() < 1e-12);

        let unit = HcmOutput::new(7.5, vec![0.0, 1.0]).unwrap();
        assert_eq!(unit.uncertainty_score(), 0.0);

        // independent norm recomputation
        let out = HcmOutput::new(10.0, vec![0.6, 0.6]).unwrap();
        let norm = (0.6f64 * 0.6 + 0.6 * 0.6).sqrt();
        let expected = 10.0 * (norm - 1.0).abs();
        assert!((out.uncertainty_score() - expected).abs() < 1e-12);
        assert!((out.uncertainty_score() - 1.5147).abs() < 1e-3);
    }

    #[test]
    fn negative_magnitude_uses_absolute_value() {
        let out = HcmOutput::new(-2.0, vec![1.1, 0.0]).unwrap();
        assert!(out.has_negative_magnitude());
        assert!((out.uncertainty_score() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sigma_hat_sq_product_and_identity_forms_agree() {
        let out = HcmOutput::new(2.0, vec![1.1, 0.0]).unwrap();
        // product form: u * R (1 + ||d||) / (D-1) = 0.2 * 2 * 2.1 / 1
        assert!((out.sigma_hat_sq() - 0.84).abs() < 1e-12);
        // identity form: R^2 |1 - ||d||^2| / (D-1) = 4 * 0.21
        let identity = 4.0 * (1.0 - 1.21f64).abs();
        assert!((out.sigma_hat_sq() - identity).abs() < 1e-12);

        let unit = HcmOutput::new(3.0, vec![1.0, 0.0]).unwrap();
        assert_eq!(unit.sigma_hat_sq(), 0.0);
    }

    #[test]
    fn error_bound_perfect_prediction() {
        let t = TargetDecomposition::decompose(&[3.0, 4.0]).unwrap();
        let out = HcmOutput::new(t.magnitude(), t.direction().to_vec()).unwrap();
        let rep = error_lower_bound(&t, &out).unwrap();
        assert!(rep.error_norm < 1e-12);
        assert!(rep.uncertainty < 1e-12);
        assert!(rep.error_norm >= rep.lower_bound);
    }

    #[test]
    fn error_bound_zero_epsilon_is_tight() {
        // R = 1, d = (1,0), R_hat = 1, d_hat = (0.8, 0): e_R = 0, eps = 0.
        let t = TargetDecomposition::decompose(&[1.0, 0.0]).unwrap();
        let out = HcmOutput::new(1.0, vec![0.8, 0.0]).unwrap();
        let rep = error_lower_bound(&t, &out).unwrap();
        assert_eq!(rep.epsilon, Some(0.0));
        assert!((rep.uncertainty - 0.2).abs() < 1e-12);
        assert!((rep.error_norm - 0.2).abs() < 1e-12);
        assert!((rep.lower_bound - 0.2).abs() < 1e-12);
    }

    #[test]
    fn error_bound_undefined_epsilon_degrades_to_zero() {
        // d_hat = d exactly: ||e_d|| = 0, epsilon undefined.
        let t = TargetDecomposition::decompose(&[2.0, 0.0]).unwrap();
        let out = HcmOutput::new(3.0, t.direction().to_vec()).unwrap();
        let rep = error_lower_bound(&t, &out).unwrap();
        assert_eq!(rep.epsilon, None);
        assert_eq!(rep.lower_bound, 0.0);
        assert!(rep.error_norm >= 0.0);
    }

    #[test]
    fn error_bound_randomized_inequality() {
        // 10^5 random triples with epsilon < 1: the bound and the sandwich
        // hold with no violation beyond 1e-12 (including near-degenerate
        // direction errors).
        let mut rng = rng_for(23, 0);
        let mut checked = 0usize;
        while checked < 100_000 {
            let dim = rng.random_range(2..=5);
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            if l2_norm(&y) < 1e-6 {
                continue;
            }
            let t = TargetDecomposition::decompose(&y).unwrap();
            let r_hat = rng.random_range(0.05..5.0);
            // direction error spans 12 orders of magnitude to hit the
            // near-degenerate regime
            let scale = 10f64.powf(rng.random_range(-12.0..0.5));
            let d_hat: Vec<f64> = t
                .direction()
                .iter()
                .map(|d| d + scale * rng.random_range(-1.0..1.0))
                .collect();
            let out = HcmOutput::new(r_hat, d_hat).unwrap();
            let rep = error_lower_bound(&t, &out).unwrap();
            if matches!(rep.epsilon, Some(e) if e < 1.0) {
                assert!(
                    rep.error_norm >= rep.lower_bound - 1e-12,
                    "bound violated: {rep:?}"
                );
                assert!(rep.error_norm >= rep.sandwich_lower - 1e-12);
                assert!(rep.error_norm <= rep.sandwich_upper + 1e-12);
                checked += 1;
            }
        }
    }

    #[test]
    fn noise_oracle_zero_noise_is_exact() {
        let est = noise_oracle(50.0, 10, 0.0, 1000, 1).unwrap();
        assert_eq!(est.sigma_hat_sq, 0.0);
    }

    #[test]
    fn noise_oracle_rejects_bad_input() {
        assert!(noise_oracle(50.0, 1, 1.0, 100, 0).is_err());
        assert!(noise_oracle(50.0, 10, 1.0, 0, 0).is_err());
        assert!(noise_oracle(0.0, 10, 1.0, 100, 0).is_err());
    }

    #[test]
    fn noise_oracle_tracks_sigma_sq() {
        // Smaller n than the acceptance suite; band allows for MC error.
        let est = noise_oracle(50.0, 10, 1.0, 200_000, 7).unwrap();
        let bound = noise_oracle_remainder_bound(50.0, 10, 1.0);
        assert!(
            (est.sigma_hat_sq - 1.0).abs() <= bound + 3.0 * est.standard_error,
            "estimate {} se {} bound {bound}",
            est.sigma_hat_sq,
            est.standard_error
        );
        // magnitude branch: E||y||^2 = ||g||^2 + D sigma^2
        let expected = 50.0f64 * 50.0 + 10.0;
        assert!((est.mean_sq_norm - expected).abs() < expected * 5e-3);
    }

    #[test]
    fn noise_oracle_is_deterministic() {
        let a = noise_oracle(20.0, 5, 0.5, 50_000, 3).unwrap();
        let b = noise_oracle(20.0, 5, 0.5, 50_000, 3).unwrap();
        assert_eq!(a.sigma_hat_sq, b.sigma_hat_sq);
        assert_eq!(a.standard_error, b.standard_error);
    }
}
