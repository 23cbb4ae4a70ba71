//! Property tests for the geometric and calibration invariants.

use proptest::prelude::*;

use hcm_core::calibrate::{confidence, fit_threshold, normalize_minmax, ThresholdKind};
use hcm_core::head::{HcmOutput, TargetDecomposition};
use hcm_core::metrics::auroc;
use hcm_core::util::l2_norm;

fn direction_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2..6)
}

fn target_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 2..6)
        .prop_filter("nonzero target", |v| l2_norm(v) > 1e-6)
}

proptest! {
    /// recompose . decompose is the identity on nonzero targets.
    #[test]
    fn decompose_round_trip(y in target_vec()) {
        let t = TargetDecomposition::decompose(&y).unwrap();
        let back = t.reconstruct();
        for (a, b) in back.iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((l2_norm(t.direction()) - 1.0).abs() < 1e-12);
    }

    /// The uncertainty score is positively homogeneous in the magnitude.
    #[test]
    fn uncertainty_positive_homogeneity(
        mag in 0.01f64..10.0,
        c in 0.01f64..100.0,
        dir in direction_vec(),
    ) {
        let a = HcmOutput::new(mag, dir.clone()).unwrap();
        let b = HcmOutput::new(c * mag, dir).unwrap();
        let (ua, ub) = (a.uncertainty_score(), b.uncertainty_score());
        prop_assert!((ub - c * ua).abs() <= 1e-9 * (1.0 + ub.abs()));
    }

    /// Zero score exactly when the direction is unit-norm (positive
    /// magnitude).
    #[test]
    fn uncertainty_zero_law(mag in 0.01f64..10.0, dir in direction_vec()) {
        let norm = l2_norm(&dir);
        prop_assume!(norm > 1e-9);
        let unit: Vec<f64> = dir.iter().map(|d| d / norm).collect();
        let on_sphere = HcmOutput::new(mag, unit).unwrap();
        prop_assert!(on_sphere.uncertainty_score() <= mag * 1e-12);
        if (norm - 1.0).abs() > 1e-9 {
            let off = HcmOutput::new(mag, dir).unwrap();
            prop_assert!(off.uncertainty_score() > 0.0);
        }
    }

    /// The product form of the variance surrogate equals the closed form
    /// R^2 |1 - ||d||^2| / (D - 1).
    #[test]
    fn sigma_sq_identity(mag in -5.0f64..5.0, dir in direction_vec()) {
        let out = HcmOutput::new(mag, dir).unwrap();
        let d = out.dim() as f64;
        let norm = out.direction_norm();
        let closed = mag * mag * (1.0 - norm * norm).abs() / (d - 1.0);
        let product = out.sigma_hat_sq();
        prop_assert!(
            (closed - product).abs() <= 1e-12 * (1.0 + closed.abs()),
            "{closed} vs {product}"
        );
    }

    /// Confidence is a strictly decreasing bijection onto (0, 1].
    #[test]
    fn confidence_strictly_decreasing(
        a in 0.0f64..20.0,
        delta in 1e-6f64..5.0,
        t in 0.01f64..10.0,
    ) {
        let (ca, cb) = (confidence(a, t), confidence(a + delta, t));
        prop_assert!(ca > 0.0 && ca <= 1.0);
        prop_assert!(cb < ca);
    }

    /// Min-max normalization preserves confidence ordering.
    #[test]
    fn minmax_rank_preservation(conf in prop::collection::vec(0.0f64..1.0, 2..60)) {
        let out = normalize_minmax(&conf).unwrap();
        for i in 0..conf.len() {
            for j in 0..conf.len() {
                if conf[i] < conf[j] {
                    prop_assert!(out[i] <= out[j]);
                }
            }
        }
    }

    /// AUROC complements under score negation on tie-free inputs.
    #[test]
    fn auroc_complement(
        scores in prop::collection::vec(0.0f64..1.0, 10..60),
        flip in prop::collection::vec(any::<bool>(), 10..60),
    ) {
        let n = scores.len().min(flip.len());
        let scores = &scores[..n];
        let labels = &flip[..n];
        prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));
        // dedupe to keep the input tie-free
        let mut sorted = scores.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
        let a = auroc(scores, labels).unwrap();
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let b = auroc(&negated, labels).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    /// Quantile-tail thresholds flag about the expected fraction.
    #[test]
    fn threshold_flag_fraction(
        values in prop::collection::vec(0.0f64..100.0, 50..300),
        q in 0.5f64..0.99,
    ) {
        // dedupe so the empirical quantile is well separated
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
        let policy = fit_threshold(ThresholdKind::QuantileTail { q }, &values).unwrap();
        let flagged = values.iter().filter(|u| policy.flag(**u)).count() as f64
            / values.len() as f64;
        prop_assert!((flagged - (1.0 - q)).abs() <= 1.0 / values.len() as f64 + 1e-9);
    }
}
