//! Training objective over `(R_hat, d_hat)` heads.
//!
//! The total loss is
//!
//! ```text
//! phi_d( R * ||d_hat - d|| ) + phi_R( |R_hat - R| )
//!     + lambda_norm * phi_norm( | ||d_hat|| - 1 | )
//! ```
//!
//! with the direction term weighted by the ground-truth magnitude `R`. Each
//! `phi` is a nonnegative, nondecreasing penalty family applied to a
//! nonnegative argument. The exact-primal squared error is kept alongside
//! for comparison studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::{HcmOutput, TargetDecomposition};
use crate::util::l2_norm;

/// A one-dimensional penalty `phi: [0, inf) -> [0, inf)` with `phi(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiFamily {
    /// `z^p` with `p >= 1`.
    PowerP(f64),
    /// `z^2 / 2` for `z <= delta`, else `delta (z - delta/2)`.
    Huber(f64),
    /// `z^2 / (2 beta)` for `z <= beta`, else `z - beta/2`.
    SmoothL1(f64),
}

impl PhiFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PhiFamily::PowerP(p) => *p >= 1.0,
            PhiFamily::Huber(delta) => *delta > 0.0,
            PhiFamily::SmoothL1(beta) => *beta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad phi family: {self:?}")))
        }
    }

    /// Evaluates the penalty. Rejects negative arguments.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if z < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "phi argument must be nonnegative, got {z}"
            )));
        }
        Ok(match self {
            PhiFamily::PowerP(p) => z.powf(*p),
            PhiFamily::Huber(delta) => {
                if z <= *delta {
                    0.5 * z * z
                } else {
                    delta * (z - 0.5 * delta)
                }
            }
            PhiFamily::SmoothL1(beta) => {
                if z <= *beta {
                    z * z / (2.0 * beta)
                } else {
                    z - 0.5 * beta
                }
            }
        })
    }

    /// Derivative `phi'(z)` for `z > 0`; at `z = 0` the subgradient-0
    /// convention applies (relevant for `PowerP` with `p < 2`).
    fn derivative(&self, z: f64) -> f64 {
        match self {
            PhiFamily::PowerP(p) => {
                if z > 0.0 {
                    p * z.powf(p - 1.0)
                } else if *p >= 2.0 {
                    0.0
                } else {
                    // subgradient 0 at the kink
                    0.0
                }
            }
            PhiFamily::Huber(delta) => {
                if z <= *delta {
                    z
                } else {
                    *delta
                }
            }
            PhiFamily::SmoothL1(beta) => {
                if z <= *beta {
                    z / beta
                } else {
                    1.0
                }
            }
        }
    }
}

/// Penalty family selections and the norm-penalty weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub phi_dir: PhiFamily,
    pub phi_mag: PhiFamily,
    pub phi_norm: PhiFamily,
    pub lambda_norm: f64,
}

impl LossSpec {
    /// All-squared penalties with no norm regularization; the default for
    /// every experiment (the norm weight is exposed as a sweep axis).
    pub fn squared() -> Self {
        LossSpec {
            phi_dir: PhiFamily::PowerP(2.0),
            phi_mag: PhiFamily::PowerP(2.0),
            phi_norm: PhiFamily::PowerP(2.0),
            lambda_norm: 0.0,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_norm = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.phi_dir.validate()?;
        self.phi_mag.validate()?;
        self.phi_norm.validate()?;
        if self.lambda_norm < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda_norm must be nonnegative, got {}",
                self.lambda_norm
            )));
        }
        Ok(())
    }
}

/// The three summands and their total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub dir_term: f64,
    pub mag_term: f64,
    pub norm_term: f64,
    pub total: f64,
}

/// Evaluates the decomposed loss for one (target, prediction) pair.
pub fn loss_total(
    spec: &LossSpec,
    target: &TargetDecomposition,
    out: &HcmOutput,
) -> Result<LossBreakdown> {
    if target.dim() != out.dim() {
        return Err(Error::DimensionMismatch {
            context: "loss target vs prediction".into(),
            expected: target.dim(),
            found: out.dim(),
        });
    }
    let dir_err = l2_norm(
        &out.direction()
            .iter()
            .zip(target.direction())
            .map(|(a, b)| a - b)
            .collect::<Vec<f64>>(),
    );
    let dir_term = spec.phi_dir.eval(target.magnitude() * dir_err)?;
    let mag_term = spec
        .phi_mag
        .eval((out.magnitude() - target.magnitude()).abs())?;
    let norm_term =
        spec.lambda_norm * spec.phi_norm.eval((out.direction_norm() - 1.0).abs())?;
    Ok(LossBreakdown {
        dir_term,
        mag_term,
        norm_term,
        total: dir_term + mag_term + norm_term,
    })
}

/// Analytic gradient of [`loss_total`] with respect to `(R_hat, d_hat)`.
/// At non-differentiable points (kinks of the penalty families, the
/// direction-error origin, the zero direction vector) the subgradient-0
/// convention is used.
pub fn loss_grad(
    spec: &LossSpec,
    target: &TargetDecomposition,
    out: &HcmOutput,
) -> Result<(f64, Vec<f64>)> {
    if target.dim() != out.dim() {
        return Err(Error::DimensionMismatch {
            context: "loss grad target vs prediction".into(),
            expected: target.dim(),
            found: out.dim(),
        });
    }
    let dim = out.dim();
    let dir_err_vec: Vec<f64> = out
        .direction()
        .iter()
        .zip(target.direction())
        .map(|(a, b)| a - b)
        .collect();
    let dir_err = l2_norm(&dir_err_vec);
    let r = target.magnitude();

    let mut grad_dir = vec![0.0; dim];

    // direction term: phi_dir(R * ||e_d||)
    if dir_err > 0.0 {
        let z = r * dir_err;
        let coeff = spec.phi_dir.derivative(z) * r / dir_err;
        for (g, e) in grad_dir.iter_mut().zip(&dir_err_vec) {
            *g += coeff * e;
        }
    }

    // magnitude term: phi_mag(|e_R|)
    let mag_err = out.magnitude() - r;
    let grad_mag = if mag_err != 0.0 {
        spec.phi_mag.derivative(mag_err.abs()) * mag_err.signum()
    } else {
        0.0
    };

    // norm term: lambda * phi_norm(| ||d_hat|| - 1 |)
    if spec.lambda_norm > 0.0 {
        let norm = out.direction_norm();
        let viol = norm - 1.0;
        if viol != 0.0 && norm > 0.0 {
            let coeff =
                spec.lambda_norm * spec.phi_norm.derivative(viol.abs()) * viol.signum() / norm;
            for (g, d) in grad_dir.iter_mut().zip(out.direction()) {
                *g += coeff * d;
            }
        }
    }

    Ok((grad_mag, grad_dir))
}

/// The exact squared prediction error `||y_hat - y||^2`, computed directly
/// and via the expansion
///
/// ```text
/// ||R_hat e_d||^2 + e_R^2 + 2 R_hat e_R <e_d, d>
/// ```
///
/// The two routes must agree to 1e-12 (relative); disagreement is a bug, so
/// it panics in debug builds via `debug_assert`.
pub fn loss_exact_primal(target: &TargetDecomposition, out: &HcmOutput) -> Result<f64> {
    if target.dim() != out.dim() {
        return Err(Error::DimensionMismatch {
            context: "exact primal target vs prediction".into(),
            expected: target.dim(),
            found: out.dim(),
        });
    }
    let y = target.reconstruct();
    let y_hat = out.recompose();
    let direct: f64 = y_hat
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();

    let dir_err_vec: Vec<f64> = out
        .direction()
        .iter()
        .zip(target.direction())
        .map(|(a, b)| a - b)
        .collect();
    let mag_err = out.magnitude() - target.magnitude();
    let cross: f64 = dir_err_vec
        .iter()
        .zip(target.direction())
        .map(|(e, d)| e * d)
        .sum();
    let expanded = out.magnitude() * out.magnitude() * dir_err_vec.iter().map(|e| e * e).sum::<f64>()
        + mag_err * mag_err
        + 2.0 * out.magnitude() * mag_err * cross;

    debug_assert!(
        (direct - expanded).abs() <= 1e-12 * direct.abs().max(expanded.abs()).max(1.0),
        "exact-primal expansion mismatch: {direct} vs {expanded}"
    );
    Ok(direct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rng_for;
    use rand::Rng;

    fn target(y: &[f64]) -> TargetDecomposition {
        TargetDecomposition::decompose(y).unwrap()
    }

    #[test]
    fn phi_values() {
        assert_eq!(PhiFamily::PowerP(2.0).eval(3.0).unwrap(), 9.0);
        assert_eq!(PhiFamily::Huber(1.0).eval(1.0).unwrap(), 0.5);
        assert_eq!(PhiFamily::Huber(1.0).eval(2.0).unwrap(), 1.5);
        assert_eq!(PhiFamily::SmoothL1(1.0).eval(0.5).unwrap(), 0.125);
        assert!(PhiFamily::PowerP(2.0).eval(-0.1).is_err());
    }

    #[test]
    fn phi_families_are_continuous_at_branch_points() {
        for (fam, z) in [
            (PhiFamily::Huber(0.7), 0.7),
            (PhiFamily::SmoothL1(1.3), 1.3),
        ] {
            let below = fam.eval(z - 1e-9).unwrap();
            let above = fam.eval(z + 1e-9).unwrap();
            assert!((below - above).abs() < 1e-8);
        }
    }

    #[test]
    fn loss_total_perfect_prediction_is_zero() {
        let t = target(&[2.0, 0.0]);
        let out = HcmOutput::new(t.magnitude(), t.direction().to_vec()).unwrap();
        let spec = LossSpec::squared().with_lambda(1.0);
        let b = loss_total(&spec, &t, &out).unwrap();
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn loss_total_hand_computed_case() {
        // R = 2, d = (1, 0), R_hat = 2, d_hat = (1, 0.1), all-squared, lambda 1.
        let t = target(&[2.0, 0.0]);
        let out = HcmOutput::new(2.0, vec![1.0, 0.1]).unwrap();
        let spec = LossSpec::squared().with_lambda(1.0);
        let b = loss_total(&spec, &t, &out).unwrap();
        // dir: (2 * 0.1)^2 = 0.04
        assert!((b.dir_term - 0.04).abs() < 1e-12);
        assert_eq!(b.mag_term, 0.0);
        // norm: (sqrt(1.01) - 1)^2
        let expected_norm = (1.01f64.sqrt() - 1.0).powi(2);
        assert!((b.norm_term - expected_norm).abs() < 1e-12);
        assert!((b.norm_term - 2.481e-5).abs() < 1e-7);
        assert!((b.total - (0.04 + expected_norm)).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_kills_norm_term() {
        let t = target(&[1.0, 1.0]);
        let out = HcmOutput::new(3.0, vec![5.0, -2.0]).unwrap();
        let b = loss_total(&LossSpec::squared(), &t, &out).unwrap();
        assert_eq!(b.norm_term, 0.0);
    }

    #[test]
    fn loss_grad_zero_at_minimum() {
        let t = target(&[1.0, 2.0, 2.0]);
        let out = HcmOutput::new(t.magnitude(), t.direction().to_vec()).unwrap();
        let (gm, gd) = loss_grad(&LossSpec::squared().with_lambda(0.5), &t, &out).unwrap();
        assert_eq!(gm, 0.0);
        assert!(gd.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_grad_magnitude_branch() {
        // mag branch alone: R_hat = 3, R = 1, squared -> d/dR_hat = 4.
        let t = target(&[1.0, 0.0]);
        let out = HcmOutput::new(3.0, t.direction().to_vec()).unwrap();
        let (gm, _) = loss_grad(&LossSpec::squared(), &t, &out).unwrap();
        assert!((gm - 4.0).abs() < 1e-12);
    }

    fn fd_check(spec: &LossSpec, t: &TargetDecomposition, out: &HcmOutput) {
        let (gm, gd) = loss_grad(spec, t, out).unwrap();
        let h = 1e-5;
        let eval = |mag: f64, dir: &[f64]| -> f64 {
            let o = HcmOutput::new(mag, dir.to_vec()).unwrap();
            loss_total(spec, t, &o).unwrap().total
        };
        let fd_m = (eval(out.magnitude() + h, out.direction())
            - eval(out.magnitude() - h, out.direction()))
            / (2.0 * h);
        let tol = |a: f64, b: f64| 1e-4 * a.abs().max(b.abs()).max(1e-3);
        assert!(
            (fd_m - gm).abs() <= tol(fd_m, gm),
            "magnitude grad: fd {fd_m} vs {gm}"
        );
        for i in 0..out.dim() {
            let mut up = out.direction().to_vec();
            up[i] += h;
            let mut down = out.direction().to_vec();
            down[i] -= h;
            let fd = (eval(out.magnitude(), &up) - eval(out.magnitude(), &down)) / (2.0 * h);
            assert!(
                (fd - gd[i]).abs() <= tol(fd, gd[i]),
                "direction grad {i}: fd {fd} vs {}",
                gd[i]
            );
        }
    }

    #[test]
    fn loss_grad_matches_finite_differences_all_families() {
        let families = [
            PhiFamily::PowerP(2.0),
            PhiFamily::PowerP(1.5),
            PhiFamily::Huber(0.5),
            PhiFamily::SmoothL1(0.8),
        ];
        let mut rng = rng_for(31, 0);
        for _ in 0..1000 {
            let dim = rng.random_range(2..=4);
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            if l2_norm(&y) < 0.3 {
                continue;
            }
            let t = target(&y);
            let out = HcmOutput::new(
                rng.random_range(0.2..4.0),
                (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect(),
            )
            .unwrap();
            let spec = LossSpec {
                phi_dir: families[rng.random_range(0..families.len())],
                phi_mag: families[rng.random_range(0..families.len())],
                phi_norm: families[rng.random_range(0..families.len())],
                lambda_norm: rng.random_range(0.0..2.0),
            };
            fd_check(&spec, &t, &out);
        }
    }

    #[test]
    fn exact_primal_basic_cases() {
        let t = target(&[1.0, 0.0]);
        let perfect = HcmOutput::new(1.0, vec![1.0, 0.0]).unwrap();
        assert_eq!(loss_exact_primal(&t, &perfect).unwrap(), 0.0);

        // e_R = 0 kills the cross term: ||e_y||^2 = 0.01
        let out = HcmOutput::new(1.0, vec![1.0, 0.1]).unwrap();
        let v = loss_exact_primal(&t, &out).unwrap();
        assert!((v - 0.01).abs() < 1e-12);
    }

    #[test]
    fn relaxed_dir_term_equals_exact_primal_when_mag_exact() {
        // all-squared, e_R = 0: dir_term == exact primal (to fp tolerance).
        let mut rng = rng_for(37, 0);
        for _ in 0..1000 {
            let dim = rng.random_range(2..=5);
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
            if l2_norm(&y) < 0.3 {
                continue;
            }
            let t = target(&y);
            let d_hat: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            let out = HcmOutput::new(t.magnitude(), d_hat).unwrap();
            let b = loss_total(&LossSpec::squared(), &t, &out).unwrap();
            let exact = loss_exact_primal(&t, &out).unwrap();
            assert!(
                (b.dir_term - exact).abs() <= 1e-12 * exact.max(1.0),
                "{} vs {exact}",
                b.dir_term
            );
        }
    }

    #[test]
    fn relaxation_gap_is_linear_in_magnitude_error() {
        // Fix (R, d, d_hat); shrink e_R geometrically. The gap between the
        // relaxed loss (lambda = 0) and the exact primal must vanish at a
        // linear rate, i.e. log-log slope about 1.
        let t = target(&[2.0, 1.0, -1.0]);
        let d_hat = vec![0.7, 0.4, -0.5];
        let e0 = 0.5;
        let mut gaps = Vec::new();
        let mut errs = Vec::new();
        for k in 0..8 {
            let e = e0 * 0.5f64.powi(k);
            let out = HcmOutput::new(t.magnitude() + e, d_hat.clone()).unwrap();
            let relaxed = loss_total(&LossSpec::squared(), &t, &out).unwrap();
            let exact = loss_exact_primal(&t, &out).unwrap();
            // remove the shared magnitude term; compare directional parts
            let gap = (relaxed.dir_term + relaxed.mag_term - exact).abs();
            gaps.push(gap.ln());
            errs.push(e.ln());
        }
        // least-squares slope of ln(gap) on ln(e)
        let n = gaps.len() as f64;
        let mx = errs.iter().sum::<f64>() / n;
        let my = gaps.iter().sum::<f64>() / n;
        let sxy: f64 = errs
            .iter()
            .zip(&gaps)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum();
        let sxx: f64 = errs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        assert!(
            (slope - 1.0).abs() < 0.15,
            "gap decay slope {slope}, expected about 1"
        );
    }

    #[test]
    fn total_monotone_in_norm_violation() {
        // Holding everything else fixed, total is nondecreasing in
        // | ||d_hat|| - 1 | when lambda > 0.
        let t = target(&[1.0, 0.0]);
        let spec = LossSpec::squared().with_lambda(0.7);
        let mut prev = -1.0;
        for k in 0..20 {
            let norm = 1.0 + 0.1 * k as f64;
            let out = HcmOutput::new(1.0, vec![norm, 0.0]).unwrap();
            let b = loss_total(&spec, &t, &out).unwrap();
            assert!(b.total >= prev);
            prev = b.total;
        }
    }
}
