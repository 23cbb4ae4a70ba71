//! Dataset generators. All are pure functions of their parameters and seed.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use super::{one_hot, LabeledSet, Meta, NoiseProfile};
use crate::error::{Error, Result};
use crate::util::rng_for;

/// Input domain of the cubic dataset.
pub const CUBIC_DOMAIN: (f64, f64) = (-4.0, 4.0);

/// Default noise ramp of the cubic dataset: standard deviation rising
/// linearly from 0 at x = -2 to 20 at x = 2, zero outside.
pub const CUBIC_NOISE: NoiseProfile = NoiseProfile::PiecewiseLinearGaussian {
    x_lo: -2.0,
    x_hi: 2.0,
    sigma_lo: 0.0,
    sigma_hi: 20.0,
};

/// Cubic toy data: `x ~ U(-4, 4)`, `y = x^3 + xi` with heteroscedastic
/// Gaussian noise per [`CUBIC_NOISE`]. Targets are scalars; route them
/// through the duplication embedding before training.
pub fn gen_cubic(n: usize, seed: u64) -> Result<LabeledSet> {
    gen_cubic_with_noise(n, CUBIC_NOISE, seed)
}

/// Cubic toy data with an explicit noise profile (e.g. `NoiseProfile::None`
/// for a clean run).
pub fn gen_cubic_with_noise(n: usize, noise: NoiseProfile, seed: u64) -> Result<LabeledSet> {
    if n == 0 {
        return Err(Error::EmptyInput("cubic sample count".into()));
    }
    noise.validate()?;
    let mut rng = rng_for(seed, 0xC0B);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random_range(CUBIC_DOMAIN.0..CUBIC_DOMAIN.1);
        let sigma = noise.sigma_at(x);
        let y = if sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            x.powi(3) + sigma * z
        } else {
            x.powi(3)
        };
        inputs.push(vec![x]);
        targets.push(vec![y]);
    }
    let mut meta = Meta::new();
    meta.insert("generator".into(), json!("cubic"));
    meta.insert("n".into(), json!(n));
    meta.insert("seed".into(), json!(seed));
    meta.insert("noise".into(), serde_json::to_value(noise)?);
    meta.insert("domain".into(), json!([CUBIC_DOMAIN.0, CUBIC_DOMAIN.1]));
    LabeledSet::new(inputs, targets, meta)
}

/// Two interleaving half-circles with one-hot targets in `R^2`. The first
/// moon is the upper unit half-circle; the second is flipped and offset by
/// `(1, -0.5)`. Angles are evenly spaced including both endpoints, and
/// isotropic Gaussian jitter of scale `noise_std` is added to the inputs.
pub fn gen_two_moons(n: usize, noise_std: f64, seed: u64) -> Result<LabeledSet> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "two-moons sample count must be even and positive, got {n}"
        )));
    }
    if noise_std < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "jitter must be nonnegative, got {noise_std}"
        )));
    }
    let m = n / 2;
    let mut rng = rng_for(seed, 0x2008);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let angle = |i: usize| {
        if m == 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (m - 1) as f64
        }
    };
    for i in 0..m {
        let t = angle(i);
        inputs.push(vec![t.cos(), t.sin()]);
        targets.push(one_hot(0, 2)?);
    }
    for i in 0..m {
        let t = angle(i);
        inputs.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        targets.push(one_hot(1, 2)?);
    }
    if noise_std > 0.0 {
        for row in &mut inputs {
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += noise_std * z;
            }
        }
    }
    let mut meta = Meta::new();
    meta.insert("generator".into(), json!("two_moons"));
    meta.insert("n".into(), json!(n));
    meta.insert("noise_std".into(), json!(noise_std));
    meta.insert("seed".into(), json!(seed));
    LabeledSet::new(inputs, targets, meta)
}

/// Geometry of the blob testbed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlobParams {
    /// Number of in-distribution classes; class `i` is centered at
    /// `spacing * e_i` with unit-variance isotropic jitter.
    pub classes: usize,
    /// Distance from the origin to each class center, in cluster standard
    /// deviations.
    pub spacing: f64,
    /// The out-of-distribution cluster sits on the ray between the first
    /// two class centers at `ood_distance_factor * spacing * sqrt(2)` from
    /// the origin.
    pub ood_distance_factor: f64,
    /// Standard deviation of the out-of-distribution cluster.
    pub ood_std: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        BlobParams {
            classes: 4,
            spacing: 4.5,
            ood_distance_factor: 1.5,
            ood_std: 1.0,
        }
    }
}

impl BlobParams {
    pub fn class_centers(&self, input_dim: usize) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|i| {
                let mut c = vec![0.0; input_dim];
                c[i] = self.spacing;
                c
            })
            .collect()
    }

    pub fn ood_center(&self, input_dim: usize) -> Vec<f64> {
        let mut c = vec![0.0; input_dim];
        let coord = self.ood_distance_factor * self.spacing;
        c[0] = coord;
        c[1] = coord;
        c
    }

    /// Minimum distance from the OOD center to any class center.
    pub fn ood_separation(&self, input_dim: usize) -> f64 {
        let ood = self.ood_center(input_dim);
        self.class_centers(input_dim)
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&ood)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// In-distribution Gaussian class clusters with one-hot targets.
pub fn gen_blobs(n: usize, input_dim: usize, params: &BlobParams, seed: u64) -> Result<LabeledSet> {
    if n == 0 {
        return Err(Error::EmptyInput("blob sample count".into()));
    }
    if params.classes < 2 || input_dim < params.classes {
        return Err(Error::InvalidConfig(format!(
            "blobs need input_dim >= classes >= 2, got {} and {}",
            input_dim, params.classes
        )));
    }
    let centers = params.class_centers(input_dim);
    let mut rng = rng_for(seed, 0xB10B);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % params.classes;
        let x: Vec<f64> = centers[class]
            .iter()
            .map(|c| {
                let z: f64 = StandardNormal.sample(&mut rng);
                c + z
            })
            .collect();
        inputs.push(x);
        targets.push(one_hot(class, params.classes)?);
    }
    let mut meta = Meta::new();
    meta.insert("generator".into(), json!("blobs"));
    meta.insert("n".into(), json!(n));
    meta.insert("input_dim".into(), json!(input_dim));
    meta.insert("params".into(), serde_json::to_value(params)?);
    meta.insert("seed".into(), json!(seed));
    LabeledSet::new(inputs, targets, meta)
}

/// In-distribution clusters plus a far out-of-distribution cluster. The OOD
/// set is unlabeled (zero-width targets). The OOD center is enforced to sit
/// at least 6 cluster standard deviations from every class center.
pub fn gen_blobs_ood(
    n_id: usize,
    n_ood: usize,
    input_dim: usize,
    params: &BlobParams,
    seed: u64,
) -> Result<(LabeledSet, LabeledSet)> {
    if n_ood == 0 {
        return Err(Error::EmptyInput("ood sample count".into()));
    }
    let id_set = gen_blobs(n_id, input_dim, params, seed)?;
    let separation = params.ood_separation(input_dim);
    if separation < 6.0 {
        return Err(Error::InvalidConfig(format!(
            "ood center only {separation:.2} cluster stds from the nearest class center; need >= 6"
        )));
    }
    let ood_center = params.ood_center(input_dim);
    let mut rng = rng_for(seed, 0x00D);
    let mut inputs = Vec::with_capacity(n_ood);
    for _ in 0..n_ood {
        inputs.push(
            ood_center
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + params.ood_std * z
                })
                .collect(),
        );
    }
    let mut meta = Meta::new();
    meta.insert("generator".into(), json!("blobs_ood"));
    meta.insert("n".into(), json!(n_ood));
    meta.insert("input_dim".into(), json!(input_dim));
    meta.insert("params".into(), serde_json::to_value(params)?);
    meta.insert("seed".into(), json!(seed));
    meta.insert("ood_separation".into(), json!(separation));
    let ood_set = LabeledSet::new(inputs, vec![vec![]; n_ood], meta)?;
    Ok((id_set, ood_set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::mean;

    #[test]
    fn cubic_noise_free_region_is_exact() {
        let set = gen_cubic(4000, 3).unwrap();
        for i in 0..set.len() {
            let x = set.input(i)[0];
            if !(-2.0..=2.0).contains(&x) {
                assert_eq!(set.target(i)[0], x.powi(3), "noise outside the ramp");
            }
        }
    }

    #[test]
    fn cubic_noise_scale_near_ramp_top() {
        // Empirical std of y - x^3 in a thin slab near x = 2 should be
        // within 5% of 20.
        let set = gen_cubic(100_000, 5).unwrap();
        let mut residuals = Vec::new();
        for i in 0..set.len() {
            let x = set.input(i)[0];
            if (1.9..=2.0).contains(&x) {
                residuals.push(set.target(i)[0] - x.powi(3));
            }
        }
        assert!(residuals.len() > 500);
        let m = mean(&residuals);
        let var = residuals.iter().map(|r| (r - m) * (r - m)).sum::<f64>()
            / (residuals.len() - 1) as f64;
        let sd = var.sqrt();
        // the slab midpoint has sigma = 5 * (1.95 + 2) = 19.75
        assert!(
            (sd - 19.75).abs() / 19.75 < 0.05,
            "slab std {sd}, expected about 19.75"
        );
    }

    #[test]
    fn cubic_determinism() {
        let a = gen_cubic(100, 11).unwrap();
        let b = gen_cubic(100, 11).unwrap();
        assert_eq!(a.inputs(), b.inputs());
        assert_eq!(a.targets(), b.targets());
    }

    #[test]
    fn moons_endpoint_and_balance() {
        let set = gen_two_moons(100, 0.0, 1).unwrap();
        // first moon point at angle 0 is (1, 0), class 0
        assert!((set.input(0)[0] - 1.0).abs() < 1e-15);
        assert!(set.input(0)[1].abs() < 1e-15);
        assert_eq!(set.target(0), &[1.0, 0.0]);
        let class0 = set.targets().iter().filter(|t| t[0] == 1.0).count();
        assert_eq!(class0, 50);
    }

    #[test]
    fn moons_centroids_match_half_circle() {
        // The mean of a jittered half-circle: x-centroid 0, y-centroid 2/pi
        // for the first moon (by Riemann symmetry of the angle grid), within
        // three standard errors of the jitter.
        let n = 20_000;
        let noise = 0.1;
        let set = gen_two_moons(n, noise, 9).unwrap();
        let m = n / 2;
        let xs: Vec<f64> = (0..m).map(|i| set.input(i)[0]).collect();
        let ys: Vec<f64> = (0..m).map(|i| set.input(i)[1]).collect();
        let se = 3.0 * noise / (m as f64).sqrt() + 1e-3; // grid bias margin
        assert!(mean(&xs).abs() < se, "x centroid {}", mean(&xs));
        assert!(
            (mean(&ys) - 2.0 / std::f64::consts::PI).abs() < se,
            "y centroid {}",
            mean(&ys)
        );
    }

    #[test]
    fn moons_rejects_odd_counts() {
        assert!(gen_two_moons(101, 0.1, 0).is_err());
    }

    #[test]
    fn blobs_ood_separation_enforced() {
        let params = BlobParams::default();
        let (_, ood) = gen_blobs_ood(40, 10, 8, &params, 3).unwrap();
        let sep = ood.meta.get("ood_separation").unwrap().as_f64().unwrap();
        assert!(sep >= 6.0);

        let close = BlobParams {
            ood_distance_factor: 0.5,
            ..BlobParams::default()
        };
        assert!(gen_blobs_ood(40, 10, 8, &close, 3).is_err());
    }

    #[test]
    fn blobs_deterministic_and_balanced() {
        let params = BlobParams::default();
        let (a, ao) = gen_blobs_ood(100, 20, 8, &params, 5).unwrap();
        let (b, bo) = gen_blobs_ood(100, 20, 8, &params, 5).unwrap();
        assert_eq!(a.inputs(), b.inputs());
        assert_eq!(ao.inputs(), bo.inputs());
        let class0 = a.targets().iter().filter(|t| t[0] == 1.0).count();
        assert_eq!(class0, 25);
        assert_eq!(ao.target_dim(), 0);
    }

    /// Sufficient linear-separability check: every point is on its own
    /// center's side of the perpendicular bisector for every class pair.
    /// A perceptron fallback handles the rare crossings.
    fn pairwise_separable(set: &LabeledSet, classes: usize) -> bool {
        for a in 0..classes {
            for b in (a + 1)..classes {
                let pts: Vec<(Vec<f64>, f64)> = (0..set.len())
                    .filter_map(|i| {
                        let t = set.target(i);
                        if t[a] == 1.0 {
                            Some((set.input(i).to_vec(), 1.0))
                        } else if t[b] == 1.0 {
                            Some((set.input(i).to_vec(), -1.0))
                        } else {
                            None
                        }
                    })
                    .collect();
                // perceptron with an update budget; converges iff separable
                let dim = pts[0].0.len();
                let mut w = vec![0.0; dim + 1];
                let mut updates = 0;
                loop {
                    let mut clean = true;
                    for (x, label) in &pts {
                        let score: f64 =
                            w[..dim].iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + w[dim];
                        if score * label <= 0.0 {
                            for (wi, xi) in w[..dim].iter_mut().zip(x) {
                                *wi += label * xi;
                            }
                            w[dim] += label;
                            clean = false;
                            updates += 1;
                            if updates > 50_000 {
                                return false;
                            }
                        }
                    }
                    if clean {
                        break;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn blobs_id_classes_linearly_separable_across_seeds() {
        let params = BlobParams::default();
        let mut separable = 0;
        for seed in 0..100 {
            let set = gen_blobs(200, 8, &params, seed).unwrap();
            if pairwise_separable(&set, params.classes) {
                separable += 1;
            }
        }
        assert!(separable >= 99, "only {separable}/100 seeds separable");
    }
}
