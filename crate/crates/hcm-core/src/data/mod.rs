//! Synthetic dataset generation, perturbation, augmentation, and CSV
//! persistence.

mod augment;
mod csvio;
mod generators;

pub use augment::{mixup, MixupMode};
pub use csvio::{csv_read, csv_write};
pub use generators::{
    gen_blobs, gen_blobs_ood, gen_cubic, gen_cubic_with_noise, gen_two_moons, BlobParams,
    CUBIC_DOMAIN, CUBIC_NOISE,
};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::head::embed_scalar;
use crate::util::rng_for;

/// Metadata map recording generator provenance; serialized as a JSON sidecar
/// next to CSV files. Ordered so serialization is deterministic.
pub type Meta = BTreeMap<String, serde_json::Value>;

/// Additive noise description attached to generated data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseProfile {
    None,
    /// Target noise with standard deviation ramping linearly from
    /// `sigma_lo` at `x_lo` to `sigma_hi` at `x_hi`, zero outside.
    PiecewiseLinearGaussian {
        x_lo: f64,
        x_hi: f64,
        sigma_lo: f64,
        sigma_hi: f64,
    },
    /// Input perturbation `x' = x + a * eps` with `a ~ U(0, a_max)` and
    /// `eps ~ N(0, I)`.
    AdditiveInputGaussian { a_max: f64 },
}

impl NoiseProfile {
    /// The noise standard deviation this profile assigns at scalar input
    /// `x`; zero outside the ramp interval.
    pub fn sigma_at(&self, x: f64) -> f64 {
        match self {
            NoiseProfile::None | NoiseProfile::AdditiveInputGaussian { .. } => 0.0,
            NoiseProfile::PiecewiseLinearGaussian {
                x_lo,
                x_hi,
                sigma_lo,
                sigma_hi,
            } => {
                if x < *x_lo || x > *x_hi {
                    0.0
                } else {
                    sigma_lo + (sigma_hi - sigma_lo) * (x - x_lo) / (x_hi - x_lo)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseProfile::PiecewiseLinearGaussian {
                x_lo,
                x_hi,
                sigma_lo,
                sigma_hi,
            } => {
                let ordered = x_hi > x_lo;
                if !ordered || *sigma_lo < 0.0 || *sigma_hi < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "bad piecewise noise profile: {self:?}"
                    )));
                }
            }
            NoiseProfile::AdditiveInputGaussian { a_max } => {
                if *a_max < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "perturbation amplitude must be nonnegative, got {a_max}"
                    )));
                }
            }
            NoiseProfile::None => {}
        }
        Ok(())
    }
}

/// An input/target table plus generator provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    pub meta: Meta,
}

impl LabeledSet {
    /// Builds a set after validating width consistency. Targets may be
    /// zero-width for unlabeled data (e.g. out-of-distribution probes).
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, meta: Meta) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("labeled set inputs".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                context: "labeled set inputs vs targets".into(),
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        let in_w = inputs[0].len();
        let tg_w = targets[0].len();
        for (i, row) in inputs.iter().enumerate() {
            if row.len() != in_w {
                return Err(Error::DimensionMismatch {
                    context: format!("input row {i}"),
                    expected: in_w,
                    found: row.len(),
                });
            }
        }
        for (i, row) in targets.iter().enumerate() {
            if row.len() != tg_w {
                return Err(Error::DimensionMismatch {
                    context: format!("target row {i}"),
                    expected: tg_w,
                    found: row.len(),
                });
            }
        }
        Ok(LabeledSet {
            inputs,
            targets,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn target_dim(&self) -> usize {
        self.targets[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i]
    }

    /// Copies out the rows at `indices` (meta carried over).
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledSet> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("subset indices".into()));
        }
        LabeledSet::new(
            indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            indices.iter().map(|&i| self.targets[i].clone()).collect(),
            self.meta.clone(),
        )
    }

    /// Duplicates scalar targets into two coordinates so the decomposition
    /// head applies. Errors unless targets are width 1.
    pub fn embed_scalar_targets(&self) -> Result<LabeledSet> {
        if self.target_dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "scalar embedding".into(),
                expected: 1,
                found: self.target_dim(),
            });
        }
        let targets = self
            .targets
            .iter()
            .map(|t| embed_scalar(t[0]).to_vec())
            .collect();
        LabeledSet::new(self.inputs.clone(), targets, self.meta.clone())
    }

    /// Shifts every target entry by a constant; an escape hatch for data
    /// containing exact-zero targets, which have no direction.
    pub fn shift_targets(&self, offset: f64) -> Result<LabeledSet> {
        let targets = self
            .targets
            .iter()
            .map(|t| t.iter().map(|v| v + offset).collect())
            .collect();
        let mut meta = self.meta.clone();
        meta.insert("target_shift".into(), serde_json::json!(offset));
        LabeledSet::new(self.inputs.clone(), targets, meta)
    }

    /// Deterministic shuffled split into train/validation/test by the given
    /// fractions (test takes the remainder).
    pub fn split3(
        &self,
        train_frac: f64,
        val_frac: f64,
        seed: u64,
    ) -> Result<(LabeledSet, LabeledSet, LabeledSet)> {
        if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bad split fractions {train_frac}/{val_frac}"
            )));
        }
        let n = self.len();
        let mut indices: Vec<usize> = (0..n).collect();
        let mut rng = rng_for(seed, 0xF15);
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            indices.swap(i, j);
        }
        let n_train = ((n as f64) * train_frac) as usize;
        let n_val = ((n as f64) * val_frac) as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(Error::InvalidConfig(format!(
                "split leaves an empty part: n = {n}, fractions {train_frac}/{val_frac}"
            )));
        }
        Ok((
            self.subset(&indices[..n_train])?,
            self.subset(&indices[n_train..n_train + n_val])?,
            self.subset(&indices[n_train + n_val..])?,
        ))
    }
}

/// Unit basis vector for class `label` out of `classes`. Under the
/// magnitude-direction decomposition this has magnitude exactly 1.
pub fn one_hot(label: usize, classes: usize) -> Result<Vec<f64>> {
    if classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "one-hot needs at least 2 classes, got {classes}"
        )));
    }
    if label >= classes {
        return Err(Error::InvalidConfig(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    Ok(v)
}

/// Per-sample input perturbation `x' = x + a * eps` with `a ~ U(0, a_max)`
/// and `eps ~ N(0, I)`. Targets are carried over bit-exactly; the drawn
/// amplitudes are recorded in the meta map under `"perturb_a"`.
pub fn perturb_inputs(set: &LabeledSet, a_max: f64, seed: u64) -> Result<LabeledSet> {
    if a_max < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "perturbation amplitude must be nonnegative, got {a_max}"
        )));
    }
    let mut rng = rng_for(seed, 0xA11);
    let mut inputs = Vec::with_capacity(set.len());
    let mut amplitudes = Vec::with_capacity(set.len());
    for row in set.inputs() {
        let a = if a_max > 0.0 {
            rng.random_range(0.0..a_max)
        } else {
            0.0
        };
        amplitudes.push(a);
        inputs.push(
            row.iter()
                .map(|x| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    x + a * eps
                })
                .collect(),
        );
    }
    let mut meta = set.meta.clone();
    meta.insert(
        "perturbation".into(),
        serde_json::to_value(NoiseProfile::AdditiveInputGaussian { a_max })?,
    );
    meta.insert("perturb_seed".into(), serde_json::json!(seed));
    meta.insert("perturb_a".into(), serde_json::json!(amplitudes));
    LabeledSet::new(inputs, set.targets().to_vec(), meta)
}
