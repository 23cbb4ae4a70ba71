//! Mixup augmentation: convex combinations of inputs and targets.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::LabeledSet;
use crate::error::{Error, Result};
use crate::util::rng_for;

/// How mixed samples are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixupMode {
    /// Two-sample interpolation with `lambda ~ Beta(alpha, alpha)`.
    Pairwise { alpha: f64 },
    /// Convex combination of `k` samples with weights from a symmetric
    /// Dirichlet of concentration `alpha`.
    Dirichlet { k: usize, alpha: f64 },
}

impl MixupMode {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            MixupMode::Pairwise { alpha } => *alpha > 0.0,
            MixupMode::Dirichlet { k, alpha } => *k >= 2 && *alpha > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad mixup mode: {self:?}")))
        }
    }

    fn min_batch(&self) -> usize {
        match self {
            MixupMode::Pairwise { .. } => 2,
            MixupMode::Dirichlet { k, .. } => *k,
        }
    }
}

/// Produces a mixed batch of the same size as the input batch.
///
/// Pairwise mode pairs each slot with a random partner at weight
/// `lambda ~ Beta(alpha, alpha)` (the slot's own sample keeps weight
/// `lambda`, so `lambda = 1` returns it unchanged). Dirichlet mode mixes
/// `k` randomly chosen samples under Dirichlet weights. For one-hot source
/// targets the mixed target lies strictly inside the unit sphere unless the
/// weights degenerate onto a single class.
pub fn mixup(batch: &LabeledSet, mode: MixupMode, seed: u64) -> Result<LabeledSet> {
    mode.validate()?;
    let n = batch.len();
    if n < mode.min_batch() {
        return Err(Error::InvalidConfig(format!(
            "mixup needs a batch of at least {}, got {n}",
            mode.min_batch()
        )));
    }
    let mut rng = rng_for(seed, 0x313C);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    match mode {
        MixupMode::Pairwise { alpha } => {
            let beta = Beta::new(alpha, alpha)
                .map_err(|e| Error::InvalidConfig(format!("beta({alpha}): {e}")))?;
            for slot in 0..n {
                let lambda = beta.sample(&mut rng);
                let partner = rng.random_range(0..n);
                inputs.push(convex2(batch.input(slot), batch.input(partner), lambda));
                targets.push(convex2(batch.target(slot), batch.target(partner), lambda));
            }
        }
        MixupMode::Dirichlet { k, alpha } => {
            // symmetric Dirichlet via normalized i.i.d. Gamma(alpha, 1) draws
            let gamma = Gamma::new(alpha, 1.0)
                .map_err(|e| Error::InvalidConfig(format!("dirichlet({k}, {alpha}): {e}")))?;
            for _ in 0..n {
                let mut weights: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
                let total: f64 = weights.iter().sum();
                if total > 0.0 {
                    weights.iter_mut().for_each(|w| *w /= total);
                } else {
                    weights.fill(1.0 / k as f64);
                }
                let picks: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
                inputs.push(convex_k(batch.inputs(), &picks, &weights));
                targets.push(convex_k(batch.targets(), &picks, &weights));
            }
        }
    }
    LabeledSet::new(inputs, targets, batch.meta.clone())
}

fn convex2(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
        .collect()
}

fn convex_k(rows: &[Vec<f64>], picks: &[usize], weights: &[f64]) -> Vec<f64> {
    let dim = rows[0].len();
    let mut out = vec![0.0; dim];
    for (&p, &w) in picks.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(&rows[p]) {
            *o += w * v;
        }
    }
    out
}
