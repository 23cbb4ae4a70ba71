//! Evaluation metrics: k-sigma coverage, regression expected calibration
//! error, Pearson/Spearman correlation, reported RMSE, and the ranking
//! metrics (AUROC, FPR at 95% TPR) used for out-of-distribution studies.
//!
//! Everything operates on `(u_cal, r)` pairs: a calibrated uncertainty and a
//! per-sample RMSE, optionally tagged with an out-of-distribution label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPair {
    /// Calibrated uncertainty, nonnegative.
    pub u_cal: f64,
    /// Per-sample RMSE of the prediction vector, nonnegative.
    pub r: f64,
    /// Out-of-distribution label, when the study has one.
    pub ood: Option<bool>,
}

impl EvalPair {
    pub fn new(u_cal: f64, r: f64) -> Self {
        EvalPair {
            u_cal,
            r,
            ood: None,
        }
    }

    pub fn with_ood(u_cal: f64, r: f64, ood: bool) -> Self {
        EvalPair {
            u_cal,
            r,
            ood: Some(ood),
        }
    }
}

/// Flat metrics record for one evaluation run. Optional entries stay `null`
/// in JSON (and empty in CSV) when the study has no OOD labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cov_1s: f64,
    pub cov_2s: f64,
    pub cov_3s: f64,
    pub ece_reg: f64,
    pub pearson: f64,
    pub spearman: f64,
    pub rmse: f64,
    pub auroc: Option<f64>,
    pub fpr_at_95tpr: Option<f64>,
}

impl MetricsReport {
    /// CSV header matching [`MetricsReport::to_csv_row`].
    pub const CSV_HEADER: &'static str =
        "cov_1s,cov_2s,cov_3s,ece_reg,pearson,spearman,rmse,auroc,fpr_at_95tpr";

    /// One CSV row in the fixed column order; options render as empty cells.
    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.cov_1s,
            self.cov_2s,
            self.cov_3s,
            self.ece_reg,
            self.pearson,
            self.spearman,
            self.rmse,
            opt(self.auroc),
            opt(self.fpr_at_95tpr)
        )
    }
}

/// Builds the full report from pairs. AUROC and FPR@95TPR appear when both
/// OOD classes are present, scored by `u_cal` (higher = more OOD).
pub fn build_report(pairs: &[EvalPair], bins: usize) -> Result<MetricsReport> {
    let (auroc_v, fpr_v) = if pairs.iter().any(|p| p.ood == Some(true))
        && pairs.iter().any(|p| p.ood == Some(false))
    {
        let scores: Vec<f64> = pairs
            .iter()
            .filter(|p| p.ood.is_some())
            .map(|p| p.u_cal)
            .collect();
        let labels: Vec<bool> = pairs.iter().filter_map(|p| p.ood).collect();
        (
            Some(auroc(&scores, &labels)?),
            Some(fpr_at_95tpr(&scores, &labels)?),
        )
    } else {
        (None, None)
    };
    Ok(MetricsReport {
        cov_1s: coverage_at_k(pairs, 1)?,
        cov_2s: coverage_at_k(pairs, 2)?,
        cov_3s: coverage_at_k(pairs, 3)?,
        ece_reg: ece_reg(pairs, bins)?,
        pearson: pearson(pairs)?,
        spearman: spearman(pairs)?,
        rmse: rmse_report(pairs)?,
        auroc: auroc_v,
        fpr_at_95tpr: fpr_v,
    })
}

/// Fraction of samples with `r <= k * u_cal` (inclusive boundary).
pub fn coverage_at_k(pairs: &[EvalPair], k: u32) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("coverage".into()));
    }
    let hits = pairs
        .iter()
        .filter(|p| p.r <= k as f64 * p.u_cal)
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Regression expected calibration error: samples are partitioned into
/// `bins` equal-width bins over the observed `u_cal` range; each bin
/// contributes `|S_b| * | mean(u_cal) - mean(r) |`, and the total is divided
/// by the number of samples. Empty bins contribute nothing.
pub fn ece_reg(pairs: &[EvalPair], bins: usize) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("ece_reg".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("ece_reg needs at least one bin".into()));
    }
    let lo = pairs.iter().map(|p| p.u_cal).fold(f64::INFINITY, f64::min);
    let hi = pairs
        .iter()
        .map(|p| p.u_cal)
        .fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut count = vec![0usize; bins];
    let mut sum_u = vec![0.0; bins];
    let mut sum_r = vec![0.0; bins];
    for p in pairs {
        let b = if width > 0.0 {
            (((p.u_cal - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        count[b] += 1;
        sum_u[b] += p.u_cal;
        sum_r[b] += p.r;
    }
    let mut total = 0.0;
    for b in 0..bins {
        if count[b] > 0 {
            let n = count[b] as f64;
            total += n * (sum_u[b] / n - sum_r[b] / n).abs();
        }
    }
    Ok(total / pairs.len() as f64)
}

fn pearson_raw(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::EmptyInput("correlation needs at least 2 points".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Uncalibratable("correlation undefined: zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Average ranks (1-based), ties averaged.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("non-NaN"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Product-moment correlation of `(u_cal, r)`.
pub fn pearson(pairs: &[EvalPair]) -> Result<f64> {
    let u: Vec<f64> = pairs.iter().map(|p| p.u_cal).collect();
    let r: Vec<f64> = pairs.iter().map(|p| p.r).collect();
    pearson_raw(&u, &r)
}

/// Rank correlation: Pearson over average ranks.
pub fn spearman(pairs: &[EvalPair]) -> Result<f64> {
    let u: Vec<f64> = pairs.iter().map(|p| p.u_cal).collect();
    let r: Vec<f64> = pairs.iter().map(|p| p.r).collect();
    spearman_raw(&u, &r)
}

/// Spearman over raw slices (used by the experiments for non-metric pairs
/// like boundary distances).
pub fn spearman_raw(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson_raw(&average_ranks(x), &average_ranks(y))
}

/// The reported accuracy number: the mean of the per-sample RMSEs.
pub fn rmse_report(pairs: &[EvalPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("rmse".into()));
    }
    Ok(pairs.iter().map(|p| p.r).sum::<f64>() / pairs.len() as f64)
}

/// Mann-Whitney AUROC: `P(score_pos > score_neg) + 0.5 P(equal)` where
/// positives are OOD and higher scores mean more OOD. Computed via average
/// ranks in O(n log n).
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "auroc scores vs labels".into(),
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::EmptyInput(
            "auroc needs both classes present".into(),
        ));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// False-positive rate at 95% true-positive rate: the largest threshold t
/// with `mean(score_pos >= t) >= 0.95` (the first one reached scanning from
/// above), then `FPR = mean(score_neg >= t)`.
pub fn fpr_at_95tpr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "fpr scores vs labels".into(),
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let mut pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l)
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| !**l)
        .map(|(s, _)| *s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyInput("fpr needs both classes present".into()));
    }
    pos.sort_by(|a, b| b.partial_cmp(a).expect("non-NaN"));
    // smallest count of positives at or above the threshold reaching 95%
    let need = (0.95 * pos.len() as f64).ceil() as usize;
    let threshold = pos[need.max(1) - 1];
    let fp = neg.iter().filter(|s| **s >= threshold).count();
    Ok(fp as f64 / neg.len() as f64)
}
