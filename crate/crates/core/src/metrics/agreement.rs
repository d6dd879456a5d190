//! Agreement statistics between two raters or methods.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::MetricsError;

/// Cohen's kappa from a square contingency table (rows: rater A, columns: rater B).
pub fn kappa_from_matrix(matrix: &[Vec<u64>]) -> Result<f64, MetricsError> {
    let n_classes = matrix.len();
    if matrix.iter().any(|row| row.len() != n_classes) {
        return Err(MetricsError::InvalidInput("contingency table must be square".into()));
    }
    let total: u64 = matrix.iter().flatten().sum();
    if total == 0 {
        return Err(MetricsError::InsufficientData("empty contingency table".into()));
    }
    let n = total as f64;
    let observed = (0..n_classes).map(|i| matrix[i][i]).sum::<u64>() as f64 / n;
    let chance = (0..n_classes)
        .map(|i| {
            let row: u64 = matrix[i].iter().sum();
            let col: u64 = matrix.iter().map(|r| r[i]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum::<f64>();
    if chance >= 1.0 {
        return Err(MetricsError::DegenerateAgreement);
    }
    Ok((observed - chance) / (1.0 - chance))
}

/// Kappa for binary decisions given the 2×2 counts against the truth.
pub fn binary_kappa(tp: u64, fp: u64, fn_: u64, tn: u64) -> Result<f64, MetricsError> {
    kappa_from_matrix(&[vec![tp, fn_], vec![fp, tn]])
}

/// Cohen's kappa between two label sequences over their joint alphabet.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::InsufficientData("no labels".into()));
    }
    let mut alphabet: BTreeMap<&T, usize> = BTreeMap::new();
    for label in a.iter().chain(b) {
        let next = alphabet.len();
        alphabet.entry(label).or_insert(next);
    }
    let n = alphabet.len();
    let mut matrix = vec![vec![0u64; n]; n];
    for (x, y) in a.iter().zip(b) {
        matrix[alphabet[x]][alphabet[y]] += 1;
    }
    kappa_from_matrix(&matrix)
}

/// Two-way random-effects, absolute-agreement, single-measure ICC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IccResult {
    pub icc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ms_rows: f64,
    pub ms_cols: f64,
    pub ms_error: f64,
}

/// ICC(2,1) of an `n subjects × k raters` matrix with a 95% confidence
/// interval from the F-distribution (Satterthwaite degrees of freedom).
/// Both interval bounds are NaN when the approximation is undefined.
pub fn icc_absolute_agreement(ratings: &[Vec<f64>]) -> Result<IccResult, MetricsError> {
    let n = ratings.len();
    if n < 2 {
        return Err(MetricsError::InsufficientData(format!("need at least 2 subjects, got {n}")));
    }
    let k = ratings[0].len();
    if k < 2 {
        return Err(MetricsError::InsufficientData(format!("need at least 2 raters, got {k}")));
    }
    if let Some(row) = ratings.iter().find(|r| r.len() != k) {
        return Err(MetricsError::LengthMismatch(row.len(), k));
    }
    if ratings.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MetricsError::InvalidInput("ratings must be finite".into()));
    }

    let (nf, kf) = (n as f64, k as f64);
    let grand = ratings.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = ratings.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| ratings.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();

    let ss_total: f64 = ratings.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_error = (ss_total - ss_rows - ss_cols).max(0.0);

    let df_rows = nf - 1.0;
    let df_cols = kf - 1.0;
    let df_error = df_rows * df_cols;
    let msr = ss_rows / df_rows;
    let msc = ss_cols / df_cols;
    let mse = ss_error / df_error;

    let denom = msr + (kf - 1.0) * mse + kf * (msc - mse) / nf;
    if !(denom > 0.0) {
        return Err(MetricsError::DegenerateVariance);
    }
    let icc = (msr - mse) / denom;
    let (ci_low, ci_high) = icc_confidence_interval(icc, nf, kf, msr, msc, mse);
    Ok(IccResult { icc, ci_low, ci_high, ms_rows: msr, ms_cols: msc, ms_error: mse })
}

fn icc_confidence_interval(icc: f64, n: f64, k: f64, msr: f64, msc: f64, mse: f64) -> (f64, f64) {
    const ALPHA: f64 = 0.05;
    if icc >= 1.0 || mse <= 0.0 {
        return (icc, icc);
    }
    let a = k * icc / (n * (1.0 - icc));
    let b = 1.0 + k * icc * (n - 1.0) / (n * (1.0 - icc));
    let v = (a * msc + b * mse).powi(2)
        / ((a * msc).powi(2) / (k - 1.0) + (b * mse).powi(2) / ((n - 1.0) * (k - 1.0)));
    let quantile = |d1: f64, d2: f64| {
        FisherSnedecor::new(d1, d2)
            .map(|f| f.inverse_cdf(1.0 - ALPHA / 2.0))
            .unwrap_or(f64::NAN)
    };
    let f_upper = quantile(n - 1.0, v);
    let f_lower = quantile(v, n - 1.0);
    let c = k * msc + (k * n - k - n) * mse;
    let low = n * (msr - f_upper * mse) / (f_upper * c + n * msr);
    let high = n * (f_lower * msr - mse) / (c + n * f_lower * msr);
    // The approximation breaks down for strongly negative estimates.
    if low.is_finite() && high.is_finite() && low <= icc && icc <= high {
        (low, high)
    } else {
        (f64::NAN, f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlandAltman {
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
}

/// Bias and 95% limits of agreement of `measured − reference`.
pub fn bland_altman(pairs: &[(f64, f64)]) -> Result<BlandAltman, MetricsError> {
    if pairs.len() < 2 {
        return Err(MetricsError::InsufficientData(format!("need at least 2 pairs, got {}", pairs.len())));
    }
    let diffs: Vec<f64> = pairs.iter().map(|(m, r)| m - r).collect();
    let n = diffs.len() as f64;
    let mean_diff = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (n - 1.0);
    let sd_diff = var.sqrt();
    Ok(BlandAltman {
        mean_diff,
        sd_diff,
        loa_low: mean_diff - 1.96 * sd_diff,
        loa_high: mean_diff + 1.96 * sd_diff,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionReport<T> {
    pub classes: Vec<T>,
    /// Rows are truth, columns are predictions, in `classes` order.
    pub matrix: Vec<Vec<u64>>,
    pub f1: Vec<f64>,
    /// `None` when kappa is undefined (a single label on both sides).
    pub kappa: Option<f64>,
}

pub fn confusion_f1<T: PartialEq + Clone + std::fmt::Debug>(
    predicted: &[T],
    truth: &[T],
    classes: &[T],
) -> Result<ConfusionReport<T>, MetricsError> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(predicted.len(), truth.len()));
    }
    let index = |label: &T| {
        classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| MetricsError::InvalidInput(format!("label {label:?} not in class list")))
    };
    let n = classes.len();
    let mut matrix = vec![vec![0u64; n]; n];
    for (p, t) in predicted.iter().zip(truth) {
        matrix[index(t)?][index(p)?] += 1;
    }
    let f1 = (0..n)
        .map(|c| {
            let tp = matrix[c][c] as f64;
            let fp = (0..n).filter(|&r| r != c).map(|r| matrix[r][c]).sum::<u64>() as f64;
            let fn_ = (0..n).filter(|&j| j != c).map(|j| matrix[c][j]).sum::<u64>() as f64;
            let denom = 2.0 * tp + fp + fn_;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .collect();
    let kappa = if predicted.is_empty() { None } else { kappa_from_matrix(&matrix).ok() };
    Ok(ConfusionReport { classes: classes.to_vec(), matrix, f1, kappa })
}
