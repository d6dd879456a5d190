//! OKS-thresholded average precision and recall over the 14 keypoints.
//!
//! Each keypoint is evaluated independently. At threshold `t` a detection
//! whose OKS against its ground truth exceeds `t` is a true positive (each
//! ground truth matches at most once); everything else is a false
//! positive and unmatched ground truths are false negatives.
//!
//! Scored detections are ranked by confidence and AP is the all-points
//! interpolated area under the precision-recall curve, with equal scores
//! admitted together as one step. When no detection carries a score there
//! is a single operating point, so AP is its precision; with exactly one
//! detection per ground truth that equals the recall (accuracy).

use std::cmp::Ordering;

use super::{oks, KConstants, MetricsError, OksInput};
use crate::geometry::{HipSide, Landmark, PelvisKeypoints};

/// `0.50, 0.55, …, 0.95`.
pub fn default_oks_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthInstance {
    pub keypoints: PelvisKeypoints,
    /// Square root of the pelvic bounding-box area.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDetection {
    /// Index into the ground-truth list of the radiograph this detection belongs to.
    pub gt_index: usize,
    pub keypoints: PelvisKeypoints,
    pub score: Option<f64>,
}

/// One detection of one keypoint, reduced to its similarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OksRecord {
    pub gt_index: usize,
    pub score: Option<f64>,
    pub oks: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRow {
    pub threshold: f64,
    /// Mean over keypoints.
    pub ap: f64,
    pub ar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApReport {
    pub map: f64,
    pub mar: f64,
    pub per_threshold: Vec<ThresholdRow>,
    /// `(side, landmark, AP averaged over thresholds, AR averaged over thresholds)`.
    pub per_keypoint: Vec<(HipSide, Landmark, f64, f64)>,
}

fn validate_thresholds(thresholds: &[f64]) -> Result<(), MetricsError> {
    if thresholds.is_empty() {
        return Err(MetricsError::InvalidInput("threshold list is empty".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(MetricsError::InvalidInput(format!("threshold {t} outside (0, 1)")));
    }
    Ok(())
}

/// AP and AR of one keypoint at one threshold.
pub fn average_precision_recall(
    records: &[OksRecord],
    num_gt: usize,
    threshold: f64,
) -> Result<(f64, f64), MetricsError> {
    if num_gt == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    if let Some(r) = records.iter().find(|r| r.gt_index >= num_gt) {
        return Err(MetricsError::InvalidInput(format!("gt_index {} out of range", r.gt_index)));
    }
    let scored = records.iter().filter(|r| r.score.is_some()).count();
    if scored != 0 && scored != records.len() {
        return Err(MetricsError::InvalidInput(
            "detections must be either all scored or all unscored".into(),
        ));
    }
    if records.is_empty() {
        return Ok((0.0, 0.0));
    }

    let mut order: Vec<&OksRecord> = records.iter().collect();
    // Highest score first; within equal scores, best match first.
    order.sort_by(|a, b| {
        let by_score = match (a.score, b.score) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            _ => Ordering::Equal,
        };
        by_score.then_with(|| b.oks.total_cmp(&a.oks))
    });

    let mut matched = vec![false; num_gt];
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut curve: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let group_score = order[i].score;
        while i < order.len() && order[i].score == group_score {
            let r = order[i];
            if r.oks > threshold && !matched[r.gt_index] {
                matched[r.gt_index] = true;
                tp += 1;
            }
            seen += 1;
            i += 1;
        }
        curve.push((tp as f64 / num_gt as f64, tp as f64 / seen as f64));
    }

    let recall = tp as f64 / num_gt as f64;
    if scored == 0 {
        return Ok((curve[0].1, recall));
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for j in 0..curve.len() {
        let interp = curve[j..].iter().map(|c| c.1).fold(0.0, f64::max);
        ap += (curve[j].0 - prev_recall) * interp;
        prev_recall = curve[j].0;
    }
    Ok((ap, recall))
}

/// Mean AP/AR over all keypoints and thresholds.
pub fn map_mar(
    detections: &[ScoredDetection],
    ground_truth: &[GroundTruthInstance],
    k: &KConstants,
    thresholds: &[f64],
) -> Result<ApReport, MetricsError> {
    if ground_truth.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    validate_thresholds(thresholds)?;

    let mut per_keypoint_records = Vec::with_capacity(14);
    for side in HipSide::BOTH {
        for l in Landmark::ALL {
            let mut records = Vec::with_capacity(detections.len());
            for det in detections {
                let gt = ground_truth.get(det.gt_index).ok_or_else(|| {
                    MetricsError::InvalidInput(format!("gt_index {} out of range", det.gt_index))
                })?;
                let distance = det.keypoints.get(side, l).distance(gt.keypoints.get(side, l));
                let sim = oks(&OksInput { distance, scale: gt.scale, k: k.get(side, l) })?;
                records.push(OksRecord { gt_index: det.gt_index, score: det.score, oks: sim });
            }
            per_keypoint_records.push((side, l, records));
        }
    }

    let n_kp = per_keypoint_records.len() as f64;
    let n_t = thresholds.len() as f64;
    let mut per_threshold = Vec::with_capacity(thresholds.len());
    let mut kp_sums = vec![(0.0, 0.0); per_keypoint_records.len()];
    for &t in thresholds {
        let (mut ap_sum, mut ar_sum) = (0.0, 0.0);
        for (idx, (_, _, records)) in per_keypoint_records.iter().enumerate() {
            let (ap, ar) = average_precision_recall(records, ground_truth.len(), t)?;
            ap_sum += ap;
            ar_sum += ar;
            kp_sums[idx].0 += ap;
            kp_sums[idx].1 += ar;
        }
        per_threshold.push(ThresholdRow { threshold: t, ap: ap_sum / n_kp, ar: ar_sum / n_kp });
    }
    let map = per_threshold.iter().map(|r| r.ap).sum::<f64>() / n_t;
    let mar = per_threshold.iter().map(|r| r.ar).sum::<f64>() / n_t;
    let per_keypoint = per_keypoint_records
        .iter()
        .zip(kp_sums)
        .map(|((s, l, _), (ap, ar))| (*s, *l, ap / n_t, ar / n_t))
        .collect();
    Ok(ApReport { map, mar, per_threshold, per_keypoint })
}
