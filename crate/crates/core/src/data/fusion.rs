use std::collections::BTreeMap;

use super::{BBox, DataError, HipLabel, PelvisAnnotation, PerSide, FUSED_ANNOTATOR};
use crate::geometry::{CroweGrade, HipSide, Point2D, PelvisKeypoints};

/// Result of fusing several annotators.
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub annotation: PelvisAnnotation,
    /// Fields whose vote tied, e.g. `"right.diagnosis"`.
    pub ties: Vec<String>,
}

/// Order-independent mean: values are summed in sorted order.
fn mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn majority<T: Ord + Copy>(votes: impl Iterator<Item = T>) -> Result<Option<T>, ()> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for v in votes {
        *counts.entry(v).or_default() += 1;
    }
    let Some(&best) = counts.values().max() else { return Ok(None) };
    let mut winners = counts.iter().filter(|(_, &c)| c == best);
    let first = winners.next().map(|(k, _)| *k);
    if winners.next().is_some() {
        Err(())
    } else {
        Ok(first)
    }
}

/// Coordinate-wise mean of every keypoint and of the bounding box, and a
/// per-side majority vote on diagnosis and Crowe grade. A tied diagnosis
/// vote resolves to [`HipLabel::Other`]; a tied Crowe vote leaves the grade
/// unset. Both are reported in [`Fused::ties`] and logged.
pub fn fuse_ground_truth(annotations: &[PelvisAnnotation]) -> Result<Fused, DataError> {
    if annotations.is_empty() {
        return Err(DataError::schema("fusion", "no annotations to fuse"));
    }

    let mut keypoints = PelvisKeypoints::default();
    for (side, l, _) in PelvisKeypoints::default().iter() {
        let mut xs: Vec<f64> = annotations.iter().map(|a| a.keypoints.get(side, l).x).collect();
        let mut ys: Vec<f64> = annotations.iter().map(|a| a.keypoints.get(side, l).y).collect();
        *keypoints.hip_mut(side).get_mut(l) = Point2D::new(mean(&mut xs), mean(&mut ys));
    }

    let component = |f: fn(&BBox) -> f64| {
        let mut v: Vec<f64> = annotations.iter().map(|a| f(&a.bbox)).collect();
        mean(&mut v)
    };
    let bbox = BBox {
        x: component(|b| b.x),
        y: component(|b| b.y),
        w: component(|b| b.w),
        h: component(|b| b.h),
    };

    let mut ties = Vec::new();
    let mut diagnosis: PerSide<Option<HipLabel>> = PerSide::default();
    let mut crowe: PerSide<Option<CroweGrade>> = PerSide::default();
    for side in HipSide::BOTH {
        *diagnosis.get_mut(side) = match majority(annotations.iter().filter_map(|a| *a.diagnosis.get(side))) {
            Ok(label) => label,
            Err(()) => {
                log::warn!("diagnosis vote tied for the {side} hip; recording 'other'");
                ties.push(format!("{side}.diagnosis"));
                Some(HipLabel::Other)
            }
        };
        *crowe.get_mut(side) = match majority(annotations.iter().filter_map(|a| *a.crowe.get(side))) {
            Ok(grade) => grade,
            Err(()) => {
                log::warn!("Crowe grade vote tied for the {side} hip; leaving it unset");
                ties.push(format!("{side}.crowe"));
                None
            }
        };
    }

    Ok(Fused {
        annotation: PelvisAnnotation {
            annotator_id: FUSED_ANNOTATOR.to_string(),
            keypoints,
            bbox,
            diagnosis,
            crowe,
            score: None,
        },
        ties,
    })
}
