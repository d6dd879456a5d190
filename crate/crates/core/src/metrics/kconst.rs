//! Per-keypoint OKS constants and their estimation from repeated labeling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::geometry::{HipSide, Landmark, PelvisKeypoints};

const BUNDLED: &str = include_str!("../../data/k_constants.toml");

/// Constants for one hip, keyed like the annotation schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HipConstants {
    pub teardrop: f64,
    pub fh_center: f64,
    pub lat_sourcil: f64,
    pub med_sourcil: f64,
    pub fhn_junction: f64,
    pub inf_ischium: f64,
    pub sup_ilium: f64,
}

impl HipConstants {
    fn from_array(v: [f64; 7]) -> Self {
        Self {
            teardrop: v[0],
            fh_center: v[1],
            lat_sourcil: v[2],
            med_sourcil: v[3],
            fhn_junction: v[4],
            inf_ischium: v[5],
            sup_ilium: v[6],
        }
    }

    fn to_array(self) -> [f64; 7] {
        [
            self.teardrop,
            self.fh_center,
            self.lat_sourcil,
            self.med_sourcil,
            self.fhn_junction,
            self.inf_ischium,
            self.sup_ilium,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KConstantsDoc", into = "KConstantsDoc")]
pub struct KConstants {
    values: [[f64; 7]; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KConstantsDoc {
    right: HipConstants,
    left: HipConstants,
}

impl TryFrom<KConstantsDoc> for KConstants {
    type Error = MetricsError;

    fn try_from(doc: KConstantsDoc) -> Result<Self, Self::Error> {
        KConstants::new([doc.right.to_array(), doc.left.to_array()])
    }
}

impl From<KConstants> for KConstantsDoc {
    fn from(k: KConstants) -> Self {
        KConstantsDoc {
            right: HipConstants::from_array(k.values[0]),
            left: HipConstants::from_array(k.values[1]),
        }
    }
}

impl Default for KConstants {
    fn default() -> Self {
        Self::bundled()
    }
}

impl KConstants {
    /// Values indexed `[side][landmark]` (right first, landmarks A–G).
    pub fn new(values: [[f64; 7]; 2]) -> Result<Self, MetricsError> {
        for side in HipSide::BOTH {
            for l in Landmark::ALL {
                let v = values[side.index()][l.index()];
                if !(v > 0.0 && v.is_finite()) {
                    return Err(MetricsError::InvalidInput(format!(
                        "k-constant {side}.{} = {v} must be positive and finite",
                        l.key()
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    /// The constants shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED).expect("bundled k-constant table is valid")
    }

    pub fn get(&self, side: HipSide, landmark: Landmark) -> f64 {
        self.values[side.index()][landmark.index()]
    }

    pub fn values(&self) -> &[[f64; 7]; 2] {
        &self.values
    }

    pub fn from_toml(text: &str) -> Result<Self, MetricsError> {
        toml::from_str(text).map_err(|e| MetricsError::InvalidInput(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("k-constants always serialize")
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MetricsError::InvalidInput(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Repeated labelings of one radiograph together with its pelvic box area.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedAnnotations {
    pub repeats: Vec<PelvisKeypoints>,
    pub bbox_area: f64,
}

/// Estimates `k_i = 2 σ_i` with `σ_i = sqrt(mean(d_i² / s²))`, where `d_i`
/// is the distance of each repeat from the per-study mean location and
/// `s² ` is the study's bounding-box area. Studies with fewer than two
/// repeats carry no spread information and are skipped.
pub fn estimate_k_constants(studies: &[RepeatedAnnotations]) -> Result<KConstants, MetricsError> {
    let usable: Vec<&RepeatedAnnotations> = studies.iter().filter(|s| s.repeats.len() >= 2).collect();
    if usable.is_empty() {
        return Err(MetricsError::InsufficientRedundancy(
            "no study has at least two repeated annotations".into(),
        ));
    }
    for s in &usable {
        if !(s.bbox_area > 0.0 && s.bbox_area.is_finite()) {
            return Err(MetricsError::InvalidInput(format!("bounding-box area {} must be positive", s.bbox_area)));
        }
    }

    let mut values = [[0.0; 7]; 2];
    for side in HipSide::BOTH {
        for l in Landmark::ALL {
            let mut sum = 0.0;
            let mut count = 0usize;
            for study in &usable {
                let n = study.repeats.len() as f64;
                let (mx, my) = study.repeats.iter().fold((0.0, 0.0), |(x, y), kp| {
                    let p = kp.get(side, l);
                    (x + p.x, y + p.y)
                });
                let (mx, my) = (mx / n, my / n);
                for kp in &study.repeats {
                    let p = kp.get(side, l);
                    let d2 = (p.x - mx).powi(2) + (p.y - my).powi(2);
                    sum += d2 / study.bbox_area;
                    count += 1;
                }
            }
            let sigma = (sum / count as f64).sqrt();
            let k = 2.0 * sigma;
            if !(k > 0.0) {
                return Err(MetricsError::DegenerateConstant(format!("{side}.{}", l.key())));
            }
            values[side.index()][l.index()] = k;
        }
    }
    KConstants::new(values)
}
