//! Annotation model, the `hipmetrics/1` document format, ground-truth
//! fusion, tabular export and the synthetic pelvis generator.

pub mod export;
pub mod fusion;
pub mod schema;
pub mod synth;

use std::borrow::Cow;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CroweGrade, GeometryError, HipSide, PelvisKeypoints};

pub use export::{diagnosis_table, measurement_table, HipRow};
pub use fusion::{fuse_ground_truth, Fused};
pub use schema::{
    keypoints_from_json, keypoints_to_json, parse_dataset, parse_dataset_str, parse_study_str,
    serialize_dataset, serialize_study, study_to_json, write_dataset, SCHEMA_VERSION,
};
pub use synth::{
    synth_dataset, synth_hip, synth_pelvis, AngleDistributions, HipTargets, PelvisTemplate,
    SynthConfig,
};

/// Annotator id carried by fused ground truth.
pub const FUSED_ANNOTATOR: &str = "fused";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{source_name}: line {line}, column {column}: {message}")]
    Syntax { source_name: String, line: usize, column: usize, message: String },
    #[error("schema error in {location}: {message}")]
    Schema { location: String, message: String },
    #[error("missing keypoint {landmark} in {location}")]
    MissingKeypoint { location: String, landmark: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid synthesis target: {0}")]
    InvalidTarget(String),
    #[error("label noise rate {0} outside [0, 0.5)")]
    InvalidNoiseRate(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl DataError {
    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        DataError::Schema { location: location.into(), message: message.into() }
    }
}

/// Clinical label of one hip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HipLabel {
    Normal,
    Ddh,
    Other,
}

impl HipLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            HipLabel::Normal => "normal",
            HipLabel::Ddh => "ddh",
            HipLabel::Other => "other",
        }
    }
}

/// A value for each hip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerSide<T> {
    pub right: T,
    pub left: T,
}

impl<T> PerSide<T> {
    pub fn get(&self, side: HipSide) -> &T {
        match side {
            HipSide::Right => &self.right,
            HipSide::Left => &self.left,
        }
    }

    pub fn get_mut(&mut self, side: HipSide) -> &mut T {
        match side {
            HipSide::Right => &mut self.right,
            HipSide::Left => &mut self.left,
        }
    }
}

/// Pelvic region box in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Object scale used by OKS.
    pub fn scale(&self) -> f64 {
        self.area().sqrt()
    }

    /// Tight box around the keypoints, grown by `margin` on every side.
    pub fn around(keypoints: &PelvisKeypoints, margin: f64) -> BBox {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (_, _, p) in keypoints.iter() {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        BBox { x: x0 - margin, y: y0 - margin, w: x1 - x0 + 2.0 * margin, h: y1 - y0 + 2.0 * margin }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PelvisAnnotation {
    pub annotator_id: String,
    pub keypoints: PelvisKeypoints,
    pub bbox: BBox,
    pub diagnosis: PerSide<Option<HipLabel>>,
    pub crowe: PerSide<Option<CroweGrade>>,
    /// Detector confidence; absent for human annotations.
    pub score: Option<f64>,
}

impl PelvisAnnotation {
    pub fn new(annotator_id: impl Into<String>, keypoints: PelvisKeypoints, bbox: BBox) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            keypoints,
            bbox,
            diagnosis: PerSide::default(),
            crowe: PerSide::default(),
            score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRef {
    /// Path relative to the dataset or store root.
    pub path: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub study_id: String,
    pub image: Option<ImageRef>,
    pub annotations: Vec<PelvisAnnotation>,
    pub ground_truth: Option<PelvisAnnotation>,
}

impl Study {
    /// The annotation measurements are taken from: the stored ground truth,
    /// else the only annotation, else the fusion of all annotations.
    pub fn reference_annotation(&self) -> Result<Cow<'_, PelvisAnnotation>, DataError> {
        if let Some(gt) = &self.ground_truth {
            return Ok(Cow::Borrowed(gt));
        }
        match self.annotations.as_slice() {
            [] => Err(DataError::schema(
                format!("study '{}'", self.study_id),
                "no annotations and no ground truth",
            )),
            [single] => Ok(Cow::Borrowed(single)),
            many => Ok(Cow::Owned(fuse_ground_truth(many)?.annotation)),
        }
    }
}
