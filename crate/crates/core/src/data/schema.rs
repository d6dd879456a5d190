//! JSON annotation documents, schema `hipmetrics/1`.
//!
//! A study document:
//!
//! ```json
//! {
//!   "schema": "hipmetrics/1",
//!   "study_id": "S00001",
//!   "image": { "path": "S00001.png", "width": 800, "height": 700 },
//!   "annotations": [
//!     {
//!       "annotator": "reader-1",
//!       "bbox": [x, y, w, h],
//!       "keypoints": {
//!         "right": { "teardrop": [x, y], "fh_center": [x, y], "lat_sourcil": [x, y],
//!                    "med_sourcil": [x, y], "fhn_junction": [x, y],
//!                    "inf_ischium": [x, y], "sup_ilium": [x, y] },
//!         "left": { ... }
//!       },
//!       "diagnosis": { "right": "ddh", "left": "normal" },
//!       "crowe": { "right": "I" },
//!       "score": 0.93
//!     }
//!   ],
//!   "ground_truth": { "annotator": "fused", ... }
//! }
//! ```
//!
//! A dataset document is `{ "schema": "hipmetrics/1", "studies": [ ... ] }`
//! where each study omits its own `schema` key. A dataset may also be a
//! directory of study documents.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BBox, DataError, HipLabel, ImageRef, PelvisAnnotation, PerSide, Study, FUSED_ANNOTATOR};
use crate::geometry::{CroweGrade, HipKeypoints, HipSide, Landmark, PelvisKeypoints, Point2D};

pub const SCHEMA_VERSION: &str = "hipmetrics/1";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct HipDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    teardrop: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fh_center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lat_sourcil: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    med_sourcil: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fhn_junction: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inf_ischium: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sup_ilium: Option<[f64; 2]>,
}

impl HipDoc {
    fn slot(&self, l: Landmark) -> Option<[f64; 2]> {
        match l {
            Landmark::Teardrop => self.teardrop,
            Landmark::FemoralHeadCenter => self.fh_center,
            Landmark::LateralSourcil => self.lat_sourcil,
            Landmark::MedialSourcil => self.med_sourcil,
            Landmark::HeadNeckJunction => self.fhn_junction,
            Landmark::InferiorIschium => self.inf_ischium,
            Landmark::SuperiorIlium => self.sup_ilium,
        }
    }

    fn from_hip(hip: &HipKeypoints) -> Self {
        let p = |l: Landmark| {
            let pt = hip.get(l);
            Some([pt.x, pt.y])
        };
        HipDoc {
            teardrop: p(Landmark::Teardrop),
            fh_center: p(Landmark::FemoralHeadCenter),
            lat_sourcil: p(Landmark::LateralSourcil),
            med_sourcil: p(Landmark::MedialSourcil),
            fhn_junction: p(Landmark::HeadNeckJunction),
            inf_ischium: p(Landmark::InferiorIschium),
            sup_ilium: p(Landmark::SuperiorIlium),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct KeypointsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<HipDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<HipDoc>,
}

impl KeypointsDoc {
    pub(crate) fn from_keypoints(kp: &PelvisKeypoints) -> Self {
        KeypointsDoc {
            right: Some(HipDoc::from_hip(&kp.right)),
            left: Some(HipDoc::from_hip(&kp.left)),
        }
    }

    pub(crate) fn to_keypoints(&self, location: &str) -> Result<PelvisKeypoints, DataError> {
        let mut out = PelvisKeypoints::default();
        for side in HipSide::BOTH {
            let hip = match side {
                HipSide::Right => self.right.as_ref(),
                HipSide::Left => self.left.as_ref(),
            };
            for l in Landmark::ALL {
                let missing = || DataError::MissingKeypoint {
                    location: location.to_string(),
                    landmark: format!("{side}.{}", l.key()),
                };
                let [x, y] = hip.and_then(|h| h.slot(l)).ok_or_else(missing)?;
                if !(x.is_finite() && y.is_finite()) {
                    return Err(DataError::schema(
                        location,
                        format!("keypoint {side}.{} is not finite", l.key()),
                    ));
                }
                *out.hip_mut(side).get_mut(l) = Point2D::new(x, y);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Deserialize<'de>"))]
struct SideDoc<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<T>,
}

impl<T: Copy> SideDoc<T> {
    fn from_per_side(p: &PerSide<Option<T>>) -> Option<Self> {
        (p.right.is_some() || p.left.is_some()).then_some(SideDoc { right: p.right, left: p.left })
    }

    fn to_per_side(doc: &Option<Self>) -> PerSide<Option<T>> {
        doc.as_ref()
            .map(|d| PerSide { right: d.right, left: d.left })
            .unwrap_or(PerSide { right: None, left: None })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct AnnotationDoc {
    annotator: String,
    bbox: [f64; 4],
    keypoints: KeypointsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagnosis: Option<SideDoc<HipLabel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crowe: Option<SideDoc<CroweGradeDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

/// Crowe grade as its roman-numeral string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
struct CroweGradeDoc(CroweGrade);

impl TryFrom<String> for CroweGradeDoc {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        CroweGrade::parse(&s)
            .map(CroweGradeDoc)
            .ok_or_else(|| format!("unknown Crowe grade '{s}', expected I, II, III or IV"))
    }
}

impl From<CroweGradeDoc> for String {
    fn from(g: CroweGradeDoc) -> String {
        g.0.as_str().to_string()
    }
}

impl AnnotationDoc {
    fn from_annotation(a: &PelvisAnnotation) -> Self {
        let crowe = PerSide { right: a.crowe.right.map(CroweGradeDoc), left: a.crowe.left.map(CroweGradeDoc) };
        AnnotationDoc {
            annotator: a.annotator_id.clone(),
            bbox: [a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h],
            keypoints: KeypointsDoc::from_keypoints(&a.keypoints),
            diagnosis: SideDoc::from_per_side(&a.diagnosis),
            crowe: SideDoc::from_per_side(&crowe),
            score: a.score,
        }
    }

    fn to_annotation(&self, location: &str) -> Result<PelvisAnnotation, DataError> {
        let [x, y, w, h] = self.bbox;
        if !(w > 0.0 && h > 0.0 && x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(DataError::schema(location, format!("bbox {:?} must have positive width and height", self.bbox)));
        }
        if self.score.is_some_and(|s| !s.is_finite()) {
            return Err(DataError::schema(location, "score must be finite"));
        }
        let crowe = SideDoc::to_per_side(&self.crowe);
        Ok(PelvisAnnotation {
            annotator_id: self.annotator.clone(),
            keypoints: self.keypoints.to_keypoints(location)?,
            bbox: BBox { x, y, w, h },
            diagnosis: SideDoc::to_per_side(&self.diagnosis),
            crowe: PerSide { right: crowe.right.map(|g| g.0), left: crowe.left.map(|g| g.0) },
            score: self.score,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct StudyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
    study_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<ImageRef>,
    annotations: Vec<AnnotationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<AnnotationDoc>,
}

impl StudyDoc {
    fn from_study(s: &Study, with_schema: bool) -> Self {
        StudyDoc {
            schema: with_schema.then(|| SCHEMA_VERSION.to_string()),
            study_id: s.study_id.clone(),
            image: s.image.clone(),
            annotations: s.annotations.iter().map(AnnotationDoc::from_annotation).collect(),
            ground_truth: s.ground_truth.as_ref().map(AnnotationDoc::from_annotation),
        }
    }

    fn to_study(&self) -> Result<Study, DataError> {
        let base = format!("study '{}'", self.study_id);
        if self.study_id.is_empty() {
            return Err(DataError::schema("study", "study_id must not be empty"));
        }
        let annotations = self
            .annotations
            .iter()
            .enumerate()
            .map(|(i, a)| a.to_annotation(&format!("{base} annotations[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let ground_truth = self
            .ground_truth
            .as_ref()
            .map(|a| a.to_annotation(&format!("{base} ground_truth")))
            .transpose()?;
        if let Some(gt) = &ground_truth {
            if gt.annotator_id != FUSED_ANNOTATOR {
                return Err(DataError::schema(
                    format!("{base} ground_truth"),
                    format!("annotator must be '{FUSED_ANNOTATOR}', got '{}'", gt.annotator_id),
                ));
            }
        }
        if annotations.is_empty() && ground_truth.is_none() {
            return Err(DataError::schema(base, "needs at least one annotation or a ground truth"));
        }
        let study = Study { study_id: self.study_id.clone(), image: self.image.clone(), annotations, ground_truth };
        check_image_bounds(&study)?;
        Ok(study)
    }
}

fn check_image_bounds(study: &Study) -> Result<(), DataError> {
    let Some(img) = &study.image else { return Ok(()) };
    let (w, h) = (f64::from(img.width), f64::from(img.height));
    for (idx, a) in study.annotations.iter().chain(&study.ground_truth).enumerate() {
        for (side, l, p) in a.keypoints.iter() {
            if p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
                return Err(DataError::schema(
                    format!("study '{}' annotation {idx}", study.study_id),
                    format!("keypoint {side}.{} ({}, {}) outside the {}x{} image", l.key(), p.x, p.y, img.width, img.height),
                ));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetDoc {
    schema: String,
    studies: Vec<StudyDoc>,
}

fn syntax_error(source_name: &str, e: serde_json::Error) -> DataError {
    DataError::Syntax {
        source_name: source_name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn check_schema(found: Option<&str>, location: &str) -> Result<(), DataError> {
    match found {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(other) => Err(DataError::schema(location, format!("unsupported schema '{other}', expected '{SCHEMA_VERSION}'"))),
        None => Err(DataError::schema(location, format!("missing \"schema\": \"{SCHEMA_VERSION}\""))),
    }
}

/// Parses a `keypoints` fragment (`{"right": {...}, "left": {...}}`).
pub fn keypoints_from_json(value: serde_json::Value, location: &str) -> Result<PelvisKeypoints, DataError> {
    let doc: KeypointsDoc =
        serde_json::from_value(value).map_err(|e| DataError::schema(location, e.to_string()))?;
    doc.to_keypoints(location)
}

/// The `keypoints` fragment of a document.
pub fn keypoints_to_json(keypoints: &PelvisKeypoints) -> serde_json::Value {
    serde_json::to_value(KeypointsDoc::from_keypoints(keypoints)).expect("keypoints always serialize")
}

/// A study document as a JSON value, including the `schema` key.
pub fn study_to_json(study: &Study) -> serde_json::Value {
    serde_json::to_value(StudyDoc::from_study(study, true)).expect("studies always serialize")
}

/// Parses one study document.
pub fn parse_study_str(text: &str, source_name: &str) -> Result<Study, DataError> {
    let doc: StudyDoc = serde_json::from_str(text).map_err(|e| syntax_error(source_name, e))?;
    check_schema(doc.schema.as_deref(), source_name)?;
    doc.to_study()
}

/// Parses a dataset document, or a single study document as a one-study dataset.
pub fn parse_dataset_str(text: &str, source_name: &str) -> Result<Vec<Study>, DataError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| syntax_error(source_name, e))?;
    if value.get("studies").is_none() {
        return Ok(vec![parse_study_str(text, source_name)?]);
    }
    let doc: DatasetDoc = serde_json::from_str(text).map_err(|e| syntax_error(source_name, e))?;
    check_schema(Some(&doc.schema), source_name)?;
    let mut seen = HashSet::new();
    let mut studies = Vec::with_capacity(doc.studies.len());
    for s in &doc.studies {
        if s.schema.is_some() {
            return Err(DataError::schema(format!("study '{}'", s.study_id), "nested studies must not repeat \"schema\""));
        }
        if !seen.insert(s.study_id.clone()) {
            return Err(DataError::schema(source_name, format!("duplicate study_id '{}'", s.study_id)));
        }
        studies.push(s.to_study()?);
    }
    Ok(studies)
}

/// Reads a dataset file, or every `*.json` study document in a directory
/// (sorted by study id).
pub fn parse_dataset(path: &Path) -> Result<Vec<Study>, DataError> {
    let io_err = |source| DataError::Io { path: path.to_path_buf(), source };
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut studies = Vec::with_capacity(files.len());
        let mut seen = HashSet::new();
        for f in files {
            let text = fs::read_to_string(&f).map_err(|source| DataError::Io { path: f.clone(), source })?;
            let study = parse_study_str(&text, &f.display().to_string())?;
            if !seen.insert(study.study_id.clone()) {
                return Err(DataError::schema(path.display().to_string(), format!("duplicate study_id '{}'", study.study_id)));
            }
            studies.push(study);
        }
        studies.sort_by(|a, b| a.study_id.cmp(&b.study_id));
        return Ok(studies);
    }
    let text = fs::read_to_string(path).map_err(io_err)?;
    parse_dataset_str(&text, &path.display().to_string())
}

fn to_pretty<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents always serialize");
    s.push('\n');
    s
}

pub fn serialize_study(study: &Study) -> String {
    to_pretty(&StudyDoc::from_study(study, true))
}

pub fn serialize_dataset(studies: &[Study]) -> String {
    to_pretty(&DatasetDoc {
        schema: SCHEMA_VERSION.to_string(),
        studies: studies.iter().map(|s| StudyDoc::from_study(s, false)).collect(),
    })
}

pub fn write_dataset(studies: &[Study], path: &Path) -> Result<(), DataError> {
    fs::write(path, serialize_dataset(studies)).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}
