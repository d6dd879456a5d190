//! File-backed study store with per-study optimistic versioning.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use hipmetrics_core::data::{parse_study_str, serialize_study, PelvisAnnotation, Study, FUSED_ANNOTATOR};
use hipmetrics_core::geometry::{measure_pelvis, PelvisKeypoints};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown study '{0}'")]
    NotFound(String),
    #[error("version conflict: expected {expected}, current {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone)]
struct Entry {
    study: Study,
    version: u64,
    file: PathBuf,
}

/// A consistent copy of one study.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub study: Study,
    pub version: u64,
}

/// Study documents (`*.json`) in a root directory, loaded at startup.
/// Versions start at 1 and live in memory; every successful write
/// increments them.
#[derive(Debug)]
pub struct StudyStore {
    root: PathBuf,
    entries: RwLock<BTreeMap<String, Entry>>,
}

impl StudyStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| StoreError::Io { path, source }
        };
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for item in fs::read_dir(&root).map_err(io(&root))? {
            let path = item.map_err(io(&root))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(io(&path))?;
            let study = parse_study_str(&text, &path.display().to_string())
                .map_err(|e| StoreError::Invalid(e.to_string()))?;
            if let Some(prev) = entries.get(&study.study_id) {
                return Err(StoreError::Invalid(format!(
                    "study '{}' appears in both {} and {}",
                    study.study_id,
                    prev.file.display(),
                    path.display()
                )));
            }
            entries.insert(study.study_id.clone(), Entry { study, version: 1, file: path });
        }
        log::info!("loaded {} studies from {}", entries.len(), root.display());
        Ok(Self { root, entries: RwLock::new(entries) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// All studies in id order.
    pub fn list(&self) -> Vec<Snapshot> {
        let entries = self.entries.read().expect("store lock poisoned");
        entries.values().map(|e| Snapshot { study: e.study.clone(), version: e.version }).collect()
    }

    pub fn get(&self, id: &str) -> Result<Snapshot, StoreError> {
        let entries = self.entries.read().expect("store lock poisoned");
        entries
            .get(id)
            .map(|e| Snapshot { study: e.study.clone(), version: e.version })
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    /// Replaces the ground-truth keypoints of a study if `expected_version`
    /// is current. A study without ground truth gets one seeded from its
    /// reference annotation. The keypoints must be measurable; nothing is
    /// written otherwise.
    pub fn update_keypoints(
        &self,
        id: &str,
        expected_version: u64,
        keypoints: PelvisKeypoints,
    ) -> Result<Snapshot, StoreError> {
        measure_pelvis(&keypoints).map_err(|e| StoreError::Invalid(e.to_string()))?;
        let mut entries = self.entries.write().expect("store lock poisoned");
        let entry = entries.get_mut(id).ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        if entry.version != expected_version {
            return Err(StoreError::Conflict { expected: expected_version, current: entry.version });
        }

        let mut updated = entry.study.clone();
        let mut gt: PelvisAnnotation = updated
            .reference_annotation()
            .map_err(|e| StoreError::Invalid(e.to_string()))?
            .into_owned();
        gt.annotator_id = FUSED_ANNOTATOR.to_string();
        gt.keypoints = keypoints;
        updated.ground_truth = Some(gt);

        // Re-parse so that stored documents always satisfy the schema checks.
        let text = serialize_study(&updated);
        parse_study_str(&text, id).map_err(|e| StoreError::Invalid(e.to_string()))?;
        write_atomic(&entry.file, text.as_bytes())?;

        entry.study = updated;
        entry.version += 1;
        Ok(Snapshot { study: entry.study.clone(), version: entry.version })
    }

    /// Absolute path of a study's image, if it has one.
    pub fn image_path(&self, id: &str) -> Result<Option<PathBuf>, StoreError> {
        let snap = self.get(id)?;
        Ok(snap.study.image.map(|img| self.root.join(img.path)))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let io = |source| StoreError::Io { path: path.to_path_buf(), source };
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}
