//! HTTP routes under `/api`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use hipmetrics_core::data::{keypoints_from_json, keypoints_to_json, study_to_json, HipRow};
use hipmetrics_core::geometry::{AngleMeasurements, PelvisKeypoints};
use hipmetrics_core::scoring::{AngleRanges, Diagnosis, ScoringParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::store::{Snapshot, StoreError, StudyStore};

/// Shared handler state.
#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<StudyStore>,
    /// Server-side scoring rule; `/api/diagnose` may override it per request.
    pub params: ScoringParams,
    pub ranges: AngleRanges,
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Conflict { expected: u64, current: u64 },
    Unprocessable(String),
    Internal(String),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ApiError::NotFound(format!("unknown study '{id}'")),
            StoreError::Conflict { expected, current } => ApiError::Conflict { expected, current },
            StoreError::Invalid(msg) => ApiError::Unprocessable(msg),
            e @ StoreError::Io { .. } => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(msg) => (StatusCode::NOT_FOUND, json!({ "error": msg })),
            ApiError::Conflict { expected, current } => (
                StatusCode::CONFLICT,
                json!({
                    "error": format!("version conflict: expected {expected}, current {current}"),
                    "current_version": current,
                }),
            ),
            ApiError::Unprocessable(msg) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": msg })),
            ApiError::Internal(msg) => {
                log::error!("{msg}");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": msg }))
            }
        };
        (status, Json(body)).into_response()
    }
}

/// Measurements of one hip as served by the API.
#[derive(Debug, Clone, Serialize)]
pub struct MeasurementView {
    pub ce_deg: f64,
    pub tonnis_deg: f64,
    pub sharp_deg: f64,
    pub displacement_px: f64,
    pub pelvic_height_px: f64,
    pub crowe_r: f64,
    pub crowe_grade: &'static str,
}

impl From<&AngleMeasurements> for MeasurementView {
    fn from(m: &AngleMeasurements) -> Self {
        Self {
            ce_deg: m.ce_deg,
            tonnis_deg: m.tonnis_deg,
            sharp_deg: m.sharp_deg,
            displacement_px: m.proximal_displacement_px,
            pelvic_height_px: m.pelvic_height_px,
            crowe_r: m.crowe_ratio_r,
            crowe_grade: m.crowe_grade().as_str(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosisView {
    pub ce_class: &'static str,
    pub tonnis_class: &'static str,
    pub sharp_class: &'static str,
    pub ce_score: u32,
    pub tonnis_score: u32,
    pub sharp_score: u32,
    pub total_score: u32,
    pub threshold: u32,
    pub verdict: &'static str,
    pub crowe_stage: Option<&'static str>,
}

impl From<&Diagnosis> for DiagnosisView {
    fn from(d: &Diagnosis) -> Self {
        Self {
            ce_class: d.classes[0].as_str(),
            tonnis_class: d.classes[1].as_str(),
            sharp_class: d.classes[2].as_str(),
            ce_score: d.scores[0],
            tonnis_score: d.scores[1],
            sharp_score: d.scores[2],
            total_score: d.total_score,
            threshold: d.threshold,
            verdict: d.verdict_str(),
            crowe_stage: d.crowe.map(|g| g.as_str()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct HipView {
    measurements: MeasurementView,
    diagnosis: DiagnosisView,
}

fn evaluate(kp: &PelvisKeypoints, params: &ScoringParams, ranges: &AngleRanges) -> Result<Value, ApiError> {
    let [right, left] =
        HipRow::for_pelvis("", kp, params, ranges).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let view = |r: &HipRow| HipView {
        measurements: MeasurementView::from(&r.measurements),
        diagnosis: DiagnosisView::from(&r.diagnosis),
    };
    Ok(json!({ "right": view(&right), "left": view(&left) }))
}

fn parse_body(body: &Bytes) -> Result<serde_json::Map<String, Value>, ApiError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ApiError::Unprocessable("request body must be a JSON object".into())),
        Err(e) => Err(ApiError::Unprocessable(format!("invalid JSON: {e}"))),
    }
}

fn take_keypoints(body: &mut serde_json::Map<String, Value>) -> Result<PelvisKeypoints, ApiError> {
    let value = body.remove("keypoints").ok_or_else(|| ApiError::Unprocessable("missing \"keypoints\"".into()))?;
    keypoints_from_json(value, "request").map_err(|e| ApiError::Unprocessable(e.to_string()))
}

fn reject_unknown(body: &serde_json::Map<String, Value>) -> Result<(), ApiError> {
    match body.keys().next() {
        Some(k) => Err(ApiError::Unprocessable(format!("unknown field \"{k}\""))),
        None => Ok(()),
    }
}

fn study_payload(snap: &Snapshot, state: &AppState) -> Value {
    let hips = snap
        .study
        .reference_annotation()
        .ok()
        .and_then(|a| evaluate(&a.keypoints, &state.params, &state.ranges).ok());
    json!({
        "id": snap.study.study_id,
        "version": snap.version,
        "study": study_to_json(&snap.study),
        "hips": hips,
    })
}

async fn list_studies(State(state): State<AppState>) -> Json<Value> {
    let items: Vec<Value> = state
        .store
        .list()
        .iter()
        .map(|snap| {
            let verdicts = snap.study.reference_annotation().ok().and_then(|a| {
                HipRow::for_pelvis(&snap.study.study_id, &a.keypoints, &state.params, &state.ranges).ok()
            });
            let verdict = verdicts.map(|[r, l]| {
                json!({ "right": r.diagnosis.verdict_str(), "left": l.diagnosis.verdict_str() })
            });
            json!({ "id": snap.study.study_id, "version": snap.version, "verdict": verdict })
        })
        .collect();
    Json(Value::Array(items))
}

async fn get_study(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let snap = state.store.get(&id)?;
    Ok(Json(study_payload(&snap, &state)))
}

fn media_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("bmp") => "image/bmp",
        Some("tif" | "tiff") => "image/tiff",
        Some("webp") => "image/webp",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn get_image(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let path = state
        .store
        .image_path(&id)?
        .ok_or_else(|| ApiError::NotFound(format!("study '{id}' has no image")))?;
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, media_type(&path))], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(ApiError::NotFound(format!("image file for study '{id}' not found")))
        }
        Err(e) => Err(ApiError::Internal(format!("{}: {e}", path.display()))),
    }
}

async fn put_keypoints(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    // Unknown ids are 404 even when the body is also bad.
    state.store.get(&id)?;
    let mut body = parse_body(&body)?;
    let version = body
        .remove("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ApiError::Unprocessable("\"version\" must be a non-negative integer".into()))?;
    let keypoints = take_keypoints(&mut body)?;
    reject_unknown(&body)?;
    let snap = state.store.update_keypoints(&id, version, keypoints)?;
    log::info!("study '{id}' updated to version {}", snap.version);
    Ok(Json(study_payload(&snap, &state)))
}

async fn post_measure(State(_): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let mut body = parse_body(&body)?;
    let kp = take_keypoints(&mut body)?;
    reject_unknown(&body)?;
    let [right, left] = hipmetrics_core::geometry::measure_pelvis(&kp)
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    Ok(Json(json!({
        "keypoints": keypoints_to_json(&kp),
        "right": MeasurementView::from(&right),
        "left": MeasurementView::from(&left),
    })))
}

async fn post_diagnose(State(state): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let mut body = parse_body(&body)?;
    let kp = take_keypoints(&mut body)?;
    let params = match body.remove("params") {
        None | Some(Value::Null) => state.params,
        Some(v) => {
            let p: ScoringParams = serde_json::from_value(v)
                .map_err(|e| ApiError::Unprocessable(format!("invalid params: {e}")))?;
            p.validate().map_err(|e| ApiError::Unprocessable(e.to_string()))?;
            p
        }
    };
    reject_unknown(&body)?;
    let mut out = evaluate(&kp, &params, &state.ranges)?;
    out["params"] = serde_json::to_value(params).expect("params serialize");
    Ok(Json(out))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/studies", get(list_studies))
        .route("/api/studies/{id}", get(get_study))
        .route("/api/studies/{id}/image", get(get_image))
        .route("/api/studies/{id}/keypoints", put(put_keypoints))
        .route("/api/measure", post(post_measure))
        .route("/api/diagnose", post(post_diagnose))
        .with_state(state)
}
