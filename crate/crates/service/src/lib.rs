//! Local HTTP service for the annotation UI.
//!
//! | method | path                              | purpose                              |
//! |--------|-----------------------------------|--------------------------------------|
//! | GET    | `/api/images`                     | image list with lot counts, revision |
//! | GET    | `/api/images/{id}/annotations`    | canonical annotation JSON            |
//! | PUT    | `/api/images/{id}/annotations`    | replace annotation (revision-checked)|
//! | GET    | `/api/images/{id}/file`           | image bytes                          |
//! | POST   | `/api/decide-preview`             | heuristic decisions for one image    |
//!
//! Image ids are the first 16 hex digits of SHA-256 of the image path.
//! Annotation responses carry the revision in `ETag` (quoted) and
//! `X-Revision`; a PUT must send the revision it read in `If-Match` or
//! `X-Revision` and fails with 409 when another write landed first.

use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use spotcheck_core::annotation::{ImageAnnotation, Violation, VisualTag};
use spotcheck_core::decision::{decide_image, parse_detections, DecisionParams, DecisionResult, Heuristic};
use spotcheck_core::eval::{write_predictions, PredictionRecord};
use spotcheck_core::manifest::{DatasetManifest, ManifestError};
use thiserror::Error;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

pub const X_REVISION: &str = "x-revision";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("image path {image} is annotated by both {first} and {second}")]
    DuplicateImage {
        image: String,
        first: String,
        second: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// URL-safe id of an image path.
pub fn image_id(image_path: &str) -> String {
    hex::encode(&Sha256::digest(image_path.as_bytes())[..8])
}

#[derive(Debug)]
struct Committed {
    revision: u64,
    annotation: ImageAnnotation,
    bytes: Arc<str>,
}

#[derive(Debug)]
struct Slot {
    id: String,
    entry: String,
    file: PathBuf,
    /// Serializes writers; tokio's mutex is fair, so writes queue up.
    writer: tokio::sync::Mutex<()>,
    committed: RwLock<Arc<Committed>>,
}

impl Slot {
    fn snapshot(&self) -> Arc<Committed> {
        self.committed.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// Annotation files of one dataset with their in-memory revisions.
#[derive(Debug)]
pub struct ServiceState {
    manifest: DatasetManifest,
    root: PathBuf,
    /// Ordered by image path.
    slots: Vec<Slot>,
    by_id: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSummary {
    pub id: String,
    pub path: String,
    pub annotation_file: String,
    pub lot_count: usize,
    pub labeled_count: usize,
    pub tags: Vec<VisualTag>,
    pub revision: u64,
}

impl ServiceState {
    /// Loads every annotation of the manifest. Revisions start at 0.
    pub fn load(manifest: DatasetManifest) -> Result<Self, ServiceError> {
        let root = manifest.resolved_root();
        let mut slots = Vec::with_capacity(manifest.entries.len());
        let mut seen: HashMap<String, String> = HashMap::new();
        for entry in &manifest.entries {
            let annotation = manifest.read_entry(entry)?;
            if let Some(first) = seen.insert(annotation.image.clone(), entry.clone()) {
                return Err(ServiceError::DuplicateImage {
                    image: annotation.image,
                    first,
                    second: entry.clone(),
                });
            }
            let bytes: Arc<str> = annotation.to_json().into();
            slots.push(Slot {
                id: image_id(&annotation.image),
                entry: entry.clone(),
                file: manifest.entry_path(entry),
                writer: tokio::sync::Mutex::new(()),
                committed: RwLock::new(Arc::new(Committed {
                    revision: 0,
                    annotation,
                    bytes,
                })),
            });
        }
        slots.sort_by(|a, b| a.snapshot().annotation.image.cmp(&b.snapshot().annotation.image));
        let by_id = slots.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        Ok(Self {
            manifest,
            root,
            slots,
            by_id,
        })
    }

    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        Self::load(DatasetManifest::open(path)?)
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    fn slot(&self, id: &str) -> Option<&Slot> {
        self.by_id.get(id).map(|&i| &self.slots[i])
    }

    pub fn summaries(&self) -> Vec<ImageSummary> {
        self.slots
            .iter()
            .map(|s| {
                let c = s.snapshot();
                ImageSummary {
                    id: s.id.clone(),
                    path: c.annotation.image.clone(),
                    annotation_file: s.entry.clone(),
                    lot_count: c.annotation.lots.len(),
                    labeled_count: c.annotation.labeled_count(),
                    tags: c.annotation.tags.iter().copied().collect(),
                    revision: c.revision,
                }
            })
            .collect()
    }
}

/// The API router, with the UI's static files under `/ui` when given.
pub fn router(state: Arc<ServiceState>, ui_dir: Option<&Path>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::PUT, Method::POST])
        .allow_headers(Any)
        .expose_headers([header::ETAG, HeaderName::from_static(X_REVISION)]);
    let mut app = Router::new()
        .route("/api/images", get(list_images))
        .route("/api/images/{id}/annotations", get(get_annotation).put(put_annotation))
        .route("/api/images/{id}/file", get(get_file))
        .route("/api/decide-preview", post(decide_preview))
        .with_state(state);
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.layer(cors)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<ServiceState>, ui_dir: Option<&Path>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir)).await
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn violations(message: &str, list: &[Violation]) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(json!({ "error": message, "violations": list })),
    )
        .into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("unknown image id {id:?}"))
}

fn revision_headers(revision: u64) -> [(HeaderName, HeaderValue); 2] {
    [
        (
            header::ETAG,
            HeaderValue::from_str(&format!("\"{revision}\"")).expect("ascii"),
        ),
        (HeaderName::from_static(X_REVISION), HeaderValue::from(revision)),
    ]
}

/// Reads the client's base revision from `If-Match` (`"3"`, `W/"3"` or
/// `3`) or `X-Revision`.
fn base_revision(headers: &HeaderMap) -> Option<Result<u64, String>> {
    let raw = headers
        .get(header::IF_MATCH)
        .or_else(|| headers.get(X_REVISION))?
        .to_str()
        .map(str::trim)
        .unwrap_or("");
    let digits = raw.trim_start_matches("W/").trim_matches('"');
    Some(digits.parse().map_err(|_| format!("invalid revision {raw:?}")))
}

async fn list_images(State(state): State<Arc<ServiceState>>) -> Json<Vec<ImageSummary>> {
    Json(state.summaries())
}

async fn get_annotation(State(state): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(slot) = state.slot(&id) else {
        return not_found(&id);
    };
    let c = slot.snapshot();
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        revision_headers(c.revision),
        c.bytes.to_string(),
    )
        .into_response()
}

fn write_atomically(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

async fn put_annotation(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let Some(slot) = state.slot(&id) else {
        return not_found(&id);
    };
    let base = match base_revision(&headers) {
        None => {
            return error(
                StatusCode::PRECONDITION_REQUIRED,
                "send the revision you read in If-Match or X-Revision",
            )
        }
        Some(Err(msg)) => return error(StatusCode::BAD_REQUEST, msg),
        Some(Ok(r)) => r,
    };
    let annotation = match ImageAnnotation::from_json(&body) {
        Ok(a) => a,
        Err(e) => return violations("annotation violates the schema", &e.violations),
    };

    let _guard = slot.writer.lock().await;
    let current = slot.snapshot();
    if annotation.image != current.annotation.image {
        return error(
            StatusCode::BAD_REQUEST,
            format!(
                "annotation is for {:?} but this id belongs to {:?}",
                annotation.image, current.annotation.image
            ),
        );
    }
    if base != current.revision {
        return (
            StatusCode::CONFLICT,
            revision_headers(current.revision),
            Json(json!({
                "error": "stale revision: the annotation changed since it was read",
                "current_revision": current.revision,
            })),
        )
            .into_response();
    }

    let bytes: Arc<str> = annotation.to_json().into();
    let file = slot.file.clone();
    let contents = bytes.clone();
    match tokio::task::spawn_blocking(move || write_atomically(&file, &contents)).await {
        Ok(Ok(())) => {}
        Ok(Err(e)) => {
            log::error!("writing {}: {e}", slot.file.display());
            return error(StatusCode::INTERNAL_SERVER_ERROR, format!("write failed: {e}"));
        }
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, format!("write task failed: {e}")),
    }
    let revision = current.revision + 1;
    *slot.committed.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(Committed {
        revision,
        annotation,
        bytes,
    });
    log::info!("saved {} at revision {revision}", slot.entry);
    (revision_headers(revision), Json(json!({ "revision": revision }))).into_response()
}

fn content_type(path: &str) -> &'static str {
    let ext = path.rsplit('.').next().unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "bmp" => "image/bmp",
        "gif" => "image/gif",
        "webp" => "image/webp",
        "tif" | "tiff" => "image/tiff",
        _ => "application/octet-stream",
    }
}

async fn get_file(State(state): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(slot) = state.slot(&id) else {
        return not_found(&id);
    };
    // The image path passed the schema's relative-path check on load.
    let image = slot.snapshot().annotation.image.clone();
    match tokio::fs::read(state.root.join(&image)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&image))], bytes).into_response(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            error(StatusCode::NOT_FOUND, format!("image file {image} not found"))
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewRequest {
    image: String,
    #[serde(default)]
    detections: serde_json::Value,
    #[serde(default)]
    heuristic: Heuristic,
    tau: Option<f64>,
    score_threshold: Option<f64>,
    accepted_labels: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PreviewResponse {
    pub image: String,
    pub revision: u64,
    pub results: Vec<PreviewResult>,
    /// The same records `spotcheck decide` writes, as JSON lines.
    pub predictions: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PreviewResult {
    pub lot_id: String,
    pub ratio: f64,
    pub decided: spotcheck_core::Decision,
    pub supporting_detection: Option<usize>,
}

impl From<&DecisionResult> for PreviewResult {
    fn from(r: &DecisionResult) -> Self {
        Self {
            lot_id: r.lot_id.clone(),
            ratio: r.ratio,
            decided: r.decided,
            supporting_detection: r.supporting_detection,
        }
    }
}

async fn decide_preview(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let req: PreviewRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid preview request: {e}")),
    };
    let Some(slot) = state.slot(&req.image) else {
        return not_found(&req.image);
    };
    let defaults = DecisionParams::default();
    let params = DecisionParams {
        heuristic: req.heuristic,
        tau: req.tau.unwrap_or(defaults.tau),
        score_threshold: req.score_threshold.unwrap_or(defaults.score_threshold),
        accepted_labels: req
            .accepted_labels
            .map(|l| l.into_iter().collect())
            .unwrap_or(defaults.accepted_labels),
    };
    if let Err(e) = params.validate() {
        return error(StatusCode::BAD_REQUEST, e.to_string());
    }
    let c = slot.snapshot();
    let detections = if req.detections.is_null() {
        Vec::new()
    } else {
        let doc = json!({ "image": c.annotation.image, "detections": req.detections });
        match parse_detections(doc.to_string().as_bytes()) {
            Ok(mut d) => d.pop().map(|d| d.detections).unwrap_or_default(),
            Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
        }
    };
    let out = match decide_image(&c.annotation, &detections, &params) {
        Ok(o) => o,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let records: Vec<PredictionRecord> = out
        .results
        .iter()
        .map(|r| PredictionRecord::from_decision(&c.annotation.image, r))
        .collect();
    Json(PreviewResponse {
        image: c.annotation.image.clone(),
        revision: c.revision,
        results: out.results.iter().map(PreviewResult::from).collect(),
        predictions: write_predictions(&records),
    })
    .into_response()
}
