//! Review API.
//!
//! | method | path                      | effect                                  |
//! |--------|---------------------------|-----------------------------------------|
//! | GET    | `/docs`                   | list documents                          |
//! | GET    | `/docs/{id}`              | text, annotations, lints, report        |
//! | POST   | `/docs/{id}/annotations`  | replace the working annotation set      |
//! | POST   | `/docs/{id}/accept`       | copy the working set to `gold/`         |
//!
//! Writes carry the text digest the client saw (and optionally the revision
//! of the annotation file it edited); a mismatch is answered with 409. All
//! writes go through one lock, so a check and its write cannot interleave
//! with another request's.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mythmark::gateway::Clock;
use mythmark::pipeline::lint_document;
use mythmark::schema::{validate_annotations, Annotation, ReviewInfo, SchemaError, StandoffFile};
use mythmark::text::sha256_hex;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;

use crate::store::{Store, StoreError};

struct AppState {
    store: Store,
    writes: Mutex<()>,
}

pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl std::fmt::Display) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.to_string() }),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownDoc(_) | StoreError::BadId(_) => ApiError::new(StatusCode::NOT_FOUND, e),
            StoreError::Invalid { report, .. } => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: serde_json::to_value(report).expect("report serializes"),
            },
            StoreError::Schema(SchemaError::DigestMismatch { .. }) => ApiError::new(StatusCode::CONFLICT, e),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

pub fn router(store: Store) -> Router {
    let state = Arc::new(AppState {
        store,
        writes: Mutex::new(()),
    });
    Router::new()
        .route("/docs", get(list_docs))
        .route("/docs/{id}", get(get_doc))
        .route("/docs/{id}/annotations", post(replace_annotations))
        .route("/docs/{id}/accept", post(accept))
        .with_state(state)
}

async fn list_docs(State(state): State<Arc<AppState>>) -> ApiResult {
    let store = &state.store;
    let mut docs = Vec::new();
    for id in store.doc_ids()? {
        let annotations = store.read_annotations(&id)?.map(|(f, _)| f.annotations.len());
        docs.push(json!({
            "doc_id": id,
            "annotations": annotations,
            "gold": store.gold_path(&id).is_file(),
        }));
    }
    Ok(Json(json!({ "docs": docs })))
}

async fn get_doc(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let store = &state.store;
    let doc = store.load_document(&id)?;
    let revision = store.read_annotations(&id)?.map(|(_, r)| r);
    Ok(Json(json!({
        "doc_id": id,
        "text": doc.text,
        "text_sha256": doc.text_sha256(),
        "revision": revision,
        "annotations": doc.annotations,
        "lints": lint_document(&doc),
        "report": store.read_report(&id)?,
        "gold": store.gold_path(&id).is_file(),
    })))
}

/// Checks the client's view of the document against the store.
fn preconditions(
    text: &str,
    current: Option<&String>,
    text_sha256: Option<&str>,
    base_revision: Option<&str>,
) -> Result<(), ApiError> {
    let digest = sha256_hex(text);
    if let Some(seen) = text_sha256 {
        if !seen.eq_ignore_ascii_case(&digest) {
            return Err(ApiError {
                status: StatusCode::CONFLICT,
                body: json!({ "error": "text digest does not match the stored text", "text_sha256": digest }),
            });
        }
    }
    if let Some(base) = base_revision {
        if current.map(String::as_str) != Some(base) {
            return Err(ApiError {
                status: StatusCode::CONFLICT,
                body: json!({ "error": "annotations changed since they were loaded", "revision": current }),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct AnnotationUpdate {
    text_sha256: String,
    #[serde(default)]
    base_revision: Option<String>,
    annotations: Vec<Annotation>,
}

async fn replace_annotations(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(update): Json<AnnotationUpdate>,
) -> ApiResult {
    let store = &state.store;
    let _guard = state.writes.lock().await;
    let text = store.read_text(&id)?;
    let current = store.read_annotations(&id)?;
    let revision = current.as_ref().map(|(_, r)| r.clone());
    preconditions(&text, revision.as_ref(), Some(&update.text_sha256), update.base_revision.as_deref())?;

    let report = validate_annotations(&text, &update.annotations);
    if !report.is_valid() {
        return Err(StoreError::Invalid { doc_id: id, report }.into());
    }
    let file = StandoffFile {
        doc_id: id.clone(),
        text_sha256: sha256_hex(&text),
        span_convention: None,
        review: None,
        provenance: current.and_then(|(f, _)| f.provenance),
        annotations: update.annotations,
    };
    let revision = store.write_standoff(&store.annotations_path(&id), &file)?;
    let doc = file.into_document(text).map_err(StoreError::from)?;
    Ok(Json(json!({ "revision": revision, "lints": lint_document(&doc) })))
}

#[derive(Debug, Deserialize)]
struct AcceptRequest {
    reviewer: String,
    #[serde(default)]
    note: Option<String>,
    #[serde(default)]
    span_convention: Option<String>,
    #[serde(default)]
    text_sha256: Option<String>,
    #[serde(default)]
    base_revision: Option<String>,
}

async fn accept(State(state): State<Arc<AppState>>, Path(id): Path<String>, Json(req): Json<AcceptRequest>) -> ApiResult {
    if req.reviewer.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "reviewer is required"));
    }
    let store = &state.store;
    let _guard = state.writes.lock().await;
    let text = store.read_text(&id)?;
    let Some((working, revision)) = store.read_annotations(&id)? else {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("`{id}` has no annotations to accept")));
    };
    preconditions(&text, Some(&revision), req.text_sha256.as_deref(), req.base_revision.as_deref())?;

    let accepted_at = Clock::System.now();
    let gold = StandoffFile {
        span_convention: req.span_convention,
        review: Some(ReviewInfo {
            reviewer: req.reviewer,
            accepted_at: Some(accepted_at.clone()),
            note: req.note,
        }),
        ..working
    };
    let path = store.gold_path(&id);
    store.write_standoff(&path, &gold)?;
    Ok(Json(json!({
        "doc_id": id,
        "gold": format!("gold/{id}.json"),
        "annotations": gold.annotations.len(),
        "revision": revision,
        "accepted_at": accepted_at,
    })))
}
