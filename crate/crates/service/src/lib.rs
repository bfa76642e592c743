//! HTTP API over an [`AnnotationStore`].
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/queries/next?annotator=&lang=` | next query, 204 when done |
//! | GET | `/api/queries/{id}` | one query |
//! | POST | `/api/queries/{id}/verbalization` | `{annotator, lang, text}` |
//! | POST | `/api/queries/{id}/flag` | `{annotator, kind, comment}` |
//! | GET | `/api/progress` | counts per status and language |
//! | GET | `/api/export` | merged QALD document |
//! | GET | `/api/export/report` | flagged and pending ids |
//!
//! The annotator may also be given in an `X-Annotator` header.

pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

pub use store::{
    AnnotationRecord, AnnotationStore, ExportReport, Progress, QueryStatus, QueryView, RecordKind, StoreError,
    DEFAULT_LANGUAGES,
};

pub type SharedStore = Arc<RwLock<AnnotationStore>>;

pub const ANNOTATOR_HEADER: &str = "x-annotator";

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match e {
            StoreError::UnknownQuery(_) => StatusCode::NOT_FOUND,
            StoreError::InvalidRecord(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

fn annotator(body: Option<String>, headers: &HeaderMap) -> Result<String, ApiError> {
    body.filter(|a| !a.trim().is_empty())
        .or_else(|| headers.get(ANNOTATOR_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string))
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| ApiError(StatusCode::UNPROCESSABLE_ENTITY, "annotator is required".into()))
}

#[derive(Deserialize)]
struct NextParams {
    annotator: Option<String>,
    lang: String,
}

async fn next_query(State(s): State<SharedStore>, headers: HeaderMap, Query(p): Query<NextParams>) -> Result<Response, ApiError> {
    let who = annotator(p.annotator, &headers)?;
    let store = s.read().expect("store lock");
    if !store.languages().contains(&p.lang) {
        return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("unknown language {}", p.lang)));
    }
    Ok(match store.next_query(&who, &p.lang) {
        Some(v) => Json(v).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn get_query(State(s): State<SharedStore>, Path(id): Path<String>) -> Result<Json<QueryView>, ApiError> {
    s.read().expect("store lock").view(&id).map(Json).ok_or(ApiError(StatusCode::NOT_FOUND, format!("unknown query {id}")))
}

#[derive(Deserialize)]
struct VerbalizationBody {
    annotator: Option<String>,
    lang: String,
    text: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum FlagKind {
    NotUnderstood,
    Unnatural,
}

#[derive(Deserialize)]
struct FlagBody {
    annotator: Option<String>,
    kind: FlagKind,
    comment: String,
}

fn submit(s: &SharedStore, record: AnnotationRecord) -> Result<Json<serde_json::Value>, ApiError> {
    let id = record.query_id.clone();
    let status = s.write().expect("store lock").submit(record)?;
    Ok(Json(json!({ "id": id, "status": status })))
}

async fn post_verbalization(
    State(s): State<SharedStore>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(b): Json<VerbalizationBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let record = AnnotationRecord {
        query_id: id,
        annotator: annotator(b.annotator, &headers)?,
        language: Some(b.lang),
        kind: RecordKind::Verbalization,
        text: b.text,
        timestamp: Utc::now(),
    };
    submit(&s, record)
}

async fn post_flag(
    State(s): State<SharedStore>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(b): Json<FlagBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let record = AnnotationRecord {
        query_id: id,
        annotator: annotator(b.annotator, &headers)?,
        language: None,
        kind: match b.kind {
            FlagKind::NotUnderstood => RecordKind::FlagNotUnderstood,
            FlagKind::Unnatural => RecordKind::FlagUnnatural,
        },
        text: b.comment,
        timestamp: Utc::now(),
    };
    submit(&s, record)
}

async fn progress(State(s): State<SharedStore>) -> Json<Progress> {
    Json(s.read().expect("store lock").progress())
}

async fn export(State(s): State<SharedStore>) -> Result<Response, ApiError> {
    let text = s.read().expect("store lock").export_qald()?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

async fn export_report(State(s): State<SharedStore>) -> Json<ExportReport> {
    Json(s.read().expect("store lock").export_merged().1)
}

pub fn router(store: SharedStore, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queries/next", get(next_query))
        .route("/api/queries/{id}", get(get_query))
        .route("/api/queries/{id}/verbalization", post(post_verbalization))
        .route("/api/queries/{id}/flag", post(post_flag))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .route("/api/export/report", get(export_report))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: SharedStore,
    static_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store, static_dir)).with_graceful_shutdown(shutdown).await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await
}
