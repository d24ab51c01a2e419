//! JSON HTTP API over a [`FrameStore`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use occ_core::aap::Edit;
use occ_core::grid::{GridSpec, SparseOccupancy};
use occ_core::labels::Label;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::{FrameRecord, FrameStatus, FrameStore, StoreError};
use crate::views::{payload, ViewPayload};

pub struct ApiError(StatusCode, String, String);

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::NotFound(_) | StoreError::InvalidId(_) => (StatusCode::NOT_FOUND, "not_found"),
            StoreError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            StoreError::OutOfBounds(_) => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_bounds"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError(status, code.into(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1, "message": self.2 }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub id: String,
    pub status: FrameStatus,
    pub occupied_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordJson {
    pub z: u32,
    pub y: u32,
    pub x: u32,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyJson {
    pub id: String,
    pub status: FrameStatus,
    pub spec: GridSpec,
    pub records: Vec<RecordJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal_length: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewsJson {
    pub id: String,
    pub frame_index: usize,
    pub views: Vec<ViewPayload>,
}

/// One edit as submitted; author and timestamp are optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditInput {
    pub z: usize,
    pub y: usize,
    pub x: usize,
    pub label: u8,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub ts: Option<i64>,
}

/// Either a bare list of edits or a batch with an idempotency token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EditBody {
    List(Vec<EditInput>),
    Batch { batch_id: Option<String>, edits: Vec<EditInput> },
}

fn occupancy_json(rec: &FrameRecord, grid: &SparseOccupancy, journal_length: Option<usize>) -> OccupancyJson {
    OccupancyJson {
        id: rec.id.clone(),
        status: rec.status,
        spec: *grid.spec(),
        records: grid.records().iter().map(|r| RecordJson { z: r.z, y: r.y, x: r.x, label: r.label.id() }).collect(),
        journal_length,
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, StoreError> + Send + 'static) -> Result<T, ApiError> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, "internal".into(), e.to_string())),
    }
}

async fn list_frames(State(store): State<Arc<FrameStore>>) -> ApiResult<Vec<FrameSummary>> {
    let recs = blocking(move || store.list()).await?;
    Ok(Json(recs.into_iter().map(|r| FrameSummary { id: r.id, status: r.status, occupied_count: r.occupied_count }).collect()))
}

async fn occupancy(State(store): State<Arc<FrameStore>>, Path(id): Path<String>) -> ApiResult<OccupancyJson> {
    blocking(move || {
        let rec = store.record(&id)?;
        let grid = store.current(&id)?;
        Ok(occupancy_json(&rec, &grid, None))
    })
    .await
    .map(Json)
}

async fn views(State(store): State<Arc<FrameStore>>, Path(id): Path<String>) -> ApiResult<ViewsJson> {
    blocking(move || {
        let rec = store.record(&id)?;
        let views = store.sensor_data(&id)?.map(|f| payload(&f)).unwrap_or_default();
        Ok(ViewsJson { id: rec.id, frame_index: rec.frame_index, views })
    })
    .await
    .map(Json)
}

fn unix_millis() -> i64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
}

async fn post_edits(
    State(store): State<Arc<FrameStore>>,
    Path(id): Path<String>,
    body: Result<Json<EditBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body.map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, "bad_body".into(), e.body_text()))?;
    let (batch_id, inputs) = match body {
        EditBody::List(edits) => (None, edits),
        EditBody::Batch { batch_id, edits } => (batch_id, edits),
    };
    let now = unix_millis();
    let mut edits = Vec::with_capacity(inputs.len());
    for e in inputs {
        let label = Label::new(e.label)
            .ok_or_else(|| ApiError(StatusCode::UNPROCESSABLE_ENTITY, "invalid_label".into(), format!("label {} not in 0..=17", e.label)))?;
        edits.push(Edit { z: e.z, y: e.y, x: e.x, label, author: e.author.unwrap_or_else(|| "annotator".into()), ts: e.ts.unwrap_or(now) });
    }
    let ack = blocking(move || store.append_edits(&id, batch_id.as_deref(), &edits)).await?;
    let status = if ack.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(ack)).into_response())
}

async fn preview(State(store): State<Arc<FrameStore>>, Path(id): Path<String>) -> ApiResult<OccupancyJson> {
    blocking(move || {
        let rec = store.record(&id)?;
        let grid = store.preview(&id)?.to_sparse();
        Ok(occupancy_json(&rec, &grid, Some(rec.journal_length)))
    })
    .await
    .map(Json)
}

async fn finalize(State(store): State<Arc<FrameStore>>, Path(id): Path<String>) -> ApiResult<FrameSummary> {
    let rec = blocking(move || store.finalize(&id)).await?;
    Ok(Json(FrameSummary { id: rec.id, status: rec.status, occupied_count: rec.occupied_count }))
}

pub fn router(store: Arc<FrameStore>) -> Router {
    Router::new()
        .route("/api/frames", get(list_frames))
        .route("/api/frames/{id}/occupancy", get(occupancy))
        .route("/api/frames/{id}/views", get(views))
        .route("/api/frames/{id}/edits", post(post_edits))
        .route("/api/frames/{id}/preview", get(preview))
        .route("/api/frames/{id}/finalize", post(finalize))
        .with_state(store)
}

/// Binds `addr` and serves until the process is interrupted.
pub async fn serve(store: Arc<FrameStore>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
