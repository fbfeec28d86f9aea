//! HTTP surface over the run store and scheduler.

use std::io::SeekFrom;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::io::{AsyncReadExt, AsyncSeekExt};

use searchsim_core::iface::{bundled_recipe, bundled_recipe_ids};
use searchsim_core::sim::{prepare, RunConfig};
use searchsim_core::simulators::Registry;

use crate::commands::{evaluate_run_dir, TruthSpec};
use crate::scheduler::{CancelOutcome, Scheduler};
use crate::store::{StoreError, TRACE_FILE};

#[derive(Clone)]
pub struct AppState {
    pub scheduler: Arc<Scheduler>,
    /// Relative paths in submitted configs and truth specs resolve here.
    pub base_dir: PathBuf,
    /// Poll interval of live trace streams.
    pub poll: Duration,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/runs", post(create_run).get(list_runs))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/runs/{id}/trace", get(stream_trace))
        .route("/api/runs/{id}/cancel", post(cancel_run))
        .route("/api/runs/{id}/eval", post(eval_run))
        .route("/api/components", get(components))
        .route("/api/recipes", get(recipes))
        .with_state(state)
}

struct ApiError(StatusCode, serde_json::Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Transition { .. } => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, json!({ "error": e.to_string() }))
    }
}

fn blocking_failed(e: tokio::task::JoinError) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() }))
}

async fn create_run(State(st): State<AppState>, body: String) -> Result<Response, ApiError> {
    let invalid = |field: String, message: String| {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": "invalid config", "field": field, "message": message }))
    };
    let config = RunConfig::from_json(&body, &st.base_dir).map_err(|e| invalid(e.field, e.message))?;
    let sched = Arc::clone(&st.scheduler);
    let rec = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        prepare(&config).map_err(|e| invalid(e.field, e.message))?;
        let rec = sched.store().create(&config)?;
        sched.submit(&rec.run_id);
        Ok(rec)
    })
    .await
    .map_err(blocking_failed)??;
    Ok((StatusCode::CREATED, Json(json!({ "run_id": rec.run_id }))).into_response())
}

async fn list_runs(State(st): State<AppState>) -> Result<Response, ApiError> {
    Ok(Json(st.scheduler.store().list()?).into_response())
}

async fn get_run(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(st.scheduler.store().load(&id)?).into_response())
}

#[derive(Deserialize)]
struct FromStep {
    #[serde(default)]
    from: u64,
}

struct Tail {
    st: AppState,
    id: String,
    offset: u64,
    line: u64,
    from: u64,
    pending: Vec<u8>,
}

impl Tail {
    /// Next batch of complete lines at or after `from`; None once the run
    /// is finished and everything it wrote has been sent.
    async fn next(mut self) -> Option<(Bytes, Tail)> {
        let path = self.st.scheduler.store().dir(&self.id).join(TRACE_FILE);
        loop {
            // Status first: a terminal status means the trace is complete.
            let finished = self.st.scheduler.store().load(&self.id).map_or(true, |r| r.status.is_terminal());
            let mut fresh = Vec::new();
            if let Ok(mut f) = tokio::fs::File::open(&path).await {
                if f.seek(SeekFrom::Start(self.offset)).await.is_ok() {
                    let _ = f.read_to_end(&mut fresh).await;
                }
            }
            self.offset += fresh.len() as u64;
            self.pending.extend_from_slice(&fresh);
            let mut out = Vec::new();
            while let Some(i) = self.pending.iter().position(|b| *b == b'\n') {
                let line: Vec<u8> = self.pending.drain(..=i).collect();
                if self.line >= self.from {
                    out.extend_from_slice(&line);
                }
                self.line += 1;
            }
            if !out.is_empty() {
                return Some((Bytes::from(out), self));
            }
            if finished {
                return None;
            }
            tokio::time::sleep(self.st.poll).await;
        }
    }
}

async fn stream_trace(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FromStep>,
) -> Result<Response, ApiError> {
    st.scheduler.store().load(&id)?;
    let tail = Tail { st, id, offset: 0, line: 0, from: q.from, pending: Vec::new() };
    let stream = futures::stream::unfold(tail, |t| async move {
        t.next().await.map(|(bytes, t)| (Ok::<_, std::io::Error>(bytes), t))
    });
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(stream)).into_response())
}

async fn cancel_run(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match st.scheduler.cancel(&id)? {
        CancelOutcome::Requested => Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": id, "cancel": "requested" }))).into_response()),
        CancelOutcome::AlreadyFinished(status) => Err(ApiError(
            StatusCode::CONFLICT,
            json!({ "error": format!("run {id} already finished"), "status": status }),
        )),
    }
}

async fn eval_run(State(st): State<AppState>, Path(id): Path<String>, body: String) -> Result<Response, ApiError> {
    let truth: TruthSpec = if body.trim().is_empty() {
        TruthSpec::default()
    } else {
        serde_json::from_str(&body)
            .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": format!("invalid truth spec: {e}") })))?
    };
    let rec = st.scheduler.store().load(&id)?;
    if !rec.status.is_terminal() {
        return Err(ApiError(
            StatusCode::CONFLICT,
            json!({ "error": format!("run {id} has not finished"), "status": rec.status }),
        ));
    }
    let dir = st.scheduler.store().dir(&id);
    let base = st.base_dir.clone();
    let report = tokio::task::spawn_blocking(move || evaluate_run_dir(&dir, &truth, &base))
        .await
        .map_err(blocking_failed)?
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": e })))?;
    Ok(Json(report).into_response())
}

async fn components() -> Response {
    Json(Registry::builtin().entries().to_vec()).into_response()
}

async fn recipes() -> Response {
    let list: Vec<_> = bundled_recipe_ids()
        .into_iter()
        .map(|id| json!({ "recipe_id": id, "recipe": bundled_recipe(id) }))
        .collect();
    Json(list).into_response()
}
