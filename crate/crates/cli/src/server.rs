//! JSON API for participant sessions.
//!
//! ```text
//! POST /sessions                    {task, seed?}      -> {session_id, list_id, n_trials}
//! GET  /sessions/{id}                                  -> progress, for resuming
//! GET  /sessions/{id}/trials/{k}                       -> {item_id, verb, words, task}
//! POST /sessions/{id}/responses     {item_id, choice, latency_ms}
//! GET  /report                                         -> aggregate scores
//! ```
//!
//! Trials are numbered from 0.

use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::SecondsFormat;
use serde::{Deserialize, Serialize};
use svolab::experiment::{
    experiment_report, ExperimentError, ExperimentReport, Runner, ScoringMode, ScoringOptions, SessionStatus,
    Submission, Task, TrialPayload,
};

pub struct AppState {
    pub runner: Mutex<Runner>,
    pub catch_threshold: usize,
    pub construct_mode: ScoringMode,
}

impl AppState {
    pub fn new(runner: Runner) -> AppState {
        AppState {
            runner: Mutex::new(runner),
            catch_threshold: svolab::experiment::CATCH_THRESHOLD,
            construct_mode: ScoringMode::Order,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub task: Task,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub list_id: usize,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionProgress {
    pub session_id: String,
    pub list_id: usize,
    pub task: Task,
    pub n_trials: usize,
    pub answered: usize,
    pub next_trial: Option<usize>,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub answered: usize,
    pub n_trials: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub error: String,
    pub message: String,
}

pub struct ApiError(ExperimentError);

impl From<ExperimentError> for ApiError {
    fn from(e: ExperimentError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use ExperimentError as E;
        let (status, code) = match &self.0 {
            E::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            E::UnknownTrial { .. } => (StatusCode::NOT_FOUND, "unknown_trial"),
            E::UnknownList(_) => (StatusCode::NOT_FOUND, "unknown_list"),
            E::UnknownItem(_) => (StatusCode::NOT_FOUND, "unknown_item"),
            E::DuplicateResponse { .. } => (StatusCode::CONFLICT, "duplicate_response"),
            E::OutOfOrder { .. } => (StatusCode::CONFLICT, "out_of_order"),
            E::ForeignChoice(_) => (StatusCode::UNPROCESSABLE_ENTITY, "foreign_choice"),
            E::WrongChoiceKind { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "wrong_choice_kind"),
            E::ItemNotInSession { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "item_not_in_session"),
            E::TaskMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "task_mismatch"),
            E::IncompleteSession { .. } => (StatusCode::CONFLICT, "incomplete_session"),
            E::Unadjudicated(_) => (StatusCode::CONFLICT, "unadjudicated"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        let body = ApiErrorBody {
            error: code.to_string(),
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<AppState>;

fn lock(state: &AppState) -> std::sync::MutexGuard<'_, Runner> {
    // a panic while holding the lock cannot leave the runner half-updated:
    // the log append happens before the in-memory push
    state.runner.lock().unwrap_or_else(|p| p.into_inner())
}

async fn create_session(
    State(state): State<Shared>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let mut runner = lock(&state);
    let s = runner.start_session(req.task, req.seed)?;
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: s.session_id.clone(),
            list_id: s.list_id,
            n_trials: s.trial_order.len(),
        }),
    ))
}

async fn session_progress(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionProgress>, ApiError> {
    let runner = lock(&state);
    let s = runner.session(&id)?;
    Ok(Json(SessionProgress {
        session_id: s.session_id.clone(),
        list_id: s.list_id,
        task: s.task,
        n_trials: s.trial_order.len(),
        answered: s.responses.len(),
        next_trial: s.next_trial(),
        status: s.status(),
    }))
}

async fn trial(State(state): State<Shared>, Path((id, k)): Path<(String, usize)>) -> Result<Json<TrialPayload>, ApiError> {
    Ok(Json(lock(&state).trial(&id, k)?))
}

async fn respond(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(sub): Json<Submission>,
) -> Result<Json<Ack>, ApiError> {
    let stamp = chrono::Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
    let mut runner = lock(&state);
    let answered = runner.record_response(&id, sub, stamp)?;
    let n_trials = runner.session(&id)?.trial_order.len();
    Ok(Json(Ack {
        answered,
        n_trials,
        complete: answered == n_trials,
    }))
}

async fn report(State(state): State<Shared>) -> Result<Json<ExperimentReport>, ApiError> {
    let runner = lock(&state);
    let opts = ScoringOptions {
        catch_threshold: state.catch_threshold,
        construct_mode: state.construct_mode,
        ..Default::default()
    };
    Ok(Json(experiment_report(&runner, &opts)?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_progress))
        .route("/sessions/{id}/trials/{k}", get(trial))
        .route("/sessions/{id}/responses", post(respond))
        .route("/report", get(report))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
