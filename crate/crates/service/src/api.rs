//! HTTP run-management API.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use diligence_core::intake::TriggerPayload;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::runs::{RunService, TriggerError};
use crate::store::{RunId, RunState};

/// Body of `POST /runs`. The request time is stamped on arrival.
#[derive(Debug, Deserialize)]
pub struct RunRequest {
    pub company_id: String,
    pub requested_by: String,
}

#[derive(Debug, Serialize)]
pub struct Accepted {
    pub run_id: RunId,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn create_run(
    State(service): State<Arc<RunService>>,
    request: Result<Json<RunRequest>, JsonRejection>,
) -> Response {
    let Json(request) = match request {
        Ok(r) => r,
        Err(rejection) => return error(StatusCode::BAD_REQUEST, rejection.body_text()),
    };
    match service.trigger(TriggerPayload::new(
        request.company_id,
        request.requested_by,
    )) {
        Ok(run_id) => (StatusCode::ACCEPTED, Json(Accepted { run_id })).into_response(),
        Err(e @ TriggerError::Malformed(_)) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e @ TriggerError::UnknownCompany(_)) => error(StatusCode::NOT_FOUND, e.to_string()),
        Err(e @ TriggerError::Store(_)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn get_run(State(service): State<Arc<RunService>>, Path(id): Path<String>) -> Response {
    match service.get(&RunId(id)) {
        Some(record) => Json(record).into_response(),
        None => error(StatusCode::NOT_FOUND, "unknown run"),
    }
}

async fn list_runs(State(service): State<Arc<RunService>>) -> Response {
    Json(service.list()).into_response()
}

async fn get_report(State(service): State<Arc<RunService>>, Path(id): Path<String>) -> Response {
    let Some(record) = service.get(&RunId(id)) else {
        return error(StatusCode::NOT_FOUND, "unknown run");
    };
    let Some(path) = record.report_path else {
        return match record.state {
            RunState::Failed => error(StatusCode::NOT_FOUND, "run failed without a report"),
            _ => error(StatusCode::CONFLICT, "run has not finished"),
        };
    };
    match tokio::fs::read_to_string(&path).await {
        Ok(html) => ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], html).into_response(),
        Err(e) => error(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("{}: {e}", path.display()),
        ),
    }
}

async fn companies(State(service): State<Arc<RunService>>) -> Response {
    Json(service.companies()).into_response()
}

pub fn router(service: Arc<RunService>) -> Router {
    Router::new()
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/report", get(get_report))
        .route("/companies", get(companies))
        .with_state(service)
}
