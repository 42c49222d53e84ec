//! Stateless HTTP service. Handlers only read the shared engine.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use frs_core::Engine;
use serde::Serialize;
use serde_json::{json, Value};

use crate::api::{self, ApiError, CounterfactualResult, ScoreRequest, WhatIfRequest};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::BAD_REQUEST);
        (status, Json(self.body())).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body(body: &Bytes) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::Malformed(format!("invalid JSON body: {e}")))
}

async fn score(State(engine): State<Arc<Engine>>, body: Bytes) -> ApiResult<api::ScoreResponse> {
    let req = ScoreRequest::from_json(&parse_body(&body)?)?;
    api::score(&engine, &req.profile, &req.options).map(Json)
}

async fn whatif(State(engine): State<Arc<Engine>>, body: Bytes) -> ApiResult<api::ScoreResponse> {
    let req = WhatIfRequest::from_json(&parse_body(&body)?)?;
    api::whatif(&engine, &req).map(Json)
}

async fn counterfactual(State(engine): State<Arc<Engine>>, body: Bytes) -> ApiResult<CounterfactualResult> {
    let req = ScoreRequest::from_json(&parse_body(&body)?)?;
    match api::counterfactual(&engine, &req.profile, &req.options)? {
        CounterfactualResult::Unreachable { target } => Err(ApiError::Unreachable { target }),
        other => Ok(Json(other)),
    }
}

async fn schema(State(engine): State<Arc<Engine>>) -> Json<Value> {
    Json(api::schema(&engine))
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok", version: env!("CARGO_PKG_VERSION") })
}

async fn not_found() -> (StatusCode, Json<Value>) {
    (StatusCode::NOT_FOUND, Json(json!({ "error": "not found" })))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/api/score", post(score))
        .route("/api/whatif", post(whatif))
        .route("/api/counterfactual", post(counterfactual))
        .route("/api/schema", get(schema))
        .route("/api/health", get(health))
        .fallback(not_found)
        .with_state(engine)
}
