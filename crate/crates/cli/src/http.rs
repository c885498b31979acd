//! JSON API over a [`DraftService`].
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/api/cards` | |
//! | GET | `/api/models` | |
//! | GET | `/api/models/:id/embeddings` | |
//! | POST | `/api/sessions` | `{"model_id": ..}` |
//! | GET | `/api/sessions/:id` | |
//! | POST | `/api/sessions/:id/recommend` | `{"pack": [ids]}` |
//! | POST | `/api/sessions/:id/pick` | `{"pack": [ids], "picked": id}` |
//!
//! Errors are `{"error": message}` with status 404 (unknown model or
//! session), 400 (malformed request), 409 (draft complete) or 500.

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use cprdraft_core::service::{DraftService, ServiceError};
use cprdraft_core::CardId;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match e {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Invalid(_) => StatusCode::BAD_REQUEST,
            ServiceError::DraftComplete => StatusCode::CONFLICT,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError { status, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError { status: StatusCode::BAD_REQUEST, message: format!("invalid request body: {e}") })
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    model_id: String,
}

#[derive(Debug, Deserialize)]
struct PackBody {
    pack: Vec<CardId>,
}

#[derive(Debug, Deserialize)]
struct PickBody {
    pack: Vec<CardId>,
    picked: CardId,
}

#[derive(Debug, Serialize)]
struct PickResponse {
    anchor_size: usize,
}

type Svc = Arc<DraftService>;

async fn cards(State(svc): State<Svc>) -> Response {
    Json(svc.cards()).into_response()
}

async fn models(State(svc): State<Svc>) -> Response {
    Json(svc.models()).into_response()
}

async fn embeddings(State(svc): State<Svc>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let result = tokio::task::spawn_blocking(move || svc.embeddings(&id))
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })??;
    Ok(Json(&*result).into_response())
}

async fn create_session(State(svc): State<Svc>, body: Bytes) -> Result<(StatusCode, Response), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let view = svc.create_session(&req.model_id)?;
    Ok((StatusCode::CREATED, Json(view).into_response()))
}

async fn get_session(
    State(svc): State<Svc>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<cprdraft_core::service::SessionView> {
    Ok(Json(svc.get_session(&id)?))
}

async fn recommend(
    State(svc): State<Svc>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<cprdraft_core::service::RecommendationResponse> {
    let req: PackBody = parse_body(&body)?;
    Ok(Json(svc.recommend(&id, &req.pack)?))
}

async fn pick(State(svc): State<Svc>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<PickResponse> {
    let req: PickBody = parse_body(&body)?;
    let anchor_size = svc.record_pick(&id, &req.pack, req.picked)?;
    Ok(Json(PickResponse { anchor_size }))
}

async fn not_found() -> ApiError {
    ApiError { status: StatusCode::NOT_FOUND, message: "no such endpoint".into() }
}

/// Builds the API router; `static_dir`, when given, is served for all
/// non-API paths.
pub fn router(service: Arc<DraftService>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/cards", get(cards))
        .route("/models", get(models))
        .route("/models/:id/embeddings", get(embeddings))
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/recommend", post(recommend))
        .route("/sessions/:id/pick", post(pick))
        .fallback(not_found)
        .with_state(service);
    let app = Router::new().nest("/api", api);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(not_found),
    }
}
