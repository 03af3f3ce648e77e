//! HTTP/JSON facade over a loaded [`Workspace`].
//!
//! Every route lives under a configurable base path. Errors are JSON bodies
//! of the form `{"code": "...", "message": "..."}`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use linkmap_core::graph::IssueFilter;
use linkmap_core::service::{DecisionRequest, ServiceError, Workspace};
use serde::Serialize;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

#[derive(Debug, Clone, Default)]
pub struct ApiConfig {
    /// Prefix for every route, e.g. `/api`. Empty serves from the root.
    pub base_path: String,
    /// Origin allowed by CORS; any origin when unset.
    pub cors_origin: Option<String>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_depth: Option<usize>,
}

/// A failed request: status plus JSON error body.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                max_depth: None,
            },
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::MalformedKey(_)
            | ServiceError::DepthTooLarge { .. }
            | ServiceError::InvalidDepth(_)
            | ServiceError::InvalidFilter(_)
            | ServiceError::InvalidDecision(_)
            | ServiceError::MissingLinkType
            | ServiceError::InvalidLinkType(_) => StatusCode::BAD_REQUEST,
            ServiceError::UnknownIssue(_) | ServiceError::NoPendingRecommendation { .. } => StatusCode::NOT_FOUND,
            ServiceError::AlreadyDecided { .. } => StatusCode::CONFLICT,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "request failed");
        }
        let mut err = ApiError::new(status, e.code(), e.to_string());
        if let ServiceError::DepthTooLarge { max, .. } = e {
            err.body.max_depth = Some(max);
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Params = Query<HashMap<String, String>>;

fn param<'a>(params: &'a HashMap<String, String>, name: &str) -> Option<&'a str> {
    params.get(name).map(String::as_str)
}

async fn issue(State(ws): State<Arc<Workspace>>, Path(key): Path<String>, Query(q): Params) -> ApiResult<impl Serialize> {
    let comments = match param(&q, "comments") {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") | Some("") => true,
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid-parameter",
                format!("comments must be true or false, got {other:?}"),
            ))
        }
    };
    Ok(Json(ws.issue(&key, comments)?))
}

async fn map(State(ws): State<Arc<Workspace>>, Path(key): Path<String>, Query(q): Params) -> ApiResult<impl Serialize> {
    let filter = IssueFilter::parse(
        param(&q, "type"),
        param(&q, "priority"),
        param(&q, "release"),
        param(&q, "project"),
        param(&q, "status"),
    )
    .map_err(ServiceError::from)?;
    Ok(Json(ws.map(&key, param(&q, "depth"), filter)?))
}

async fn recommendations(State(ws): State<Arc<Workspace>>, Path(key): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(ws.recommendations(&key)?))
}

async fn decide(
    State(ws): State<Arc<Workspace>>,
    Path((key, candidate)): Path<(String, String)>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let Json(request) =
        body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid-body", e.body_text()))?;
    Ok(Json(ws.decide(&key, &candidate, &request)?))
}

async fn consistency(
    State(ws): State<Arc<Workspace>>,
    Path(key): Path<String>,
    Query(q): Params,
) -> ApiResult<impl Serialize> {
    Ok(Json(ws.consistency(&key, param(&q, "depth"))?))
}

async fn stats(State(ws): State<Arc<Workspace>>) -> Json<impl Serialize> {
    Json(ws.stats())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no-route", "no such endpoint")
}

fn cors(origin: Option<&str>) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    match origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(origin) => layer.allow_origin(AllowOrigin::exact(origin)),
        None => layer.allow_origin(Any),
    }
}

pub fn router(workspace: Arc<Workspace>, config: &ApiConfig) -> Router {
    let api = Router::new()
        .route("/issues/{key}", get(issue))
        .route("/issues/{key}/map", get(map))
        .route("/issues/{key}/recommendations", get(recommendations))
        .route("/issues/{key}/recommendations/{candidate}", axum::routing::post(decide))
        .route("/issues/{key}/consistency", get(consistency))
        .route("/stats", get(stats))
        .with_state(workspace);
    let base = config.base_path.trim_end_matches('/');
    let app = if base.is_empty() {
        api
    } else {
        let base = if base.starts_with('/') { base.to_string() } else { format!("/{base}") };
        Router::new().nest(&base, api)
    };
    app.fallback(not_found).layer(cors(config.cors_origin.as_deref()))
}
