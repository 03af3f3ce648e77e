#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use linkmap_api::{router, ApiConfig};
use linkmap_core::ingestion::IssueDump;
use linkmap_core::service::{Workspace, DEFAULT_MAX_DEPTH};
use serde_json::Value;
use tower::ServiceExt;

pub fn workspace(dump: &IssueDump, log: Option<&Path>) -> Arc<Workspace> {
    Arc::new(Workspace::open(dump, log, DEFAULT_MAX_DEPTH).unwrap().workspace)
}

pub fn app(dump: &IssueDump) -> Router {
    router(workspace(dump, None), &ApiConfig::default())
}

pub async fn raw(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut request = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            request = request.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let response = app.clone().oneshot(request.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, bytes) = raw(app, Method::GET, uri, None).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (status, bytes) = raw(app, Method::POST, uri, Some(body)).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

pub fn has_edge(map: &Value, source: &str, target: &str, link_type: &str) -> bool {
    map["edges"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["source"] == source && e["target"] == target && e["type"] == link_type)
}
