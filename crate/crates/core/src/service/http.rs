use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::Semaphore;

use super::{recommend, ServingBundle};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// Requests slower than this get a 503 instead of a result.
    pub deadline: Duration,
    /// Requests beyond this many in flight are shed with a 503.
    pub max_in_flight: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            deadline: Duration::from_millis(1000),
            max_in_flight: 64,
        }
    }
}

#[derive(Clone)]
struct AppState {
    bundle: Arc<ServingBundle>,
    slots: Arc<Semaphore>,
    deadline: Duration,
}

#[derive(Deserialize)]
struct RecommendRequest {
    items: Vec<String>,
    #[serde(default = "default_k")]
    k: usize,
}

fn default_k() -> usize {
    10
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn recommend_handler(State(state): State<AppState>, Json(req): Json<RecommendRequest>) -> Response {
    let Ok(permit) = state.slots.clone().try_acquire_owned() else {
        return error_response(StatusCode::SERVICE_UNAVAILABLE, "overloaded");
    };
    let bundle = state.bundle.clone();
    let work = tokio::task::spawn_blocking(move || {
        let _permit = permit;
        recommend(&bundle, &req.items, req.k)
    });
    match tokio::time::timeout(state.deadline, work).await {
        Err(_) => error_response(StatusCode::SERVICE_UNAVAILABLE, "deadline exceeded"),
        Ok(Err(e)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Ok(Ok(Ok(rec))) => Json(rec).into_response(),
        Ok(Ok(Err(Error::Request(m)))) => error_response(StatusCode::UNPROCESSABLE_ENTITY, m),
        Ok(Ok(Err(e))) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

/// `POST /recommend` and `GET /healthz`.
pub fn router(bundle: Arc<ServingBundle>, config: &ServerConfig) -> Router {
    let state = AppState {
        bundle,
        slots: Arc::new(Semaphore::new(config.max_in_flight.max(1))),
        deadline: config.deadline,
    };
    Router::new()
        .route("/recommend", post(recommend_handler))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state)
}

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    bundle: Arc<ServingBundle>,
    config: ServerConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    axum::serve(listener, router(bundle, &config))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}
