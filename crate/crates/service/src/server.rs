//! HTTP front end over [`Pipeline`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use empath_core::labels::Language;
use serde::Deserialize;
use serde_json::json;

use crate::pipeline::{AnalyzeError, Pipeline};

pub const MAX_UPLOAD_BYTES: usize = 32 << 20;

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/api/v1/analyze", post(analyze))
        .route("/api/v1/audio/{audio_ref}", get(audio))
        .route("/api/v1/health", get(health))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(pipeline)
}

struct ApiError {
    status: StatusCode,
    message: String,
    stage: Option<&'static str>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            stage: None,
        }
    }
}

impl From<AnalyzeError> for ApiError {
    fn from(e: AnalyzeError) -> Self {
        let status = match e {
            AnalyzeError::Decode(_) => StatusCode::BAD_REQUEST,
            AnalyzeError::Stage { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            stage: Some(e.stage().name()),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "stage": self.stage }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct AnalyzeQuery {
    lang: Option<String>,
    session: Option<String>,
}

async fn analyze(
    State(pipeline): State<Arc<Pipeline>>,
    Query(query): Query<AnalyzeQuery>,
    mut multipart: Multipart,
) -> Result<Response, ApiError> {
    let language = match query.lang.as_deref() {
        None => Language::En,
        Some(code) => code.parse().map_err(|e: empath_core::labels::LabelError| ApiError::bad_request(e.to_string()))?,
    };
    let mut audio = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(format!("bad multipart body: {e}")))?
    {
        if field.name() == Some("audio") {
            let bytes = field
                .bytes()
                .await
                .map_err(|e| ApiError::bad_request(format!("cannot read audio field: {e}")))?;
            audio = Some(bytes);
            break;
        }
    }
    let audio = audio.ok_or_else(|| ApiError::bad_request("multipart field `audio` is missing"))?;
    let session = query.session.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());

    let response = tokio::task::spawn_blocking(move || pipeline.analyze(&audio, language, &session))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("analyze task failed: {e}"),
            stage: None,
        })??;
    Ok(Json(response).into_response())
}

async fn audio(State(pipeline): State<Arc<Pipeline>>, Path(audio_ref): Path<String>) -> Response {
    match pipeline.clip(&audio_ref) {
        Some(wav) => ([(header::CONTENT_TYPE, "audio/wav")], wav.as_ref().clone()).into_response(),
        None => ApiError {
            status: StatusCode::NOT_FOUND,
            message: format!("no audio clip {audio_ref:?}"),
            stage: None,
        }
        .into_response(),
    }
}

async fn health(State(pipeline): State<Arc<Pipeline>>) -> Response {
    Json(pipeline.health()).into_response()
}

/// Binds, prints `listening on <addr>` to stdout, and serves until ctrl-c.
pub async fn serve(pipeline: Pipeline, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| anyhow::anyhow!("startup failed at bind: {addr}: {e}"))?;
    let local = listener.local_addr()?;
    println!("listening on {local}");
    tracing::info!(%local, "serving");
    axum::serve(listener, router(Arc::new(pipeline)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
