//! JSON HTTP API over a shared session. Queries run under a read lock and
//! only take the write lock to record their result; `/load` holds the write
//! lock for the whole reload.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kriq_core::planner::Mode;
use parking_lot::RwLock;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::{Session, SessionError};

pub type SharedSession = Arc<RwLock<Session>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryBody {
    text: String,
    #[serde(default)]
    mode: Option<Mode>,
    #[serde(default)]
    goal: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadBody {
    data_dir: Option<PathBuf>,
    knowledge_file: Option<PathBuf>,
}

fn error(status: StatusCode, name: &str, message: impl ToString) -> Response {
    (status, Json(json!({ "error": name, "message": message.to_string() }))).into_response()
}

fn session_error(e: SessionError) -> Response {
    let status = match e {
        SessionError::UnknownProvenance(_) => StatusCode::NOT_FOUND,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    error(status, e.name(), &e)
}

#[allow(clippy::result_large_err)]
fn parse_body<T: DeserializeOwned + Default>(body: &Bytes, allow_empty: bool) -> Result<T, Response> {
    if allow_empty && body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, "MalformedBody", e))
}

async fn query(State(session): State<SharedSession>, body: Bytes) -> Response {
    let body: QueryBody = match parse_body(&body, false) {
        Ok(b) => b,
        Err(r) => return r,
    };
    let outcome = {
        let s = session.read();
        let mode = body.mode.unwrap_or(s.default_mode());
        if body.goal {
            s.goal(&body.text, None, mode)
        } else {
            s.answer(&body.text, mode).map(|a| a.table)
        }
    };
    match outcome {
        Ok(table) => Json(session.write().record(&body.text, &table)).into_response(),
        Err(e) => session_error(e),
    }
}

async fn explain(State(session): State<SharedSession>, Path(id): Path<String>) -> Response {
    match session.read().explain(&id) {
        Ok(x) => Json(x).into_response(),
        Err(e) => session_error(e),
    }
}

async fn schema(State(session): State<SharedSession>) -> Response {
    match session.read().schema() {
        Ok(x) => Json(x).into_response(),
        Err(e) => session_error(e),
    }
}

async fn history(State(session): State<SharedSession>) -> Response {
    Json(session.read().history().to_vec()).into_response()
}

async fn load(State(session): State<SharedSession>, body: Bytes) -> Response {
    let body: LoadBody = match parse_body(&body, true) {
        Ok(b) => b,
        Err(r) => return r,
    };
    let mut s = session.write();
    let loaded = match (&body.data_dir, &body.knowledge_file) {
        (Some(d), Some(k)) => s.load(d, k).map(|_| ()),
        (None, None) => s.reload().map(|_| ()),
        _ => {
            return error(
                StatusCode::BAD_REQUEST,
                "MalformedBody",
                "data_dir and knowledge_file go together",
            )
        }
    };
    match loaded.and_then(|_| s.schema()) {
        Ok(x) => Json(json!({ "loaded": true, "facts": x.facts, "warnings": x.warnings })).into_response(),
        Err(e) => session_error(e),
    }
}

pub fn router(session: SharedSession) -> Router {
    Router::new()
        .route("/query", post(query))
        .route("/explain/{id}", get(explain))
        .route("/schema", get(schema))
        .route("/history", get(history))
        .route("/load", post(load))
        .with_state(session)
}

pub async fn serve(session: SharedSession, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(session))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
