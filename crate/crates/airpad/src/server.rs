//! HTTP and WebSocket front end for live sessions.
//!
//! - `GET /api/health`
//! - `GET /api/model/info`: JSON header of the loaded model
//! - `POST /api/classify`: 784 raw bytes, or `{"image": "<base64>"}` as JSON
//! - `GET /ws/session`: one [`Session`] per connection, JSON text messages

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use airpad_core::gesture::SegmenterConfig;
use airpad_core::nn::ModelBundle;
use airpad_core::sensing::SensorConfig;
use airpad_core::session::{classify_image, ErrorCode, OutboundQueue, Session, SessionError, StreamMessage};
use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::Notify;
use tower_http::services::ServeDir;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(300);
pub const DEFAULT_QUEUE_CAPACITY: usize = 512;

#[derive(Clone)]
pub struct ServerConfig {
    pub model: Option<Arc<ModelBundle>>,
    pub static_dir: Option<PathBuf>,
    pub idle_timeout: Duration,
    pub sensor: SensorConfig,
    pub queue_capacity: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            model: None,
            static_dir: None,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            sensor: SensorConfig::default(),
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

struct AppState {
    cfg: ServerConfig,
    sessions: AtomicUsize,
    next_id: AtomicU64,
}

type Shared = Arc<AppState>;

pub fn router(cfg: ServerConfig) -> Router {
    let static_dir = cfg.static_dir.clone();
    let state = Arc::new(AppState { cfg, sessions: AtomicUsize::new(0), next_id: AtomicU64::new(1) });
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/model/info", get(model_info))
        .route("/api/classify", post(classify))
        .route("/ws/session", get(ws_upgrade))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(listener: TcpListener, cfg: ServerConfig) -> std::io::Result<()> {
    axum::serve(listener, router(cfg)).await
}

async fn health(State(st): State<Shared>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "model_loaded": st.cfg.model.is_some(),
        "sessions": st.sessions.load(Ordering::SeqCst),
    }))
}

fn error_response(status: StatusCode, code: ErrorCode, msg: impl Into<String>) -> Response {
    (status, Json(StreamMessage::error(code, msg))).into_response()
}

async fn model_info(State(st): State<Shared>) -> Response {
    match &st.cfg.model {
        Some(m) => Json(m.header()).into_response(),
        None => error_response(StatusCode::NOT_FOUND, ErrorCode::NoModelLoaded, "no model loaded"),
    }
}

#[derive(Deserialize)]
struct ClassifyJson {
    image: String,
}

async fn classify(State(st): State<Shared>, headers: HeaderMap, body: Bytes) -> Response {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let bytes = if is_json {
        let parsed: Result<ClassifyJson, _> = serde_json::from_slice(&body);
        match parsed.map_err(|e| e.to_string()).and_then(|j| BASE64.decode(j.image).map_err(|e| e.to_string())) {
            Ok(b) => b,
            Err(e) => return error_response(StatusCode::BAD_REQUEST, ErrorCode::MalformedMessage, e),
        }
    } else {
        body.to_vec()
    };
    match classify_image(st.cfg.model.as_deref(), &bytes) {
        Ok(r) => Json(r).into_response(),
        Err(e) => {
            let status = match e {
                SessionError::NoModelLoaded => StatusCode::SERVICE_UNAVAILABLE,
                SessionError::PayloadSizeMismatch { .. } => StatusCode::BAD_REQUEST,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            };
            error_response(status, e.code(), e.to_string())
        }
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(st): State<Shared>) -> Response {
    ws.on_upgrade(move |socket| run_session(socket, st))
}

/// Sessions-gauge guard so every exit path decrements the count.
struct Live(Shared);

impl Drop for Live {
    fn drop(&mut self) {
        self.0.sessions.fetch_sub(1, Ordering::SeqCst);
    }
}

async fn run_session(socket: WebSocket, st: Shared) {
    let id = st.next_id.fetch_add(1, Ordering::SeqCst);
    let (mut sink, mut stream) = socket.split();
    let mut session = match Session::new(id, st.cfg.sensor.clone(), SegmenterConfig::default(), st.cfg.model.clone()) {
        Ok(s) => s,
        Err(e) => {
            let msg = StreamMessage::error(ErrorCode::Internal, e.to_string()).to_json();
            let _ = sink.send(Message::Text(msg.into())).await;
            return;
        }
    };
    st.sessions.fetch_add(1, Ordering::SeqCst);
    let _live = Live(st.clone());
    tracing::info!(session = id, "session opened");

    let queue = Arc::new(Mutex::new(OutboundQueue::new(st.cfg.queue_capacity)));
    let wake = Arc::new(Notify::new());
    let done = Arc::new(std::sync::atomic::AtomicBool::new(false));
    let writer = {
        let (queue, wake, done) = (queue.clone(), wake.clone(), done.clone());
        tokio::spawn(async move {
            loop {
                wake.notified().await;
                loop {
                    let next = queue.lock().unwrap().pop();
                    let Some(msg) = next else { break };
                    if sink.send(Message::Text(msg.to_json().into())).await.is_err() {
                        return;
                    }
                }
                if done.load(Ordering::SeqCst) {
                    let _ = sink.send(Message::Close(None)).await;
                    return;
                }
            }
        })
    };

    loop {
        let incoming = match tokio::time::timeout(st.cfg.idle_timeout, stream.next()).await {
            Err(_) => {
                tracing::info!(session = id, "session idle, closing");
                break;
            }
            Ok(None) | Ok(Some(Err(_))) => break,
            Ok(Some(Ok(m))) => m,
        };
        let out = match incoming {
            Message::Text(text) => session.handle_text(text.as_str()),
            Message::Binary(_) => vec![StreamMessage::error(ErrorCode::MalformedMessage, "expected JSON text messages")],
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        if !out.is_empty() {
            let mut q = queue.lock().unwrap();
            for m in out {
                q.push(m);
            }
            drop(q);
            wake.notify_one();
        }
    }
    done.store(true, Ordering::SeqCst);
    wake.notify_one();
    let abort = writer.abort_handle();
    if tokio::time::timeout(Duration::from_secs(1), writer).await.is_err() {
        abort.abort();
        tracing::warn!(session = id, "writer did not finish, dropping connection");
    }
    tracing::info!(session = id, "session closed");
}
