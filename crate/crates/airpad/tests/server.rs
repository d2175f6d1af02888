use std::sync::Arc;
use std::time::Duration;

use airpad::server::{router, serve, ServerConfig};
use airpad_core::nn::{ModelBundle, Recipe};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use futures::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

fn with_model() -> ServerConfig {
    ServerConfig { model: Some(Arc::new(ModelBundle::untrained(Recipe::Mlp, 0).unwrap())), ..Default::default() }
}

async fn call(cfg: ServerConfig, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router(cfg).oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post_raw(bytes: Vec<u8>) -> Request<Body> {
    Request::post("/api/classify").header("content-type", "application/octet-stream").body(Body::from(bytes)).unwrap()
}

#[tokio::test]
async fn health_reports_model_and_sessions() {
    let (status, body) = call(ServerConfig::default(), get("/api/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok", "model_loaded": false, "sessions": 0}));
    let (_, body) = call(with_model(), get("/api/health")).await;
    assert_eq!(body["model_loaded"], true);
}

#[tokio::test]
async fn model_info() {
    let (status, body) = call(ServerConfig::default(), get("/api/model/info")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "no_model_loaded");
    let (status, body) = call(with_model(), get("/api/model/info")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["model"]["id"], "mlp");
    assert!(body["tensors"].as_array().unwrap().len() >= 4);
}

#[tokio::test]
async fn classify_raw_and_base64_agree() {
    let img: Vec<u8> = (0..784).map(|i| ((i * 7) % 256) as u8).collect();
    let (status, raw) = call(with_model(), post_raw(img.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let probs: Vec<f64> = raw["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect();
    assert_eq!(probs.len(), 10);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    assert!(raw["digit"].as_u64().unwrap() < 10);

    let req = Request::post("/api/classify")
        .header("content-type", "application/json")
        .body(Body::from(json!({"image": BASE64.encode(&img)}).to_string()))
        .unwrap();
    let (status, b64) = call(with_model(), req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(raw, b64);
}

#[tokio::test]
async fn classify_rejects_wrong_size() {
    let (status, body) = call(with_model(), post_raw(vec![0; 783])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "payload_size_mismatch");
}

#[tokio::test]
async fn classify_without_model() {
    let (status, body) = call(ServerConfig::default(), post_raw(vec![0; 784])).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["code"], "no_model_loaded");
}

#[tokio::test]
async fn serves_static_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>pad</h1>").unwrap();
    let cfg = ServerConfig { static_dir: Some(dir.path().to_path_buf()), ..Default::default() };
    let resp = router(cfg).oneshot(get("/index.html")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(&resp.into_body().collect().await.unwrap().to_bytes()[..], b"<h1>pad</h1>");
}

async fn spawn(cfg: ServerConfig) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, cfg));
    format!("{addr}")
}

fn stroke() -> Vec<Value> {
    (0..=150)
        .map(|i| {
            let t = i as f64 / 50.0;
            let (y, z) = match t {
                t if t < 0.5 => (1.5, 8.0),
                t if t < 0.8 => (1.5, 8.0 - (t - 0.5) / 0.3 * 5.5),
                t if t < 1.8 => (1.5 - 3.0 * (t - 0.8), 2.5),
                t if t < 2.1 => (-1.5, 2.5 + (t - 1.8) / 0.3 * 6.0),
                _ => (-1.5, 8.5),
            };
            json!({"type": "hand_sample", "t": t, "x": 0.0, "y": y, "z": z})
        })
        .collect()
}

#[tokio::test]
async fn websocket_session_classifies_a_stroke() {
    let addr = spawn(with_model()).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws/session")).await.unwrap();
    for m in stroke() {
        ws.send(Message::Text(m.to_string().into())).await.unwrap();
    }
    let mut kinds = Vec::new();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    while !kinds.contains(&"classification".to_string()) {
        let msg = tokio::time::timeout_at(deadline, ws.next()).await.expect("no classification").unwrap().unwrap();
        if let Message::Text(t) = msg {
            let v: Value = serde_json::from_str(t.as_str()).unwrap();
            kinds.push(v["type"].as_str().unwrap().to_string());
        }
    }
    assert!(kinds.contains(&"gesture_started".to_string()));
    assert!(kinds.contains(&"channels".to_string()));

    ws.send(Message::Text("not json".into())).await.unwrap();
    loop {
        let Message::Text(t) = ws.next().await.unwrap().unwrap() else { continue };
        let v: Value = serde_json::from_str(t.as_str()).unwrap();
        if v["type"] == "error" {
            assert_eq!(v["code"], "malformed_message");
            break;
        }
    }
}

#[tokio::test]
async fn idle_sessions_are_reaped_independently() {
    let cfg = ServerConfig { idle_timeout: Duration::from_millis(400), ..with_model() };
    let addr = spawn(cfg).await;
    let url = format!("ws://{addr}/ws/session");
    let (mut idle, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let (mut busy, _) = tokio_tungstenite::connect_async(&url).await.unwrap();

    let keepalive = tokio::spawn(async move {
        for i in 0..12 {
            let m = json!({"type": "hand_sample", "t": i as f64 * 0.1, "x": 0.0, "y": 0.0, "z": 8.0});
            busy.send(Message::Text(m.to_string().into())).await.unwrap();
            tokio::time::sleep(Duration::from_millis(100)).await;
        }
        busy
    });

    // the idle connection must be closed by the server
    let closed = tokio::time::timeout(Duration::from_secs(3), async {
        loop {
            match idle.next().await {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                _ => {}
            }
        }
    })
    .await;
    assert!(closed.is_ok(), "idle session not reaped");

    let mut busy = keepalive.await.unwrap();
    busy.send(Message::Text(json!({"type": "reset"}).to_string().into())).await.unwrap();
    let m = json!({"type": "hand_sample", "t": 1.3, "x": 0.0, "y": 0.0, "z": 8.0});
    busy.send(Message::Text(m.to_string().into())).await.unwrap();
    let reply = tokio::time::timeout(Duration::from_secs(2), busy.next()).await.unwrap().unwrap().unwrap();
    assert!(matches!(reply, Message::Text(_)));

    assert_eq!(health_over_tcp(&addr).await["sessions"], 1);
}

async fn health_over_tcp(addr: &str) -> Value {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
    s.write_all(format!("GET /api/health HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").as_bytes()).await.unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).await.unwrap();
    let body = buf.split("\r\n\r\n").nth(1).unwrap();
    serde_json::from_str(body.trim()).unwrap()
}
