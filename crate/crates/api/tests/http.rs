use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use seatwin::harness::MissionConfig;
use seatwin_api::{router, MissionService};

fn app(guard: bool) -> Router {
    let mut config = MissionConfig::default_mission();
    config.guard = guard;
    let (service, _) = MissionService::spawn(config, None).unwrap();
    router(service, None)
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn config_and_twins() {
    let app = app(false);
    let (status, body) = send(&app, "GET", "/config", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["kind"], "config");
    assert_eq!(body["body"]["platforms"].as_array().unwrap().len(), 5);
    assert_eq!(body["body"]["chart_window_s"], 3600.0);
    assert_eq!(body["body"]["events"], json!(["Oxia", "Hypoxia"]));

    let (status, body) = send(&app, "GET", "/twins", None).await;
    assert_eq!(status, StatusCode::OK);
    let twins = body["body"].as_array().unwrap();
    assert_eq!(twins.len(), 5);
    assert!(twins.iter().all(|t| t["behavior_id"] == 1));
}

#[tokio::test]
async fn commands_and_errors() {
    let app = app(false);
    let (status, body) = send(&app, "POST", "/twins/MANSIO/behavior", Some(json!({"behavior_id": 2}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["kind"], "command");
    assert_eq!(body["body"]["synchronized"], true);

    let (status, _) = send(&app, "POST", "/twins/4/event", Some(json!({"event": "Hypoxia"}))).await;
    assert_eq!(status, StatusCode::OK);

    let (status, _) = send(&app, "POST", "/twins/NAUTILUS/behavior", Some(json!({"behavior_id": 2}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = send(&app, "POST", "/broadcast", Some(json!({"event": "Tsunami"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["body"]["kind"], "bad_request");

    let (status, body) = send(&app, "POST", "/broadcast", Some(json!({"event": "Hypoxia"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["body"]["fates"].as_object().unwrap().len(), 5);

    let (status, body) = send(&app, "GET", "/log?since=0", None).await;
    assert_eq!(status, StatusCode::OK);
    let kinds: Vec<&str> = body["body"].as_array().unwrap().iter().map(|r| r["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"downlink") && kinds.contains(&"broadcast"), "{kinds:?}");
}

#[tokio::test]
async fn guard_rejections_are_conflicts() {
    let app = app(true);
    let (status, body) = send(&app, "POST", "/twins/BIGO/behavior", Some(json!({"behavior_id": 77}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(body["body"]["kind"], "rejected");
}

#[tokio::test]
async fn samples_show_up_in_series_and_trace() {
    let app = app(false);
    // FLUX samples at t = 0; the frame lands about a second later
    tokio::time::sleep(Duration::from_millis(1800)).await;
    let (status, body) = send(&app, "GET", "/o2?platform=FLUX&from=0", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["kind"], "o2_series");
    assert!(!body["body"].as_array().unwrap().is_empty(), "{body}");

    let (_, body) = send(&app, "GET", "/trace", None).await;
    assert!(body["body"]["summary"]["delivered"].as_u64().unwrap() >= 1);
    // 60 s at 64 B/s plus one frame starting at the window edge
    assert_eq!(body["body"]["audit_60s"]["bound"], 3904.0);
    assert_eq!(body["body"]["audit_60s"]["window_s"], 60.0);
}

#[tokio::test]
async fn stream_replays_then_follows() {
    let app = app(false);
    send(&app, "POST", "/twins/VIATOR/behavior", Some(json!({"behavior_id": 5}))).await;
    let res = app.clone().oneshot(Request::get("/stream?since=0").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()["content-type"], "text/event-stream");
    let mut body = res.into_body();

    let mut text = String::new();
    let mut next_frame = async || {
        let frame = tokio::time::timeout(Duration::from_secs(5), body.frame()).await.unwrap().unwrap().unwrap();
        String::from_utf8(frame.into_data().unwrap().to_vec()).unwrap()
    };
    text.push_str(&next_frame().await);
    assert!(text.contains("event: record") && text.contains("\"downlink\""), "{text}");
    assert!(text.contains("id: 0"));

    send(&app, "POST", "/broadcast", Some(json!({"event": "Oxia"}))).await;
    while !text.contains("\"broadcast\"") {
        text.push_str(&next_frame().await);
    }
}

#[tokio::test]
async fn serves_console_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>console</h1>").unwrap();
    let (service, _) = MissionService::spawn(MissionConfig::default_mission(), None).unwrap();
    let app = router(service, Some(dir.path().to_path_buf()));
    let res = app.clone().oneshot(Request::get("/index.html").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let (status, _) = send(&app, "GET", "/twins", None).await;
    assert_eq!(status, StatusCode::OK);
}
