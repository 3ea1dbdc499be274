//! HTTP front end for a running mission.
//!
//! The mission runs on its own thread in real time. Handlers never touch it
//! directly: requests go in through a queue and come back through a oneshot,
//! and new log records are fanned out to `/stream` subscribers.
//!
//! | route | method | body / query |
//! |---|---|---|
//! | `/config` | GET | |
//! | `/twins` | GET | |
//! | `/twins/{id}/behavior` | POST | `{"behavior_id": 2}` |
//! | `/twins/{id}/event` | POST | `{"event": "Hypoxia"}` |
//! | `/broadcast` | POST | `{"event": "Hypoxia"}` |
//! | `/o2` | GET | `?platform=MANSIO&from=0&to=3600` |
//! | `/trace` | GET | |
//! | `/log` | GET | `?since=0&limit=100` |
//! | `/stream` | GET | `?since=0`, server-sent events |
//!
//! `{id}` is a platform name or numeric id. Every reply is an
//! [`ApiResponse`] as JSON; errors map to 400, 404 and 409.

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::mpsc;
use std::thread::JoinHandle;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use tokio::sync::{broadcast, oneshot};

use seatwin::basestation::{ApiErrorKind, ApiRequest, ApiResponse, LogRecord};
use seatwin::harness::{ApiCall, Mission, MissionConfig, MissionError};
use seatwin::time::SimTime;
use seatwin::twin::Platform;

/// Records buffered per slow `/stream` client before it starts lagging.
const STREAM_BUFFER: usize = 4096;

/// Handle to a mission running on its own thread.
#[derive(Clone)]
pub struct MissionService {
    calls: mpsc::Sender<ApiCall>,
    records: broadcast::Sender<LogRecord>,
}

impl MissionService {
    /// Starts `config` in real time. The thread stops at `stop_at` if given,
    /// otherwise once every handle is dropped and the mission has run out.
    pub fn spawn(config: MissionConfig, stop_at: Option<SimTime>) -> Result<(Self, JoinHandle<Mission>), MissionError> {
        let mut mission = Mission::new(config)?;
        let log_rx = mission.basestation_mut().subscribe();
        let (records, _) = broadcast::channel(STREAM_BUFFER);
        let fanout = records.clone();
        std::thread::spawn(move || {
            for r in log_rx {
                // no subscribers is fine
                let _ = fanout.send(r);
            }
        });
        let (calls, inbox) = mpsc::channel();
        let worker = std::thread::spawn(move || {
            mission.run_realtime(inbox, stop_at);
            mission
        });
        Ok((MissionService { calls, records }, worker))
    }

    /// Sends one request to the mission and waits for its answer. `None`
    /// once the mission thread has stopped.
    pub async fn call(&self, request: ApiRequest) -> Option<ApiResponse> {
        let (tx, rx) = oneshot::channel();
        let reply = Box::new(move |r: ApiResponse| {
            let _ = tx.send(r);
        });
        self.calls.send(ApiCall { request, reply }).ok()?;
        rx.await.ok()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<LogRecord> {
        self.records.subscribe()
    }
}

/// Routes for `service`. With `console`, files under that directory are
/// served for every other path.
pub fn router(service: MissionService, console: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/config", get(config))
        .route("/twins", get(twins))
        .route("/twins/{id}/behavior", post(set_behavior))
        .route("/twins/{id}/event", post(inject_event))
        .route("/broadcast", post(broadcast_event))
        .route("/o2", get(o2))
        .route("/trace", get(trace))
        .route("/log", get(log_records))
        .route("/stream", get(stream))
        .with_state(service);
    match console {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

fn status_of(response: &ApiResponse) -> StatusCode {
    match response {
        ApiResponse::Error(e) => match e.kind {
            ApiErrorKind::BadRequest => StatusCode::BAD_REQUEST,
            ApiErrorKind::NotFound => StatusCode::NOT_FOUND,
            ApiErrorKind::Rejected => StatusCode::CONFLICT,
        },
        _ => StatusCode::OK,
    }
}

async fn forward(service: &MissionService, request: ApiRequest) -> Response {
    match service.call(request).await {
        Some(r) => (status_of(&r), Json(r)).into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, "mission stopped").into_response(),
    }
}

fn platform(id: &str) -> Result<Platform, Box<Response>> {
    id.parse().map_err(|e: String| Box::new((StatusCode::NOT_FOUND, e).into_response()))
}

async fn config(State(s): State<MissionService>) -> Response {
    forward(&s, ApiRequest::Config).await
}

async fn twins(State(s): State<MissionService>) -> Response {
    forward(&s, ApiRequest::ListTwins).await
}

#[derive(Deserialize)]
struct BehaviorBody {
    behavior_id: u8,
}

async fn set_behavior(State(s): State<MissionService>, Path(id): Path<String>, Json(b): Json<BehaviorBody>) -> Response {
    match platform(&id) {
        Ok(platform) => forward(&s, ApiRequest::SetBehavior { platform, behavior_id: b.behavior_id }).await,
        Err(r) => *r,
    }
}

#[derive(Deserialize)]
struct EventBody {
    event: String,
}

async fn inject_event(State(s): State<MissionService>, Path(id): Path<String>, Json(b): Json<EventBody>) -> Response {
    match platform(&id) {
        Ok(platform) => forward(&s, ApiRequest::InjectEvent { platform, event: b.event }).await,
        Err(r) => *r,
    }
}

async fn broadcast_event(State(s): State<MissionService>, Json(b): Json<EventBody>) -> Response {
    forward(&s, ApiRequest::Broadcast { event: b.event }).await
}

#[derive(Deserialize)]
struct O2Query {
    platform: String,
    from: Option<f64>,
    to: Option<f64>,
}

async fn o2(State(s): State<MissionService>, Query(q): Query<O2Query>) -> Response {
    match platform(&q.platform) {
        Ok(platform) => forward(&s, ApiRequest::O2Series { platform, from: q.from, to: q.to }).await,
        Err(r) => *r,
    }
}

async fn trace(State(s): State<MissionService>) -> Response {
    forward(&s, ApiRequest::Trace).await
}

#[derive(Deserialize)]
struct LogQuery {
    #[serde(default)]
    since: u64,
    limit: Option<usize>,
}

async fn log_records(State(s): State<MissionService>, Query(q): Query<LogQuery>) -> Response {
    forward(&s, ApiRequest::Log { since: q.since, limit: q.limit }).await
}

#[derive(Deserialize)]
struct StreamQuery {
    #[serde(default)]
    since: u64,
}

fn to_event(r: &LogRecord) -> Event {
    Event::default().event("record").id(r.seq.to_string()).json_data(r).expect("record serializes")
}

/// Backlog from `since`, then live records, in sequence order without
/// duplicates.
async fn stream(State(s): State<MissionService>, Query(q): Query<StreamQuery>) -> Response {
    let live = s.subscribe();
    let backlog = match s.call(ApiRequest::Log { since: q.since, limit: None }).await {
        Some(ApiResponse::Log(records)) => records,
        _ => return (StatusCode::SERVICE_UNAVAILABLE, "mission stopped").into_response(),
    };
    let next = backlog.last().map_or(q.since, |r| r.seq + 1);
    let head = stream::iter(backlog.iter().map(to_event).collect::<Vec<_>>());
    let tail = stream::unfold((live, next), |(mut rx, next)| async move {
        loop {
            match rx.recv().await {
                Ok(r) if r.seq < next => continue,
                Ok(r) => return Some((to_event(&r), (rx, r.seq + 1))),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("stream client lagged by {n} records");
                    continue;
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    let events: std::pin::Pin<Box<dyn Stream<Item = Result<Event, Infallible>> + Send>> =
        Box::pin(head.chain(tail).map(Ok));
    Sse::new(events).keep_alive(KeepAlive::default()).into_response()
}
