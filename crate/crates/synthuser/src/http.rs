//! HTTP front of the demo target and the tracker.
//!
//! | method | path | body / query | answer |
//! |---|---|---|---|
//! | `POST` | `/api/{request}` | request parameters as a JSON object | reply JSON, or `{code, message}` with that HTTP status |
//! | `POST` | `/track/report-action` | `{session, state_before, action, state_after}` | the stored event, with `seq` and `ts_ms` assigned |
//! | `GET`  | `/track/active-ids?session=ID` | | `{session, ids}` for a server-side UI session |
//! | `POST` | `/ui/sessions` | | new server-side UI session snapshot (201) |
//! | `GET`  | `/ui/sessions/{id}` | | session snapshot |
//! | `POST` | `/ui/sessions/{id}/actions` | `{component, kind, payload?}` | snapshot after the tracked action |
//! | `POST` | `/ui/sessions/{id}/poll` | | `{delivered, snapshot}` |
//!
//! Everything else falls through to static files when a directory is given.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use synthuser_core::client::{ActionTemplate, ClientError};
use synthuser_core::rng::{seeded, server_seed};
use synthuser_core::server::Backend;
use synthuser_core::tracker::TrackError;
use synthuser_core::{
    ActionEvent, ApiError, ClientSession, FaultConfig, LocalServer, NavFault, Request, Tracker, UiAction, View,
    ViewState,
};
use tower_http::services::ServeDir;

use crate::engine::SharedBackend;
use crate::trace_io::SharedTraceLog;

/// Unix time in milliseconds.
pub fn wall_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

type UiSession = Tracker<SharedTraceLog, fn() -> i64>;

#[derive(Clone)]
pub struct AppState {
    backend: SharedBackend,
    log: SharedTraceLog,
    nav_fault: NavFault,
    sessions: Arc<Mutex<HashMap<String, UiSession>>>,
    counter: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(backend: SharedBackend, log: SharedTraceLog, nav_fault: NavFault) -> Self {
        Self {
            backend,
            log,
            nav_fault,
            sessions: Arc::default(),
            counter: Arc::default(),
        }
    }

    /// A wall-clock demo target with the given faults.
    pub fn with_local_target(faults: FaultConfig, seed: u64, log: SharedTraceLog) -> Self {
        let clock: fn() -> i64 = wall_ms;
        let server = LocalServer::new(seeded(server_seed(seed)), clock, faults);
        Self::new(SharedBackend::new(server), log, NavFault::from(&faults))
    }
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let app = Router::new()
        .route("/api/{request}", post(api))
        .route("/track/report-action", post(report_action))
        .route("/track/active-ids", get(active_ids))
        .route("/ui/sessions", post(create_session))
        .route("/ui/sessions/{id}", get(get_session))
        .route("/ui/sessions/{id}/actions", post(session_action))
        .route("/ui/sessions/{id}/poll", post(session_poll))
        .with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}

fn error(code: u16, message: impl Into<String>) -> Response {
    let status = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (
        status,
        Json(ApiError {
            code,
            message: message.into(),
        }),
    )
        .into_response()
}

fn api_error(e: &ApiError) -> Response {
    error(e.code, e.message.clone())
}

async fn api(State(state): State<AppState>, Path(name): Path<String>, body: Option<Json<Value>>) -> Response {
    if !Request::NAMES.contains(&name.as_str()) {
        return error(404, format!("unknown request `{name}`"));
    }
    let mut params = match body {
        Some(Json(Value::Object(map))) => map,
        Some(Json(Value::Null)) | None => serde_json::Map::new(),
        Some(_) => return error(400, "request body must be a JSON object"),
    };
    params.insert("request".into(), Value::String(name));
    let request: Request = match serde_json::from_value(Value::Object(params)) {
        Ok(r) => r,
        Err(e) => return error(400, e.to_string()),
    };
    let mut backend = state.backend.clone();
    match backend.call(request) {
        Ok(reply) => Json(reply).into_response(),
        Err(e) => api_error(&e),
    }
}

/// An action completed in an external client; the tracker assigns seq and ts.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportedAction {
    pub session: String,
    pub state_before: View,
    pub action: UiAction,
    pub state_after: View,
}

async fn report_action(
    State(state): State<AppState>,
    body: Result<Json<ReportedAction>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Json(r) = match body {
        Ok(b) => b,
        Err(e) => return error(400, e.body_text()),
    };
    if r.session.is_empty() {
        return error(400, "session must not be empty");
    }
    let event = ActionEvent {
        session: r.session,
        seq: 0,
        ts_ms: wall_ms(),
        state_before: r.state_before,
        action: r.action,
        state_after: r.state_after,
    };
    match state.log.append_next(event) {
        Ok(stored) => Json(stored).into_response(),
        Err(e) => error(500, e.to_string()),
    }
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    session: String,
}

async fn active_ids(State(state): State<AppState>, Query(q): Query<SessionQuery>) -> Response {
    let sessions = state.sessions.lock().unwrap_or_else(|p| p.into_inner());
    match sessions.get(&q.session) {
        Some(t) => {
            let ids: Vec<String> = t.active_ids().iter().map(|i| i.encode()).collect();
            Json(json!({ "session": q.session, "ids": ids })).into_response()
        }
        None => error(404, format!("unknown session `{}`", q.session)),
    }
}

#[derive(Debug, Serialize)]
struct Snapshot<'a> {
    session: &'a str,
    view: View,
    next_seq: u64,
    available: Vec<ActionTemplate>,
    state: &'a ViewState,
}

fn snapshot(id: &str, t: &UiSession) -> Value {
    serde_json::to_value(Snapshot {
        session: id,
        view: t.observe_state(),
        next_seq: t.next_seq(),
        available: t.available_actions(),
        state: t.state(),
    })
    .unwrap_or(Value::Null)
}

async fn create_session(State(state): State<AppState>) -> Response {
    let id = format!("ui-{}", state.counter.fetch_add(1, Ordering::SeqCst) + 1);
    let clock: fn() -> i64 = wall_ms;
    let start = state.log.next_seq(&id);
    let tracker = Tracker::wrap(
        ClientSession::new(state.nav_fault),
        state.log.clone(),
        clock,
        id.clone(),
        start,
    );
    let body = snapshot(&id, &tracker);
    state
        .sessions
        .lock()
        .unwrap_or_else(|p| p.into_inner())
        .insert(id, tracker);
    (StatusCode::CREATED, Json(body)).into_response()
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let sessions = state.sessions.lock().unwrap_or_else(|p| p.into_inner());
    match sessions.get(&id) {
        Some(t) => Json(snapshot(&id, t)).into_response(),
        None => error(404, format!("unknown session `{id}`")),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionBody {
    component: String,
    kind: String,
    #[serde(default)]
    payload: Option<String>,
}

async fn session_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ActionBody>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(e) => return error(400, e.body_text()),
    };
    let component = match body.component.parse() {
        Ok(c) => c,
        Err(e) => return error(400, format!("{e}")),
    };
    let kind = match body.kind.as_str() {
        "click" => synthuser_core::trace::KindTag::Click,
        "text-input" => synthuser_core::trace::KindTag::TextInput,
        other => return error(400, format!("unknown action kind `{other}`")),
    };
    let mut sessions = state.sessions.lock().unwrap_or_else(|p| p.into_inner());
    let Some(tracker) = sessions.get_mut(&id) else {
        return error(404, format!("unknown session `{id}`"));
    };
    let mut backend = state.backend.clone();
    let outcome = tracker.trigger(&component, kind, body.payload.as_deref(), &mut backend);
    let mut snap = snapshot(&id, tracker);
    match outcome {
        Ok(completion) => {
            snap["error"] = serde_json::to_value(completion.error()).unwrap_or(Value::Null);
            Json(snap).into_response()
        }
        Err(TrackError::Log { message, completion }) => {
            snap["error"] = serde_json::to_value(completion.error()).unwrap_or(Value::Null);
            snap["tracking_error"] = Value::String(message);
            Json(snap).into_response()
        }
        Err(TrackError::Action(e @ ClientError::Unavailable { .. })) => error(409, e.to_string()),
        Err(TrackError::Action(e)) => error(400, e.to_string()),
    }
}

async fn session_poll(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let mut sessions = state.sessions.lock().unwrap_or_else(|p| p.into_inner());
    let Some(tracker) = sessions.get_mut(&id) else {
        return error(404, format!("unknown session `{id}`"));
    };
    let mut backend = state.backend.clone();
    match tracker.poll_alerts(&mut backend) {
        Ok(delivered) => Json(json!({ "delivered": delivered, "snapshot": snapshot(&id, tracker) })).into_response(),
        Err(e) => api_error(&e),
    }
}
