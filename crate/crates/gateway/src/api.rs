use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{middleware, Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use supervisor_core::command::{Role, Source, Turn};
use supervisor_core::config::{canonical_json, save_config};
use supervisor_core::motor::{test_motors_sequence, MotorError};
use supervisor_core::scheduler::TICK_MS;
use supervisor_core::{
    expand, validate_config, CommandResult, FrameLog, PatternRef, PlaybackParams, RobotStatus,
    SchedulerConfig,
};

use crate::error::ApiError;
use crate::runtime::{Shared, HISTORY_TURNS};
use crate::stream;

type AppState = State<Arc<Shared>>;

pub(crate) fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/api/config", get(get_config).put(put_config))
        .route("/api/robots", get(list_robots))
        .route("/api/robots/{id}", get(get_robot))
        .route("/api/test-motors", post(test_motors))
        .route("/api/test-pattern", post(test_pattern))
        .route("/api/command", post(command))
        .route("/api/stream/events", get(stream::events))
        .route("/api/stream/frames", get(stream::frames))
        .route("/api/stream/robots", get(stream::robots))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route") })
        .layer(middleware::map_response(ensure_error_body))
        .with_state(shared)
}

/// Gives responses produced by the framework (405, 413, ...) an
/// [`ApiError`] body.
async fn ensure_error_body(response: Response) -> Response {
    let status = response.status();
    let is_json = response
        .headers()
        .get(header::CONTENT_TYPE)
        .is_some_and(|v| v.as_bytes().starts_with(b"application/json"));
    if status.is_success() || is_json {
        response
    } else {
        ApiError::from_status(status).into_response()
    }
}

fn json_text(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

async fn get_config(State(shared): AppState) -> Response {
    let config = shared
        .core()
        .supervisor
        .scheduler()
        .config()
        .config()
        .clone();
    json_text(canonical_json(&config))
}

/// Validates, persists, then waits for the scheduler to install the config at
/// the end of the current playback. Puts are serialized; one arriving while
/// another is in flight gets 409.
async fn put_config(State(shared): AppState, body: Bytes) -> Result<Response, ApiError> {
    let Ok(_guard) = Arc::clone(&shared.put_lock).try_lock_owned() else {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "PutInFlight",
            "another configuration update is in progress",
        ));
    };
    let config: SchedulerConfig = parse_body(&body)?;
    let valid = validate_config(&config)?;
    save_config(&shared.config_path, &config).map_err(|e| ApiError::internal(e.to_string()))?;
    shared.core().supervisor.replace_config(valid);
    while shared.core().supervisor.scheduler().has_pending_config() {
        tokio::time::sleep(Duration::from_millis(TICK_MS)).await;
    }
    tracing::info!("configuration updated");
    Ok(json_text(canonical_json(&config)))
}

async fn list_robots(State(shared): AppState) -> Json<Vec<RobotStatus>> {
    Json(shared.core().fleet.snapshots())
}

async fn get_robot(
    State(shared): AppState,
    Path(id): Path<String>,
) -> Result<Json<RobotStatus>, ApiError> {
    shared
        .core()
        .fleet
        .snapshot(&id)
        .map(Json)
        .map_err(|_| ApiError::unknown_robot(&id))
}

#[derive(Debug, Serialize)]
struct TestStarted {
    started_at_ms: u64,
    duration_ms: u64,
    frames: FrameLog,
}

fn start_test(shared: &Shared, frames: FrameLog) -> Result<Json<TestStarted>, ApiError> {
    let mut core = shared.core();
    let now = core.now_ms;
    let duration_ms = frames.frames.last().map_or(0, |f| f.at_ms);
    match core.supervisor.start_test(frames.clone(), now) {
        Ok(()) => Ok(Json(TestStarted {
            started_at_ms: now,
            duration_ms,
            frames,
        })),
        Err(MotorError::Busy) => Err(if core.supervisor.alert_playing() {
            ApiError::busy("an alert is playing")
        } else {
            ApiError::busy("a test is already playing")
        }),
        Err(e) => Err(ApiError::internal(e.to_string())),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestMotorsRequest {
    intensity_pct: Option<u8>,
}

async fn test_motors(State(shared): AppState, body: Bytes) -> Result<Json<TestStarted>, ApiError> {
    let req: TestMotorsRequest = if body.is_empty() {
        TestMotorsRequest {
            intensity_pct: None,
        }
    } else {
        parse_body(&body)?
    };
    let intensity = req.intensity_pct.unwrap_or(100);
    if intensity > 100 {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "BadParams",
            "intensity_pct must be at most 100",
        ));
    }
    start_test(&shared, test_motors_sequence(intensity))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestPatternRequest {
    pattern: PatternRef,
    reps: Option<u32>,
    step_ms: Option<u64>,
    intensity_pct: Option<u8>,
}

async fn test_pattern(State(shared): AppState, body: Bytes) -> Result<Json<TestStarted>, ApiError> {
    let req: TestPatternRequest = parse_body(&body)?;
    let defaults = PlaybackParams::default();
    let params = PlaybackParams {
        reps: req.reps.unwrap_or(1),
        step_ms: req.step_ms.unwrap_or(defaults.step_ms),
        intensity_pct: req.intensity_pct.unwrap_or(defaults.intensity_pct),
        realert: false,
        ..defaults
    };
    let spec = req.pattern.resolve()?;
    let schedule = expand(&spec, &params)?;
    start_test(&shared, FrameLog::from(&schedule))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommandRequest {
    robot_id: String,
    utterance: String,
}

#[derive(Debug, Serialize)]
struct CommandResponse {
    robot_id: String,
    reply: Value,
    source: Source,
    /// Absent for answers.
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<CommandResult>,
}

async fn command(State(shared): AppState, body: Bytes) -> Result<Json<CommandResponse>, ApiError> {
    let req: CommandRequest = parse_body(&body)?;
    let snapshot = shared
        .core()
        .fleet
        .snapshot(&req.robot_id)
        .map_err(|_| ApiError::unknown_robot(&req.robot_id))?;
    let history = shared
        .history
        .lock()
        .expect("history poisoned")
        .get(&req.robot_id)
        .cloned()
        .unwrap_or_default();
    let out = shared
        .interpreter
        .interpret(&req.utterance, &snapshot, &history)
        .await;
    let result = match out.reply.intent() {
        Some(intent) if !intent.is_query() => {
            let mut core = shared.core();
            let now = core.now_ms;
            Some(
                core.fleet
                    .apply_command(&req.robot_id, intent, now)
                    .map_err(|e| ApiError::internal(e.to_string()))?,
            )
        }
        _ => None,
    };
    let mut speech = out.reply.speech.clone();
    if let Some(r) = result.as_ref().filter(|r| !r.accepted) {
        speech = format!("{speech} Rejected: {}", r.message);
    }
    {
        let mut all = shared.history.lock().expect("history poisoned");
        let turns = all.entry(req.robot_id.clone()).or_default();
        turns.push(Turn {
            role: Role::User,
            text: req.utterance.clone(),
        });
        turns.push(Turn {
            role: Role::Assistant,
            text: speech,
        });
        let excess = turns.len().saturating_sub(HISTORY_TURNS);
        turns.drain(..excess);
    }
    Ok(Json(CommandResponse {
        robot_id: req.robot_id,
        reply: out.reply.to_json(),
        source: out.source,
        result,
    }))
}
