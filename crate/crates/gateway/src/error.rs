use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use supervisor_core::pattern::PatternError;
use supervisor_core::ConfigError;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn busy(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, "Busy", message)
    }

    pub fn unknown_robot(id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "UnknownRobot",
            format!("no robot named {id:?}"),
        )
        .with_detail(json!({ "robot_id": id }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    /// Generic body for a status produced outside the handlers.
    pub fn from_status(status: StatusCode) -> Self {
        let reason = status.canonical_reason().unwrap_or("Error");
        ApiError::new(status, &reason.replace(' ', ""), reason)
    }
}

impl From<ConfigError> for ApiError {
    fn from(e: ConfigError) -> Self {
        let detail = match &e {
            ConfigError::NoEvents | ConfigError::SlotsNotContiguous => json!({}),
            ConfigError::TooManySlots(n) => json!({ "count": n }),
            ConfigError::SlotOutOfRange(s)
            | ConfigError::DuplicateSlot(s)
            | ConfigError::NoRobots(s)
            | ConfigError::TooManyRobots(s) => json!({ "slot": s }),
            ConfigError::DuplicateEventMapping { event_type, robot } => {
                json!({ "event_type": event_type, "robot": robot })
            }
            ConfigError::Pattern { slot, source } => {
                json!({ "slot": slot, "pattern_error": source.code() })
            }
            ConfigError::BadTick(t) => json!({ "tick_ms": t }),
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()).with_detail(detail)
    }
}

impl From<PatternError> for ApiError {
    fn from(e: PatternError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = serde_json::to_string(&self).expect("error serializes");
        (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}
