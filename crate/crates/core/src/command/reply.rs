//! Model reply schema.
//!
//! A reply is one JSON object:
//!
//! ```json
//! {"kind":"command","action":"move","params":{"distance_m":2,"direction":"forward"},"speech":"Moving."}
//! {"kind":"answer","speech":"Battery is at 80%."}
//! ```
//!
//! `action` and `params` follow the intent JSON form. `speech` is required.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::intent::{Intent, IntentError};

#[derive(Debug, Clone, PartialEq)]
pub enum ReplyKind {
    Command(Intent),
    Answer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReply {
    pub kind: ReplyKind,
    pub speech: String,
}

impl ModelReply {
    pub fn answer(speech: impl Into<String>) -> Self {
        ModelReply {
            kind: ReplyKind::Answer,
            speech: speech.into(),
        }
    }

    pub fn command(intent: Intent, speech: impl Into<String>) -> Self {
        ModelReply {
            kind: ReplyKind::Command(intent),
            speech: speech.into(),
        }
    }

    pub fn intent(&self) -> Option<&Intent> {
        match &self.kind {
            ReplyKind::Command(intent) => Some(intent),
            ReplyKind::Answer => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match &self.kind {
            ReplyKind::Command(intent) => json!({
                "kind": "command",
                "action": intent.action(),
                "params": intent.params_json(),
                "speech": self.speech,
            }),
            ReplyKind::Answer => json!({"kind": "answer", "speech": self.speech}),
        }
    }

    /// Canonical text form accepted by [`parse_model_reply`].
    pub fn render(&self) -> String {
        self.to_json().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplyError {
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
}

impl From<IntentError> for ReplyError {
    fn from(err: IntentError) -> Self {
        match err {
            IntentError::UnknownAction(a) => ReplyError::UnknownAction(a),
            IntentError::BadParams(d) => ReplyError::BadParams(d),
        }
    }
}

fn from_object(obj: &Map<String, Value>) -> Result<ModelReply, ReplyError> {
    let speech = match obj.get("speech") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(ReplyError::Malformed("speech must be a string".into())),
    };
    match obj.get("kind").and_then(Value::as_str) {
        Some("answer") => Ok(ModelReply::answer(speech)),
        Some("command") => {
            let action = obj
                .get("action")
                .and_then(Value::as_str)
                .ok_or_else(|| ReplyError::Malformed("command reply without action".into()))?;
            let intent = Intent::from_action(action, obj.get("params"))?;
            Ok(ModelReply::command(intent, speech))
        }
        Some(other) => Err(ReplyError::Malformed(format!("unknown kind {other:?}"))),
        None => Err(ReplyError::Malformed("kind must be a string".into())),
    }
}

fn parse_strict(text: &str) -> Result<ModelReply, ReplyError> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(obj)) => from_object(&obj),
        Ok(_) => Err(ReplyError::Malformed("reply is not a JSON object".into())),
        Err(e) => Err(ReplyError::Malformed(e.to_string())),
    }
}

/// Drops code fences and any prose around the outermost braces.
fn repair(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (start < end).then(|| &text[start..=end])
}

/// Parses a model reply, retrying once on the repaired text when the strict
/// parse fails for syntax reasons.
pub fn parse_model_reply(text: &str) -> Result<ModelReply, ReplyError> {
    match parse_strict(text) {
        Err(ReplyError::Malformed(first)) => match repair(text) {
            Some(inner) if inner != text => parse_strict(inner),
            _ => Err(ReplyError::Malformed(first)),
        },
        other => other,
    }
}
