//! Typed robot commands and queries.
//!
//! The JSON form is shared by scenario scripts, the utterance corpus and model
//! replies: `{"action":"move","params":{"distance_m":2.0,"direction":"forward"}}`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Upper bound on a single move, in metres.
pub const MAX_MOVE_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Forward,
        Direction::Backward,
        Direction::Left,
        Direction::Right,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.as_str() == s)
    }

    /// Angle relative to the robot's heading, counter-clockwise degrees.
    pub fn relative_angle_deg(self) -> f64 {
        match self {
            Direction::Forward => 0.0,
            Direction::Left => 90.0,
            Direction::Backward => 180.0,
            Direction::Right => 270.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatusTopic {
    Battery,
    Sensors,
    Tasks,
    Errors,
    All,
}

impl StatusTopic {
    pub const ALL: [StatusTopic; 5] = [
        StatusTopic::Battery,
        StatusTopic::Sensors,
        StatusTopic::Tasks,
        StatusTopic::Errors,
        StatusTopic::All,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatusTopic::Battery => "battery",
            StatusTopic::Sensors => "sensors",
            StatusTopic::Tasks => "tasks",
            StatusTopic::Errors => "errors",
            StatusTopic::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Intent {
    Sit,
    Stand,
    Move {
        distance_m: f64,
        direction: Direction,
    },
    ReturnTo {
        label: String,
    },
    RecordLocation {
        label: String,
    },
    Schedule {
        inner: Box<Intent>,
        delay_s: u32,
    },
    Lights {
        on: bool,
    },
    QueryStatus {
        topic: StatusTopic,
    },
    QueryCapabilities,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntentError {
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
}

/// Action names, one per [`Intent`] constructor, in a stable order.
pub const ACTIONS: [&str; 9] = [
    "sit",
    "stand",
    "move",
    "return_to",
    "record_location",
    "schedule",
    "lights",
    "query_status",
    "query_capabilities",
];

impl Intent {
    pub fn action(&self) -> &'static str {
        match self {
            Intent::Sit => "sit",
            Intent::Stand => "stand",
            Intent::Move { .. } => "move",
            Intent::ReturnTo { .. } => "return_to",
            Intent::RecordLocation { .. } => "record_location",
            Intent::Schedule { .. } => "schedule",
            Intent::Lights { .. } => "lights",
            Intent::QueryStatus { .. } => "query_status",
            Intent::QueryCapabilities => "query_capabilities",
        }
    }

    pub fn is_query(&self) -> bool {
        matches!(self, Intent::QueryStatus { .. } | Intent::QueryCapabilities)
    }

    /// Checks parameter ranges and nesting rules.
    pub fn validate(&self) -> Result<(), IntentError> {
        match self {
            Intent::Move { distance_m, .. } => {
                if !distance_m.is_finite() || *distance_m <= 0.0 || *distance_m > MAX_MOVE_M {
                    return Err(IntentError::BadParams(format!(
                        "distance_m must be in (0, {MAX_MOVE_M}], got {distance_m}"
                    )));
                }
            }
            Intent::ReturnTo { label } | Intent::RecordLocation { label } => {
                if label.trim().is_empty() {
                    return Err(IntentError::BadParams("label is empty".into()));
                }
            }
            Intent::Schedule { inner, delay_s } => {
                if *delay_s == 0 {
                    return Err(IntentError::BadParams("delay_s must be positive".into()));
                }
                if matches!(**inner, Intent::Schedule { .. }) {
                    return Err(IntentError::BadParams(
                        "schedule cannot nest schedule".into(),
                    ));
                }
                if inner.is_query() {
                    return Err(IntentError::BadParams(
                        "only commands can be scheduled".into(),
                    ));
                }
                inner.validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn params_json(&self) -> Value {
        match self {
            Intent::Sit | Intent::Stand | Intent::QueryCapabilities => json!({}),
            Intent::Move {
                distance_m,
                direction,
            } => json!({"distance_m": distance_m, "direction": direction.as_str()}),
            Intent::ReturnTo { label } | Intent::RecordLocation { label } => {
                json!({ "label": label })
            }
            Intent::Schedule { inner, delay_s } => {
                json!({"delay_s": delay_s, "command": inner.to_json()})
            }
            Intent::Lights { on } => json!({ "on": on }),
            Intent::QueryStatus { topic } => json!({"topic": topic.as_str()}),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"action": self.action(), "params": self.params_json()})
    }

    /// Builds and validates an intent from an action name and its params.
    /// A missing `params` value is treated as `{}`.
    pub fn from_action(action: &str, params: Option<&Value>) -> Result<Intent, IntentError> {
        let empty = Map::new();
        let params = match params {
            None | Some(Value::Null) => &empty,
            Some(Value::Object(map)) => map,
            Some(other) => {
                return Err(IntentError::BadParams(format!(
                    "params must be an object, got {other}"
                )))
            }
        };
        let intent = match action {
            "sit" => Intent::Sit,
            "stand" => Intent::Stand,
            "move" => Intent::Move {
                distance_m: number(params, "distance_m")?,
                direction: {
                    let d = string(params, "direction")?;
                    Direction::parse(&d.to_ascii_lowercase())
                        .ok_or_else(|| IntentError::BadParams(format!("unknown direction {d:?}")))?
                },
            },
            "return_to" => Intent::ReturnTo {
                label: string(params, "label")?,
            },
            "record_location" => Intent::RecordLocation {
                label: string(params, "label")?,
            },
            "schedule" => {
                let delay = number(params, "delay_s")?;
                if delay.fract() != 0.0 || delay < 0.0 || delay > f64::from(u32::MAX) {
                    return Err(IntentError::BadParams(format!(
                        "delay_s must be a whole number of seconds, got {delay}"
                    )));
                }
                let inner = params
                    .get("command")
                    .ok_or_else(|| IntentError::BadParams("missing command".into()))?;
                Intent::Schedule {
                    inner: Box::new(Intent::from_json(inner)?),
                    delay_s: delay as u32,
                }
            }
            "lights" => Intent::Lights {
                on: match params.get("on") {
                    Some(Value::Bool(b)) => *b,
                    _ => return Err(IntentError::BadParams("on must be a boolean".into())),
                },
            },
            "query_status" => {
                let topic = match params.get("topic") {
                    None | Some(Value::Null) => StatusTopic::All,
                    Some(Value::String(t)) => StatusTopic::parse(t)
                        .ok_or_else(|| IntentError::BadParams(format!("unknown topic {t:?}")))?,
                    Some(other) => {
                        return Err(IntentError::BadParams(format!("bad topic {other}")))
                    }
                };
                Intent::QueryStatus { topic }
            }
            "query_capabilities" => Intent::QueryCapabilities,
            other => return Err(IntentError::UnknownAction(other.to_string())),
        };
        intent.validate()?;
        Ok(intent)
    }

    pub fn from_json(value: &Value) -> Result<Intent, IntentError> {
        let action = value
            .get("action")
            .and_then(Value::as_str)
            .ok_or_else(|| IntentError::BadParams("missing action".into()))?;
        Intent::from_action(action, value.get("params"))
    }
}

fn number(params: &Map<String, Value>, key: &str) -> Result<f64, IntentError> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| IntentError::BadParams(format!("{key} must be a number")))
}

fn string(params: &Map<String, Value>, key: &str) -> Result<String, IntentError> {
    params
        .get(key)
        .and_then(Value::as_str)
        .map(|s| s.trim().to_string())
        .ok_or_else(|| IntentError::BadParams(format!("{key} must be a string")))
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intent::Sit => write!(f, "sit"),
            Intent::Stand => write!(f, "stand"),
            Intent::Move {
                distance_m,
                direction,
            } => write!(f, "move {distance_m} m {}", direction.as_str()),
            Intent::ReturnTo { label } => write!(f, "return to {label}"),
            Intent::RecordLocation { label } => write!(f, "record location {label}"),
            Intent::Schedule { inner, delay_s } => write!(f, "{inner} in {delay_s} s"),
            Intent::Lights { on } => write!(f, "lights {}", if *on { "on" } else { "off" }),
            Intent::QueryStatus { topic } => write!(f, "query {} status", topic.as_str()),
            Intent::QueryCapabilities => write!(f, "query capabilities"),
        }
    }
}

impl Serialize for Intent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Intent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Intent::from_json(&value).map_err(serde::de::Error::custom)
    }
}
