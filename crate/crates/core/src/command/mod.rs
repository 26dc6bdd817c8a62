//! Speech command pipeline: utterance to intent or spoken answer.
//!
//! The rule grammar runs first and needs no network. Utterances it does not
//! cover go to an optional model client together with a prompt built from
//! the robot's latest snapshot. Status questions are always answered locally
//! from the snapshot so the spoken numbers match the telemetry.

pub mod client;
pub mod grammar;
pub mod prompt;
pub mod reply;
pub mod speech;

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Duration;

use tokio::time::{timeout_at, Instant};

pub use client::{
    ClientError, ClientSettings, HttpModelClient, ModelClient, DEFAULT_MODEL_TIMEOUT,
};
pub use grammar::{parse_intent_grammar, tokenize, NoMatch};
pub use prompt::{build_prompt, retrieve_state, PromptBundle, Role, Turn};
pub use reply::{parse_model_reply, ModelReply, ReplyError, ReplyKind};

use crate::intent::{Intent, StatusTopic};
use crate::status::RobotStatus;

/// One callable command as shown to users and to the model.
#[derive(Debug, Clone, Copy)]
pub struct Capability {
    pub action: &'static str,
    pub params: &'static str,
    pub description: &'static str,
    pub example: &'static str,
}

/// One entry per intent constructor, in action order.
pub const CAPABILITIES: &[Capability] = &[
    Capability {
        action: "sit",
        params: "",
        description: "sit down",
        example: "sit down",
    },
    Capability {
        action: "stand",
        params: "",
        description: "stand up",
        example: "stand up",
    },
    Capability {
        action: "move",
        params: "distance_m: number in (0, 100], direction: forward|backward|left|right",
        description: "move a distance in meters in a direction relative to the current heading",
        example: "move forward 2 meters",
    },
    Capability {
        action: "return_to",
        params: "label: string",
        description: "walk back to a previously recorded location",
        example: "go back to the charging dock",
    },
    Capability {
        action: "record_location",
        params: "label: string",
        description: "remember the current position under a name",
        example: "remember this location as charging dock",
    },
    Capability {
        action: "schedule",
        params: "delay_s: whole seconds > 0, command: {action, params} (not schedule or a query)",
        description: "run another command after a duration",
        example: "turn on the lights in 30 seconds",
    },
    Capability {
        action: "lights",
        params: "on: boolean",
        description: "switch the onboard lights on or off",
        example: "turn the lights on",
    },
    Capability {
        action: "query_status",
        params: "topic: battery|sensors|tasks|errors|all",
        description: "report part of the robot's state",
        example: "how is the battery",
    },
    Capability {
        action: "query_capabilities",
        params: "",
        description: "list what the speech interface can do",
        example: "what can you do",
    },
];

/// Every command with an example utterance, in stable order.
pub fn describe_capabilities() -> String {
    let mut out = String::from("I can do the following:\n");
    for cap in CAPABILITIES {
        let _ = writeln!(
            out,
            "- {}: {} (say \"{}\")",
            cap.action, cap.description, cap.example
        );
    }
    out
}

/// Up to `n` capabilities sharing the most words with the utterance; ties
/// keep table order.
pub fn nearest_capabilities(utterance: &str, n: usize) -> Vec<&'static Capability> {
    let tokens = tokenize(utterance);
    let mut scored: Vec<(usize, usize)> = CAPABILITIES
        .iter()
        .enumerate()
        .map(|(i, cap)| {
            let words = tokenize(&format!(
                "{} {} {}",
                cap.action.replace('_', " "),
                cap.description,
                cap.example
            ));
            let score = tokens.iter().filter(|t| words.contains(t)).count();
            (i, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
        .into_iter()
        .take(n)
        .map(|(i, _)| &CAPABILITIES[i])
        .collect()
}

fn excerpt(text: &str) -> String {
    const MAX_CHARS: usize = 60;
    let trimmed = text.trim();
    match trimmed.char_indices().nth(MAX_CHARS) {
        Some((cut, _)) => format!("{}...", &trimmed[..cut]),
        None => trimmed.to_string(),
    }
}

fn suggestion_list(utterance: &str) -> String {
    nearest_capabilities(utterance, 3)
        .iter()
        .map(|c| format!("\"{}\"", c.example))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn not_understood(utterance: &str) -> ModelReply {
    ModelReply::answer(format!(
        "I did not understand \"{}\". You can say things like {}, or ask what I can do.",
        excerpt(utterance),
        suggestion_list(utterance)
    ))
}

pub fn model_unavailable(utterance: &str) -> ModelReply {
    ModelReply::answer(format!(
        "Sorry, I could not get an answer in time. You can say things like {}.",
        suggestion_list(utterance)
    ))
}

/// Spoken answer to a status or capability query, built from the snapshot.
pub fn answer_query(intent: &Intent, snapshot: &RobotStatus) -> Option<String> {
    let topic = match intent {
        Intent::QueryCapabilities => return Some(describe_capabilities()),
        Intent::QueryStatus { topic } => *topic,
        _ => return None,
    };
    let battery = format!("Battery is at {:.0}%.", snapshot.battery_pct);
    let sensors = if snapshot.sensors.is_empty() {
        "No sensor readings are available.".to_string()
    } else {
        let parts: Vec<String> = snapshot
            .sensors
            .iter()
            .map(|(name, r)| format!("{} {} {}", name.replace('_', " "), r.value, r.unit))
            .collect();
        format!("Sensors: {}.", parts.join(", "))
    };
    let tasks = match &snapshot.current_task {
        Some(task) => format!("Current task: {task}."),
        None if snapshot.idle => "No current task; I am idle.".to_string(),
        None => "No current task.".to_string(),
    };
    let errors = match (snapshot.errors.is_empty(), snapshot.estop_enabled) {
        (true, false) => "No errors.".to_string(),
        (true, true) => "No errors, but the emergency stop is enabled.".to_string(),
        (false, estop) => format!(
            "Errors: {}.{}",
            snapshot.errors.join(", "),
            if estop {
                " The emergency stop is enabled."
            } else {
                ""
            }
        ),
    };
    Some(match topic {
        StatusTopic::Battery => battery,
        StatusTopic::Sensors => sensors,
        StatusTopic::Tasks => tasks,
        StatusTopic::Errors => errors,
        StatusTopic::All => format!("{battery} {tasks} {errors} {sensors}"),
    })
}

/// Short confirmation spoken before a command runs.
pub fn confirmation(intent: &Intent) -> String {
    match intent {
        Intent::Sit => "Sitting down.".into(),
        Intent::Stand => "Standing up.".into(),
        Intent::Move {
            distance_m,
            direction,
        } => format!("Moving {distance_m} meters {}.", direction.as_str()),
        Intent::ReturnTo { label } => format!("Returning to {label}."),
        Intent::RecordLocation { label } => format!("Recording this location as {label}."),
        Intent::Schedule { inner, delay_s } => {
            format!("In {delay_s} seconds: {}", confirmation(inner))
        }
        Intent::Lights { on } => format!("Turning the lights {}.", if *on { "on" } else { "off" }),
        Intent::QueryStatus { .. } | Intent::QueryCapabilities => "Checking.".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Grammar,
    Model,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub reply: ModelReply,
    pub source: Source,
}

/// Queries are answered from the snapshot; a command with blank speech gets
/// the local confirmation.
fn localize(reply: ModelReply, snapshot: &RobotStatus) -> ModelReply {
    match reply.intent() {
        Some(i) => match answer_query(i, snapshot) {
            Some(answer) => ModelReply::answer(answer),
            None if reply.speech.trim().is_empty() => {
                let speech = confirmation(i);
                ModelReply { speech, ..reply }
            }
            None => reply,
        },
        None => reply,
    }
}

/// Grammar-only interpretation; deterministic and offline.
pub fn interpret_offline(utterance: &str, snapshot: &RobotStatus) -> ModelReply {
    match parse_intent_grammar(utterance) {
        Ok(intent) => {
            let speech = confirmation(&intent);
            localize(ModelReply::command(intent, speech), snapshot)
        }
        Err(NoMatch) => not_understood(utterance),
    }
}

/// Interpreter with an optional model client. Reentrant: calls share no
/// mutable state.
#[derive(Clone)]
pub struct Interpreter {
    client: Option<Arc<dyn ModelClient>>,
    timeout: Duration,
}

impl Default for Interpreter {
    fn default() -> Self {
        Interpreter::offline()
    }
}

impl Interpreter {
    pub fn offline() -> Self {
        Interpreter {
            client: None,
            timeout: DEFAULT_MODEL_TIMEOUT,
        }
    }

    /// `timeout` bounds the whole model exchange, retry included.
    pub fn with_client(client: Arc<dyn ModelClient>, timeout: Duration) -> Self {
        Interpreter {
            client: Some(client),
            timeout,
        }
    }

    /// Uses [`HttpModelClient`] when `MODEL_ENDPOINT` is set.
    pub fn from_env() -> Result<Self, ClientError> {
        match ClientSettings::from_env()? {
            None => Ok(Interpreter::offline()),
            Some(settings) => {
                let timeout = settings.timeout;
                Ok(Interpreter::with_client(
                    Arc::new(HttpModelClient::new(settings)?),
                    timeout,
                ))
            }
        }
    }

    pub fn has_client(&self) -> bool {
        self.client.is_some()
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub async fn interpret(
        &self,
        utterance: &str,
        snapshot: &RobotStatus,
        history: &[Turn],
    ) -> Interpretation {
        if parse_intent_grammar(utterance).is_ok() {
            return Interpretation {
                reply: interpret_offline(utterance, snapshot),
                source: Source::Grammar,
            };
        }
        let Some(client) = &self.client else {
            return Interpretation {
                reply: not_understood(utterance),
                source: Source::Fallback,
            };
        };
        let prompt = build_prompt(snapshot, utterance, history);
        let deadline = Instant::now() + self.timeout;
        for attempt in 1..=2 {
            match timeout_at(deadline, client.complete(&prompt)).await {
                Err(_) => {
                    tracing::warn!(attempt, "model request timed out");
                    break;
                }
                Ok(Err(e)) => tracing::warn!(attempt, "model request failed: {e}"),
                Ok(Ok(text)) => match parse_model_reply(&text) {
                    Ok(reply) if reply.intent().is_none() && reply.speech.trim().is_empty() => {
                        tracing::warn!(attempt, "model answered with no speech");
                    }
                    Ok(reply) => {
                        return Interpretation {
                            reply: localize(reply, snapshot),
                            source: Source::Model,
                        }
                    }
                    Err(e) => tracing::warn!(attempt, "unusable model reply: {e}"),
                },
            }
        }
        Interpretation {
            reply: model_unavailable(utterance),
            source: Source::Fallback,
        }
    }
}
