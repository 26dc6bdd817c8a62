//! Retrieval-augmented prompt assembly.
//!
//! The prompt combines a fixed assistant framing, the parts of the robot's
//! latest snapshot that are relevant to the utterance, the command API the
//! model may call, the conversation so far and the new utterance.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::grammar::{tokenize, BATTERY_WORDS, ERROR_WORDS, SENSOR_WORDS, TASK_WORDS};
use super::CAPABILITIES;
use crate::status::RobotStatus;

pub const SYSTEM_CONTEXT: &str = "\
You are a robot assistant attached to a legged inspection robot. You help a \
human supervisor by answering questions about the robot's internal state and \
by turning their requests into commands from the command API below. Your \
answers must be helpful and accurate: use only the robot state provided, and \
say so when the information is not available. Keep spoken replies short.";

const REPLY_FORMAT: &str = "\
Reply with exactly one JSON object and nothing else.
To run a command: {\"kind\":\"command\",\"action\":\"<name>\",\"params\":{...},\"speech\":\"<short confirmation>\"}
To answer a question: {\"kind\":\"answer\",\"speech\":\"<answer>\"}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Section {
    Battery,
    Sensors,
    Tasks,
    Errors,
}

impl Section {
    const ALL: [Section; 4] = [
        Section::Battery,
        Section::Sensors,
        Section::Tasks,
        Section::Errors,
    ];

    fn keywords(self) -> &'static [&'static str] {
        match self {
            Section::Battery => BATTERY_WORDS,
            Section::Sensors => SENSOR_WORDS,
            Section::Tasks => TASK_WORDS,
            Section::Errors => ERROR_WORDS,
        }
    }
}

/// Keyword score of each section for an utterance. Sensor names present in
/// the snapshot count as sensor keywords.
pub fn score_sections(snapshot: &RobotStatus, utterance: &str) -> Vec<(Section, usize)> {
    let tokens = tokenize(utterance);
    Section::ALL
        .into_iter()
        .map(|section| {
            let score = tokens
                .iter()
                .filter(|t| {
                    section.keywords().contains(&t.as_str())
                        || (section == Section::Sensors
                            && snapshot
                                .sensors
                                .keys()
                                .any(|name| name.split('_').any(|part| part == t.as_str())))
                })
                .count();
            (section, score)
        })
        .collect()
}

fn render_section(out: &mut String, snapshot: &RobotStatus, section: Section) {
    match section {
        Section::Battery => {
            let _ = writeln!(out, "battery_pct: {:.2}", snapshot.battery_pct);
        }
        Section::Sensors => {
            if snapshot.sensors.is_empty() {
                let _ = writeln!(out, "sensors: none");
            }
            for (name, reading) in &snapshot.sensors {
                let _ = writeln!(out, "sensor {name}: {} {}", reading.value, reading.unit);
            }
        }
        Section::Tasks => {
            let task = snapshot.current_task.as_deref().unwrap_or("none");
            let _ = writeln!(out, "current_task: {task}");
            let _ = writeln!(out, "idle: {}", snapshot.idle);
        }
        Section::Errors => {
            let errors = if snapshot.errors.is_empty() {
                "none".to_string()
            } else {
                snapshot.errors.join(", ")
            };
            let _ = writeln!(out, "errors: {errors}");
            let _ = writeln!(out, "estop_enabled: {}", snapshot.estop_enabled);
        }
    }
}

/// Renders the snapshot sections relevant to the utterance. When no section
/// keyword matches, the whole snapshot is rendered.
pub fn retrieve_state(snapshot: &RobotStatus, utterance: &str) -> String {
    let scores = score_sections(snapshot, utterance);
    let selected: Vec<Section> = scores
        .iter()
        .filter(|(_, score)| *score > 0)
        .map(|(s, _)| *s)
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "robot: {} (t={} ms)",
        snapshot.robot_id, snapshot.timestamp_ms
    );
    if selected.is_empty() {
        for section in Section::ALL {
            render_section(&mut out, snapshot, section);
        }
        let p = snapshot.position;
        let _ = writeln!(out, "position_m: ({:.2}, {:.2})", p.x, p.y);
        let _ = writeln!(out, "heading_deg: {:.1}", snapshot.heading_deg);
        let _ = writeln!(
            out,
            "posture: {}",
            if snapshot.sitting {
                "sitting"
            } else {
                "standing"
            }
        );
        let _ = writeln!(out, "lights_on: {}", snapshot.lights_on);
    } else {
        for section in selected {
            render_section(&mut out, snapshot, section);
        }
    }
    out
}

/// Text listing every callable command with its parameters.
pub fn command_api_doc() -> String {
    let mut out = String::from("Available functions:\n");
    for cap in CAPABILITIES {
        let _ = writeln!(out, "- {}({}): {}", cap.action, cap.params, cap.description);
    }
    out.push('\n');
    out.push_str(REPLY_FORMAT);
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system_context: String,
    pub state_snippet: String,
    pub command_api_doc: String,
    pub history: Vec<Turn>,
    pub utterance: String,
}

impl PromptBundle {
    /// Single-text form with labeled sections in fixed order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "### SYSTEM\n{}\n\n", self.system_context);
        let _ = write!(out, "### ROBOT STATE\n{}\n", self.state_snippet);
        let _ = write!(out, "### COMMAND API\n{}\n", self.command_api_doc);
        out.push_str("### HISTORY\n");
        for turn in &self.history {
            let role = match turn.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            let _ = writeln!(out, "{role}: {}", turn.text);
        }
        let _ = write!(out, "\n### USER\n{}\n", self.utterance);
        out
    }
}

pub fn build_prompt(snapshot: &RobotStatus, utterance: &str, history: &[Turn]) -> PromptBundle {
    PromptBundle {
        system_context: SYSTEM_CONTEXT.to_string(),
        state_snippet: retrieve_state(snapshot, utterance),
        command_api_doc: command_api_doc(),
        history: history.to_vec(),
        utterance: utterance.to_string(),
    }
}
