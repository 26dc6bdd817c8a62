//! Edge-triggered event detection over per-robot status streams.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::status::RobotStatus;

pub const DEFAULT_BATTERY_LOW_PCT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Error,
    EstopEnabled,
    Idle,
    BatteryLow,
}

impl EventType {
    pub const ALL: [EventType; 4] = [
        EventType::Error,
        EventType::EstopEnabled,
        EventType::Idle,
        EventType::BatteryLow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Error => "error",
            EventType::EstopEnabled => "estop_enabled",
            EventType::Idle => "idle",
            EventType::BatteryLow => "battery_low",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn holds(self, status: &RobotStatus, battery_low_pct: f64) -> bool {
        match self {
            EventType::Error => !status.errors.is_empty(),
            EventType::EstopEnabled => status.estop_enabled,
            EventType::Idle => status.idle,
            EventType::BatteryLow => status.battery_pct < battery_low_pct,
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of an alert: the same event type on two robots gives two keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventKey {
    pub event_type: EventType,
    pub robot_id: String,
}

impl fmt::Display for EventKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.event_type, self.robot_id)
    }
}

pub fn make_key(event_type: EventType, robot_id: impl Into<String>) -> EventKey {
    EventKey {
        event_type,
        robot_id: robot_id.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Raised,
    Cleared,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTransition {
    pub key: EventKey,
    pub edge: Edge,
    pub at_ms: u64,
}

impl EventTransition {
    pub fn raised(key: EventKey, at_ms: u64) -> Self {
        EventTransition {
            key,
            edge: Edge::Raised,
            at_ms,
        }
    }

    pub fn cleared(key: EventKey, at_ms: u64) -> Self {
        EventTransition {
            key,
            edge: Edge::Cleared,
            at_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub battery_low_pct: f64,
    /// Extra consecutive snapshots a changed predicate must hold before the
    /// edge is reported. 0 reports on the first differing snapshot.
    pub debounce: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            battery_low_pct: DEFAULT_BATTERY_LOW_PCT,
            debounce: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(
    "status for {robot_id} at {at_ms} ms is older than the last one seen ({last_ms} ms); dropped"
)]
pub struct StaleStatus {
    pub robot_id: String,
    pub at_ms: u64,
    pub last_ms: u64,
}

#[derive(Debug, Clone, Default)]
struct RobotState {
    last_ms: u64,
    reported: [bool; 4],
    /// Consecutive snapshots disagreeing with `reported`, per event type.
    pending: [u32; 4],
}

/// Predicate tracker for every robot seen so far.
#[derive(Debug, Clone, Default)]
pub struct Detector {
    config: DetectorConfig,
    robots: BTreeMap<String, RobotState>,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Self {
        Detector {
            config,
            robots: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Whether the event is currently reported as active.
    pub fn is_active(&self, key: &EventKey) -> bool {
        self.robots
            .get(&key.robot_id)
            .is_some_and(|r| r.reported[key.event_type.index()])
    }

    /// Feeds one snapshot. Every predicate starts out false, so a robot's
    /// first snapshot raises whatever already holds.
    pub fn update(&mut self, status: &RobotStatus) -> Result<Vec<EventTransition>, StaleStatus> {
        let state = self.robots.entry(status.robot_id.clone()).or_default();
        if status.timestamp_ms < state.last_ms {
            let err = StaleStatus {
                robot_id: status.robot_id.clone(),
                at_ms: status.timestamp_ms,
                last_ms: state.last_ms,
            };
            tracing::warn!("{err}");
            return Err(err);
        }
        state.last_ms = status.timestamp_ms;

        let mut transitions = Vec::new();
        for event_type in EventType::ALL {
            let i = event_type.index();
            let now = event_type.holds(status, self.config.battery_low_pct);
            if now == state.reported[i] {
                state.pending[i] = 0;
                continue;
            }
            state.pending[i] += 1;
            if state.pending[i] > self.config.debounce {
                state.reported[i] = now;
                state.pending[i] = 0;
                let key = make_key(event_type, status.robot_id.clone());
                transitions.push(if now {
                    EventTransition::raised(key, status.timestamp_ms)
                } else {
                    EventTransition::cleared(key, status.timestamp_ms)
                });
            }
        }
        Ok(transitions)
    }
}
