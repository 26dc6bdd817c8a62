//! Robot telemetry snapshot.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub value: f64,
    pub unit: String,
}

/// One robot's full telemetry at a point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotStatus {
    pub robot_id: String,
    pub timestamp_ms: u64,
    pub battery_pct: f64,
    pub estop_enabled: bool,
    pub errors: Vec<String>,
    pub current_task: Option<String>,
    pub idle: bool,
    pub sensors: BTreeMap<String, SensorReading>,
    pub position: Position,
    pub heading_deg: f64,
    pub lights_on: bool,
    #[serde(default)]
    pub sitting: bool,
}

impl RobotStatus {
    /// A freshly booted robot at the origin: standing, full battery, no task.
    pub fn new(robot_id: impl Into<String>) -> Self {
        RobotStatus {
            robot_id: robot_id.into(),
            timestamp_ms: 0,
            battery_pct: 100.0,
            estop_enabled: false,
            errors: Vec::new(),
            current_task: None,
            idle: false,
            sensors: BTreeMap::new(),
            position: Position::default(),
            heading_deg: 0.0,
            lights_on: false,
            sitting: false,
        }
    }

    /// Checks the value-level invariants a snapshot must satisfy on the wire.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.robot_id.is_empty() {
            return Err("robot_id is empty".into());
        }
        if !self.battery_pct.is_finite() || !(0.0..=100.0).contains(&self.battery_pct) {
            return Err(format!("battery_pct {} outside [0,100]", self.battery_pct));
        }
        if !self.heading_deg.is_finite() || !(0.0..360.0).contains(&self.heading_deg) {
            return Err(format!("heading_deg {} outside [0,360)", self.heading_deg));
        }
        if !self.position.x.is_finite() || !self.position.y.is_finite() {
            return Err("position is not finite".into());
        }
        if let Some((name, _)) = self.sensors.iter().find(|(_, r)| !r.value.is_finite()) {
            return Err(format!("sensor {name} is not finite"));
        }
        if self.idle && self.current_task.is_some() {
            return Err("idle robot reports a current task".into());
        }
        Ok(())
    }
}
