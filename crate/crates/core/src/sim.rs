//! Fixed-step simulator for a small fleet of legged robots.
//!
//! Each robot is a discrete-time state machine: straight-line motion at a
//! constant speed, linear battery drain, a queue of scheduled actions and a
//! table of recorded locations. The simulator is the execution target for
//! interpreted commands and the status source for the haptic pipeline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::Intent;
use crate::status::{Position, RobotStatus, SensorReading};

/// Most robots a fleet (and a config slot) can track.
pub const MAX_ROBOTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub speed_mps: f64,
    /// Battery drain in percentage points per second.
    pub drain_pct_per_s: f64,
    pub idle_threshold_ms: u64,
    pub dt_ms: u64,
    pub snapshot_every_ms: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            speed_mps: 1.0,
            drain_pct_per_s: 0.01,
            idle_threshold_ms: 5000,
            dt_ms: 100,
            snapshot_every_ms: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown robot {0:?}")]
    UnknownRobot(String),
    #[error("{0} is a query, not a command")]
    NotACommand(String),
    #[error("battery {0} outside [0,100]")]
    BadBattery(f64),
    #[error("time step must be positive")]
    ZeroStep,
    #[error("scenario script is not sorted by at_ms (entry {0})")]
    UnsortedScript(usize),
    #[error("invalid fleet: {0}")]
    BadFleet(String),
    #[error("invalid simulator config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledAction {
    pub action: Intent,
    pub fire_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationLabel {
    pub label: String,
    pub position: Position,
    pub recorded_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandResult {
    pub accepted: bool,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduled: Option<ScheduledAction>,
}

impl CommandResult {
    fn accepted(message: impl Into<String>) -> Self {
        CommandResult {
            accepted: true,
            message: message.into(),
            scheduled: None,
        }
    }

    fn rejected(message: impl Into<String>) -> Self {
        CommandResult {
            accepted: false,
            message: message.into(),
            scheduled: None,
        }
    }
}

/// Scripted disturbance applied to a robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    RaiseError(String),
    ClearErrors,
    SetEstop(bool),
    SetBattery(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioAction {
    Fault(Fault),
    Command(Intent),
}

/// One line of a scenario script: `{"at_ms":500,"robot":"rat","action":{"fault":{"raise_error":"E1"}}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub at_ms: u64,
    pub robot: String,
    pub action: ScenarioAction,
}

#[derive(Debug, Clone)]
struct Robot {
    status: RobotStatus,
    target: Option<Position>,
    scheduled: Vec<ScheduledAction>,
    locations: BTreeMap<String, LocationLabel>,
    stationary_since: Option<u64>,
}

fn default_sensors() -> BTreeMap<String, SensorReading> {
    [
        ("gas_ppm", 0.4, "ppm"),
        ("signal_strength", -52.0, "dBm"),
        ("temperature", 24.5, "degC"),
    ]
    .into_iter()
    .map(|(name, value, unit)| {
        (
            name.to_string(),
            SensorReading {
                value,
                unit: unit.to_string(),
            },
        )
    })
    .collect()
}

fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

impl Robot {
    fn new(id: &str) -> Self {
        let mut status = RobotStatus::new(id);
        status.sensors = default_sensors();
        Robot {
            status,
            target: None,
            scheduled: Vec::new(),
            locations: BTreeMap::new(),
            stationary_since: Some(0),
        }
    }

    fn stop_motion(&mut self) {
        self.target = None;
        self.status.current_task = None;
    }

    /// Recomputes the idle flag at the robot's current time.
    fn refresh(&mut self, cfg: &SimConfig) {
        let now = self.status.timestamp_ms;
        let still = self.target.is_none() && self.status.current_task.is_none();
        if !still {
            self.stationary_since = None;
        } else if self.stationary_since.is_none() {
            self.stationary_since = Some(now);
        }
        self.status.idle = self
            .stationary_since
            .is_some_and(|since| now.saturating_sub(since) >= cfg.idle_threshold_ms);
    }

    fn set_target(&mut self, target: Position, task: String) {
        self.target = Some(target);
        self.status.current_task = Some(task);
    }

    fn movement_block(&self) -> Option<&'static str> {
        if self.status.estop_enabled {
            Some("EStop enabled")
        } else if self.status.sitting {
            Some("robot is sitting")
        } else {
            None
        }
    }

    fn apply(&mut self, intent: &Intent, now_ms: u64) -> CommandResult {
        match intent {
            Intent::Sit => {
                let was_moving = self.target.is_some();
                self.stop_motion();
                self.status.sitting = true;
                CommandResult::accepted(if was_moving {
                    "Stopped and sitting down."
                } else {
                    "Sitting down."
                })
            }
            Intent::Stand => {
                if self.status.estop_enabled {
                    return CommandResult::rejected("EStop enabled");
                }
                self.status.sitting = false;
                CommandResult::accepted("Standing up.")
            }
            Intent::Move {
                distance_m,
                direction,
            } => {
                if let Some(reason) = self.movement_block() {
                    return CommandResult::rejected(reason);
                }
                let angle = (self.status.heading_deg + direction.relative_angle_deg()).to_radians();
                let p = self.status.position;
                let target = Position::new(
                    p.x + distance_m * angle.cos(),
                    p.y + distance_m * angle.sin(),
                );
                self.set_target(
                    target,
                    format!("move {distance_m} m {}", direction.as_str()),
                );
                CommandResult::accepted(format!("Moving {distance_m} m {}.", direction.as_str()))
            }
            Intent::ReturnTo { label } => {
                if let Some(reason) = self.movement_block() {
                    return CommandResult::rejected(reason);
                }
                let Some(loc) = self.locations.get(label) else {
                    return CommandResult::rejected(format!("unknown location {label:?}"));
                };
                let target = loc.position;
                let p = self.status.position;
                if p.distance(target) > 0.0 {
                    self.status.heading_deg =
                        normalize_heading((target.y - p.y).atan2(target.x - p.x).to_degrees());
                }
                self.set_target(target, format!("return to {label}"));
                CommandResult::accepted(format!("Returning to {label}."))
            }
            Intent::RecordLocation { label } => {
                self.locations.insert(
                    label.clone(),
                    LocationLabel {
                        label: label.clone(),
                        position: self.status.position,
                        recorded_at_ms: now_ms,
                    },
                );
                CommandResult::accepted(format!("Recorded this location as {label}."))
            }
            Intent::Schedule { inner, delay_s } => {
                let scheduled = ScheduledAction {
                    action: (**inner).clone(),
                    fire_at_ms: now_ms + u64::from(*delay_s) * 1000,
                };
                self.scheduled.push(scheduled.clone());
                CommandResult {
                    accepted: true,
                    message: format!("Will {inner} in {delay_s} seconds."),
                    scheduled: Some(scheduled),
                }
            }
            Intent::Lights { on } => {
                self.status.lights_on = *on;
                CommandResult::accepted(if *on { "Lights on." } else { "Lights off." })
            }
            Intent::QueryStatus { .. } | Intent::QueryCapabilities => {
                CommandResult::rejected("queries cannot be executed")
            }
        }
    }

    fn step(&mut self, dt_ms: u64, cfg: &SimConfig) {
        let now = self.status.timestamp_ms + dt_ms;
        self.status.timestamp_ms = now;

        if let Some(target) = self.target {
            let travel = cfg.speed_mps * dt_ms as f64 / 1000.0;
            let p = self.status.position;
            let remaining = p.distance(target);
            if travel >= remaining {
                self.status.position = target;
                self.stop_motion();
            } else {
                let f = travel / remaining;
                self.status.position =
                    Position::new(p.x + (target.x - p.x) * f, p.y + (target.y - p.y) * f);
            }
        }

        let drain = cfg.drain_pct_per_s * dt_ms as f64 / 1000.0;
        self.status.battery_pct = (self.status.battery_pct - drain).clamp(0.0, 100.0);

        // Due actions fire in deadline order; the sort is stable so equal
        // deadlines keep their insertion order.
        self.scheduled.sort_by_key(|a| a.fire_at_ms);
        let due = self.scheduled.partition_point(|a| a.fire_at_ms <= now);
        let fired: Vec<ScheduledAction> = self.scheduled.drain(..due).collect();
        for action in fired {
            let result = self.apply(&action.action, now);
            tracing::info!(
                robot = %self.status.robot_id,
                action = %action.action,
                accepted = result.accepted,
                "scheduled action fired: {}",
                result.message
            );
        }

        self.refresh(cfg);
    }
}

/// A fleet of up to four simulated robots, addressed by short name.
#[derive(Debug, Clone)]
pub struct Fleet {
    config: SimConfig,
    robots: BTreeMap<String, Robot>,
}

impl Fleet {
    pub fn new<I, S>(ids: I, config: SimConfig) -> Result<Self, SimError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if config.dt_ms == 0 || config.snapshot_every_ms == 0 {
            return Err(SimError::BadConfig(
                "dt_ms and snapshot_every_ms must be positive".into(),
            ));
        }
        if !config.snapshot_every_ms.is_multiple_of(config.dt_ms) {
            return Err(SimError::BadConfig(
                "snapshot_every_ms must be a multiple of dt_ms".into(),
            ));
        }
        if !(config.speed_mps.is_finite() && config.speed_mps > 0.0)
            || !(config.drain_pct_per_s.is_finite() && config.drain_pct_per_s >= 0.0)
        {
            return Err(SimError::BadConfig(
                "speed and drain must be finite and positive".into(),
            ));
        }
        let mut robots = BTreeMap::new();
        for id in ids {
            let id = id.as_ref();
            if id.is_empty() {
                return Err(SimError::BadFleet("empty robot name".into()));
            }
            if robots.insert(id.to_string(), Robot::new(id)).is_some() {
                return Err(SimError::BadFleet(format!("duplicate robot {id:?}")));
            }
        }
        if robots.is_empty() || robots.len() > MAX_ROBOTS {
            return Err(SimError::BadFleet(format!(
                "fleet must have 1..={MAX_ROBOTS} robots"
            )));
        }
        let mut fleet = Fleet { config, robots };
        for robot in fleet.robots.values_mut() {
            robot.refresh(&fleet.config);
        }
        Ok(fleet)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn robot_ids(&self) -> impl Iterator<Item = &str> {
        self.robots.keys().map(String::as_str)
    }

    pub fn contains(&self, robot_id: &str) -> bool {
        self.robots.contains_key(robot_id)
    }

    fn robot_mut(&mut self, robot_id: &str) -> Result<&mut Robot, SimError> {
        self.robots
            .get_mut(robot_id)
            .ok_or_else(|| SimError::UnknownRobot(robot_id.to_string()))
    }

    fn robot(&self, robot_id: &str) -> Result<&Robot, SimError> {
        self.robots
            .get(robot_id)
            .ok_or_else(|| SimError::UnknownRobot(robot_id.to_string()))
    }

    pub fn snapshot(&self, robot_id: &str) -> Result<RobotStatus, SimError> {
        Ok(self.robot(robot_id)?.status.clone())
    }

    pub fn snapshots(&self) -> Vec<RobotStatus> {
        self.robots.values().map(|r| r.status.clone()).collect()
    }

    pub fn pending_actions(&self, robot_id: &str) -> Result<&[ScheduledAction], SimError> {
        Ok(&self.robot(robot_id)?.scheduled)
    }

    pub fn locations(&self, robot_id: &str) -> Result<Vec<LocationLabel>, SimError> {
        Ok(self.robot(robot_id)?.locations.values().cloned().collect())
    }

    /// Executes a command against one robot. Rule conflicts (moving while
    /// sitting or with the EStop engaged) come back as a rejected result.
    pub fn apply_command(
        &mut self,
        robot_id: &str,
        intent: &Intent,
        now_ms: u64,
    ) -> Result<CommandResult, SimError> {
        if intent.is_query() {
            return Err(SimError::NotACommand(intent.action().to_string()));
        }
        let cfg = self.config.clone();
        let robot = self.robot_mut(robot_id)?;
        if let Err(e) = intent.validate() {
            return Ok(CommandResult::rejected(e.to_string()));
        }
        let result = robot.apply(intent, now_ms);
        robot.refresh(&cfg);
        Ok(result)
    }

    pub fn step(&mut self, robot_id: &str, dt_ms: u64) -> Result<RobotStatus, SimError> {
        if dt_ms == 0 {
            return Err(SimError::ZeroStep);
        }
        let cfg = self.config.clone();
        let robot = self.robot_mut(robot_id)?;
        robot.step(dt_ms, &cfg);
        Ok(robot.status.clone())
    }

    /// Steps every robot by `dt_ms`; snapshots come back in robot-name order.
    pub fn step_all(&mut self, dt_ms: u64) -> Result<Vec<RobotStatus>, SimError> {
        if dt_ms == 0 {
            return Err(SimError::ZeroStep);
        }
        let cfg = self.config.clone();
        Ok(self
            .robots
            .values_mut()
            .map(|r| {
                r.step(dt_ms, &cfg);
                r.status.clone()
            })
            .collect())
    }

    pub fn inject_fault(&mut self, robot_id: &str, fault: &Fault) -> Result<(), SimError> {
        if let Fault::SetBattery(pct) = fault {
            if !pct.is_finite() || !(0.0..=100.0).contains(pct) {
                return Err(SimError::BadBattery(*pct));
            }
        }
        let cfg = self.config.clone();
        let robot = self.robot_mut(robot_id)?;
        match fault {
            Fault::RaiseError(code) => {
                if !robot.status.errors.contains(code) {
                    robot.status.errors.push(code.clone());
                }
            }
            Fault::ClearErrors => robot.status.errors.clear(),
            Fault::SetEstop(on) => {
                robot.status.estop_enabled = *on;
                if *on {
                    robot.stop_motion();
                }
            }
            Fault::SetBattery(pct) => robot.status.battery_pct = *pct,
        }
        robot.refresh(&cfg);
        Ok(())
    }

    /// Applies one script entry at the current fleet time. Rejected commands
    /// are logged, not treated as errors.
    pub fn apply_entry(&mut self, entry: &ScenarioEntry, now_ms: u64) -> Result<(), SimError> {
        match &entry.action {
            ScenarioAction::Fault(fault) => self.inject_fault(&entry.robot, fault),
            ScenarioAction::Command(intent) => {
                let result = self.apply_command(&entry.robot, intent, now_ms)?;
                if !result.accepted {
                    tracing::info!(robot = %entry.robot, %intent, "command rejected: {}", result.message);
                }
                Ok(())
            }
        }
    }
}

pub fn check_script_sorted(script: &[ScenarioEntry]) -> Result<(), SimError> {
    match script.windows(2).position(|w| w[0].at_ms > w[1].at_ms) {
        Some(i) => Err(SimError::UnsortedScript(i + 1)),
        None => Ok(()),
    }
}

/// Drives a fleet through a script for `duration_ms` of simulated time and
/// returns every snapshot taken at the configured cadence, starting at t=0.
///
/// Entries due at or before a step time are applied after that step and
/// before its snapshot. The trace is a pure function of the inputs.
pub fn run_scenario<S: AsRef<str>>(
    robot_ids: &[S],
    script: &[ScenarioEntry],
    config: &SimConfig,
    duration_ms: u64,
) -> Result<Vec<RobotStatus>, SimError> {
    check_script_sorted(script)?;
    let mut fleet = Fleet::new(robot_ids.iter().map(AsRef::as_ref), config.clone())?;
    for entry in script {
        fleet.robot(&entry.robot)?;
    }
    let mut runner = ScenarioRunner::new(script);
    let mut trace = Vec::new();
    let mut t = 0;
    runner.apply_due(&mut fleet, t)?;
    trace.extend(fleet.snapshots());
    while t < duration_ms {
        fleet.step_all(config.dt_ms)?;
        t += config.dt_ms;
        runner.apply_due(&mut fleet, t)?;
        if t % config.snapshot_every_ms == 0 {
            trace.extend(fleet.snapshots());
        }
    }
    Ok(trace)
}

/// Cursor over a sorted script.
#[derive(Debug, Clone)]
pub struct ScenarioRunner<'a> {
    script: &'a [ScenarioEntry],
    next: usize,
}

impl<'a> ScenarioRunner<'a> {
    pub fn new(script: &'a [ScenarioEntry]) -> Self {
        ScenarioRunner { script, next: 0 }
    }

    pub fn apply_due(&mut self, fleet: &mut Fleet, now_ms: u64) -> Result<(), SimError> {
        while let Some(entry) = self.script.get(self.next) {
            if entry.at_ms > now_ms {
                break;
            }
            fleet.apply_entry(entry, now_ms)?;
            self.next += 1;
        }
        Ok(())
    }

    pub fn finished(&self) -> bool {
        self.next >= self.script.len()
    }
}
