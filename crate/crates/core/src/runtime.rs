//! The haptic side assembled: detector, scheduler and motor driver behind one
//! logical clock, plus a deterministic fleet-to-motors scenario driver.

use thiserror::Error;

use crate::bus::{Bus, BusError, RobotFilter};
use crate::events::{Detector, DetectorConfig, EventTransition};
use crate::motor::{FrameLog, MotorDriver, MotorError, MotorFrame, SimulatedBackend};
use crate::scheduler::{NonMonotoneTick, Scheduler, ValidConfig, TICK_MS};
use crate::sim::{check_script_sorted, Fleet, ScenarioEntry, ScenarioRunner, SimConfig, SimError};
use crate::status::RobotStatus;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Tick(#[from] NonMonotoneTick),
    #[error(transparent)]
    Motor(#[from] MotorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bus(#[from] BusError),
}

/// A self-test or pattern preview occupying the motors.
#[derive(Debug, Clone)]
struct TestPlayback {
    frames: FrameLog,
    started_at_ms: u64,
}

impl TestPlayback {
    fn end_ms(&self) -> u64 {
        self.frames.frames.last().map_or(0, |f| f.at_ms)
    }

    fn frame_at(&self, elapsed_ms: u64) -> Option<&MotorFrame> {
        let frames = &self.frames.frames;
        let i = frames.partition_point(|f| f.at_ms <= elapsed_ms);
        i.checked_sub(1).map(|i| &frames[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickOutput {
    pub frame: MotorFrame,
    /// The frame differs from the previous output and was sent to the driver.
    pub applied: bool,
}

/// Owns the alert pipeline. Only output changes reach the driver, so the
/// driver sees the coalesced frame sequence.
#[derive(Debug)]
pub struct Supervisor<D> {
    detector: Detector,
    scheduler: Scheduler,
    driver: D,
    test: Option<TestPlayback>,
    last_output: Option<MotorFrame>,
}

impl<D: MotorDriver> Supervisor<D> {
    pub fn new(config: ValidConfig, detector: DetectorConfig, driver: D) -> Self {
        Supervisor {
            detector: Detector::new(detector),
            scheduler: Scheduler::new(config),
            driver,
            test: None,
            last_output: None,
        }
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    pub fn driver(&self) -> &D {
        &self.driver
    }

    pub fn driver_mut(&mut self) -> &mut D {
        &mut self.driver
    }

    pub fn into_driver(self) -> D {
        self.driver
    }

    /// Last frame sent to the driver.
    pub fn last_output(&self) -> Option<&MotorFrame> {
        self.last_output.as_ref()
    }

    pub fn alert_playing(&self) -> bool {
        self.scheduler.playing().is_some()
    }

    pub fn test_running(&self) -> bool {
        self.test.is_some()
    }

    /// Queued until current playback ends; see [`Scheduler::replace_config`].
    pub fn replace_config(&mut self, config: ValidConfig) {
        self.scheduler.replace_config(config);
    }

    /// Feeds a snapshot to the detector and forwards its transitions to the
    /// scheduler. Stale snapshots are dropped.
    pub fn ingest(&mut self, status: &RobotStatus, now_ms: u64) -> Vec<EventTransition> {
        let transitions = self.detector.update(status).unwrap_or_default();
        for tr in &transitions {
            self.scheduler.on_transition(tr, now_ms);
        }
        transitions
    }

    /// Starts a test playback at the next tick. Refused while an alert or
    /// another test is playing.
    pub fn start_test(&mut self, frames: FrameLog, now_ms: u64) -> Result<(), MotorError> {
        if self.alert_playing() || self.test.is_some() {
            return Err(MotorError::Busy);
        }
        self.test = Some(TestPlayback {
            frames,
            started_at_ms: now_ms,
        });
        Ok(())
    }

    /// Advances the scheduler to `now_ms`. An alert that starts playing
    /// cancels a running test.
    pub fn tick(&mut self, now_ms: u64) -> Result<TickOutput, RuntimeError> {
        let mut frame = self.scheduler.tick(now_ms)?;
        if self.scheduler.playing().is_some() {
            if self.test.take().is_some() {
                tracing::info!("test playback cancelled by alert");
            }
        } else if let Some(test) = &self.test {
            let elapsed = now_ms.saturating_sub(test.started_at_ms);
            if elapsed >= test.end_ms() {
                self.test = None;
            } else if let Some(f) = test.frame_at(elapsed) {
                frame = MotorFrame {
                    at_ms: now_ms,
                    ..*f
                };
            }
        }
        self.output(frame)
    }

    fn output(&mut self, frame: MotorFrame) -> Result<TickOutput, RuntimeError> {
        let applied = self
            .last_output
            .is_none_or(|last| !last.same_output(&frame));
        if applied {
            self.driver.apply_frame(&frame)?;
            self.last_output = Some(frame);
        }
        Ok(TickOutput { frame, applied })
    }

    /// Turns every motor off regardless of the previous output.
    pub fn shutdown(&mut self, now_ms: u64) -> Result<MotorFrame, MotorError> {
        self.test = None;
        let off = MotorFrame::off(now_ms);
        self.driver.apply_frame(&off)?;
        self.last_output = Some(off);
        Ok(off)
    }
}

/// Result of [`run_supervised_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    /// Coalesced frames as applied to the motor backend.
    pub frames: FrameLog,
    pub transitions: Vec<EventTransition>,
    pub snapshots: usize,
}

/// Runs a scripted fleet through the loopback bus, detector, scheduler and
/// simulated backend on one logical clock, from t=0 to `duration_ms`
/// inclusive.
///
/// Each 10 ms tick steps the fleet when a simulation step is due, applies the
/// script entries due by then, publishes snapshots at the snapshot cadence,
/// feeds everything received to the detector and then ticks the scheduler.
pub fn run_supervised_scenario<S: AsRef<str>>(
    robot_ids: &[S],
    script: &[ScenarioEntry],
    sim: &SimConfig,
    config: ValidConfig,
    detector: DetectorConfig,
    duration_ms: u64,
) -> Result<ScenarioOutcome, RuntimeError> {
    check_script_sorted(script)?;
    if sim.dt_ms == 0
        || !sim.dt_ms.is_multiple_of(TICK_MS)
        || !sim.snapshot_every_ms.is_multiple_of(sim.dt_ms)
    {
        return Err(SimError::BadConfig(format!(
            "dt_ms {} must be a positive multiple of {TICK_MS} dividing snapshot_every_ms {}",
            sim.dt_ms, sim.snapshot_every_ms
        ))
        .into());
    }
    let mut fleet = Fleet::new(robot_ids.iter().map(AsRef::as_ref), sim.clone())?;
    let mut runner = ScenarioRunner::new(script);
    let bus = Bus::new();
    let mut sub = bus.subscribe(RobotFilter::all());
    let mut supervisor = Supervisor::new(config, detector, SimulatedBackend::new());
    let mut transitions = Vec::new();
    let mut snapshots = 0;

    let mut t = 0;
    loop {
        if t > 0 && t % sim.dt_ms == 0 {
            fleet.step_all(sim.dt_ms)?;
        }
        runner.apply_due(&mut fleet, t)?;
        if t % sim.snapshot_every_ms == 0 {
            for status in fleet.snapshots() {
                bus.publish(&status)?;
            }
        }
        while let Some(msg) = sub.try_next() {
            match msg {
                Ok(msg) => {
                    snapshots += 1;
                    transitions.extend(supervisor.ingest(&msg.payload, t));
                }
                Err(e) => tracing::warn!("dropping status frame: {e}"),
            }
        }
        supervisor.tick(t)?;
        if t >= duration_ms {
            break;
        }
        t += TICK_MS;
    }
    Ok(ScenarioOutcome {
        frames: supervisor.into_driver().take_log(),
        transitions,
        snapshots,
    })
}
