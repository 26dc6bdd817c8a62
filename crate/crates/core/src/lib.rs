//! Robot supervision core: a simulated fleet, a status bus, event detection,
//! a priority-scheduled vibrotactile alert engine and a natural-language
//! command pipeline.
//!
//! Data flows one way through the haptic side:
//!
//! ```text
//! Fleet --RobotStatus--> Bus --> Detector --EventTransition--> Scheduler --MotorFrame--> MotorDriver
//! ```
//!
//! and the speech side turns an utterance into an [`intent::Intent`], either
//! through the offline grammar or through a model client, then executes it on
//! the fleet.

pub mod bus;
pub mod command;
pub mod config;
pub mod events;
pub mod intent;
pub mod motor;
pub mod pattern;
pub mod runtime;
pub mod scheduler;
pub mod sim;
pub mod status;

pub use events::{make_key, Detector, DetectorConfig, Edge, EventKey, EventTransition, EventType};
pub use intent::{Direction, Intent, StatusTopic};
pub use motor::{FrameLog, MotorDriver, MotorFrame, SimulatedBackend};
pub use pattern::{
    expand, predefined, FrameSchedule, MotorSet, PatternRef, PatternSpec, PlaybackParams,
};
pub use runtime::{run_supervised_scenario, ScenarioOutcome, Supervisor};
pub use scheduler::{
    validate_config, ConfigError, EventConfig, Scheduler, SchedulerConfig, ValidConfig,
};
pub use sim::{CommandResult, Fault, Fleet, ScenarioEntry, SimConfig};
pub use status::RobotStatus;
