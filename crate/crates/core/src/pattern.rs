//! Vibration pattern model for the forearm motor array.
//!
//! The wearable carries ten motors. Motors 1 to 9 form a 3x3 matrix numbered
//! row-major (1 top-left, 3 top-right, 9 bottom-right); motor 10 sits on the
//! strap underneath the forearm.
//!
//! ```text
//!   1  2  3
//!   4  5  6
//!   7  8  9
//!      10
//! ```
//!
//! A pattern is either *static* (one motor set pulsing on and off) or
//! *dynamic* (an ordered list of motor groups activated one after another).
//! [`expand`] turns a pattern plus its [`PlaybackParams`] into a
//! [`FrameSchedule`], the timed list of motor sets the scheduler plays.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of motors on the wearable.
pub const MOTOR_COUNT: u8 = 10;
/// Centre-to-centre spacing of the matrix motors, in millimetres.
pub const MOTOR_SPACING_MM: u32 = 40;
/// Nominal vibration frequency the motors are driven at.
pub const VIBRATION_HZ: u32 = 200;
/// Smallest allowed pattern step; equals the scheduler tick.
pub const MIN_STEP_MS: u64 = 10;

/// Set of active motors, stored as a bitmask over ids 1..=10.
///
/// Serializes as a sorted JSON array of ids. An empty set means all motors off.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MotorSet(u16);

impl MotorSet {
    pub const EMPTY: MotorSet = MotorSet(0);

    /// Builds a set from motor ids, rejecting anything outside 1..=10.
    pub fn from_ids<I: IntoIterator<Item = u8>>(ids: I) -> Result<Self, PatternError> {
        let mut bits = 0u16;
        for id in ids {
            if id == 0 || id > MOTOR_COUNT {
                return Err(PatternError::BadMotorId(id));
            }
            bits |= 1 << (id - 1);
        }
        Ok(MotorSet(bits))
    }

    pub fn all_matrix() -> Self {
        MotorSet(0b01_1111_1111)
    }

    pub fn single(id: u8) -> Result<Self, PatternError> {
        Self::from_ids([id])
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, id: u8) -> bool {
        (1..=MOTOR_COUNT).contains(&id) && self.0 & (1 << (id - 1)) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn ids(self) -> impl Iterator<Item = u8> {
        (1..=MOTOR_COUNT).filter(move |&id| self.contains(id))
    }

    pub fn bits(self) -> u16 {
        self.0
    }
}

impl fmt::Debug for MotorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.ids()).finish()
    }
}

impl fmt::Display for MotorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.ids().map(|id| id.to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

impl Serialize for MotorSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.ids())
    }
}

impl<'de> Deserialize<'de> for MotorSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<u8>::deserialize(deserializer)?;
        MotorSet::from_ids(ids).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern has an empty motor set")]
    EmptyMotors,
    #[error("motor id {0} is outside 1..=10")]
    BadMotorId(u8),
    #[error("unknown predefined pattern {0:?}")]
    UnknownPattern(String),
    #[error("invalid playback parameter: {0}")]
    BadParams(String),
}

impl PatternError {
    pub fn code(&self) -> &'static str {
        match self {
            PatternError::EmptyMotors => "EmptyMotors",
            PatternError::BadMotorId(_) => "BadMotorId",
            PatternError::UnknownPattern(_) => "UnknownPattern",
            PatternError::BadParams(_) => "BadParams",
        }
    }
}

/// A pattern as authored: raw motor ids, validated by [`validate_pattern`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternSpec {
    Static(BTreeSet<u8>),
    Dynamic(Vec<BTreeSet<u8>>),
}

impl PatternSpec {
    pub fn group_count(&self) -> usize {
        match self {
            PatternSpec::Static(_) => 1,
            PatternSpec::Dynamic(groups) => groups.len(),
        }
    }
}

/// The seven built-in patterns.
pub const PREDEFINED_NAMES: [&str; 7] = [
    "pulse_matrix",
    "pulse_bottom",
    "pulse_top_centre",
    "circular",
    "moving_diagonal",
    "moving_rows",
    "moving_cols",
];

fn set(ids: &[u8]) -> BTreeSet<u8> {
    ids.iter().copied().collect()
}

/// Looks up a built-in pattern by name.
pub fn predefined(name: &str) -> Result<PatternSpec, PatternError> {
    let spec = match name {
        "pulse_matrix" => PatternSpec::Static((1..=9).collect()),
        "pulse_bottom" => PatternSpec::Static(set(&[10])),
        "pulse_top_centre" => PatternSpec::Static(set(&[5])),
        "circular" => PatternSpec::Dynamic(vec![set(&[4]), set(&[5]), set(&[6]), set(&[10])]),
        "moving_diagonal" => PatternSpec::Dynamic(vec![set(&[1]), set(&[5]), set(&[9])]),
        "moving_rows" => {
            PatternSpec::Dynamic(vec![set(&[1, 2, 3]), set(&[4, 5, 6]), set(&[7, 8, 9])])
        }
        "moving_cols" => {
            PatternSpec::Dynamic(vec![set(&[1, 4, 7]), set(&[2, 5, 8]), set(&[3, 6, 9])])
        }
        other => return Err(PatternError::UnknownPattern(other.to_string())),
    };
    Ok(spec)
}

/// Pattern reference as it appears in configuration files and API bodies:
/// `{"predefined":"circular"}`, `{"static":[5]}` or `{"dynamic":[[4],[5]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternRef {
    Predefined(String),
    Static(BTreeSet<u8>),
    Dynamic(Vec<BTreeSet<u8>>),
}

impl PatternRef {
    pub fn resolve(&self) -> Result<PatternSpec, PatternError> {
        let spec = match self {
            PatternRef::Predefined(name) => predefined(name)?,
            PatternRef::Static(motors) => PatternSpec::Static(motors.clone()),
            PatternRef::Dynamic(groups) => PatternSpec::Dynamic(groups.clone()),
        };
        validate_pattern(&spec)?;
        Ok(spec)
    }
}

impl From<PatternSpec> for PatternRef {
    fn from(spec: PatternSpec) -> Self {
        match spec {
            PatternSpec::Static(m) => PatternRef::Static(m),
            PatternSpec::Dynamic(g) => PatternRef::Dynamic(g),
        }
    }
}

/// Checks motor ids and non-emptiness. Bad ids are reported before empty sets
/// only when they occur earlier in the pattern.
pub fn validate_pattern(spec: &PatternSpec) -> Result<(), PatternError> {
    let check = |motors: &BTreeSet<u8>| -> Result<(), PatternError> {
        if motors.is_empty() {
            return Err(PatternError::EmptyMotors);
        }
        MotorSet::from_ids(motors.iter().copied()).map(|_| ())
    };
    match spec {
        PatternSpec::Static(motors) => check(motors),
        PatternSpec::Dynamic(groups) => {
            if groups.is_empty() {
                return Err(PatternError::EmptyMotors);
            }
            groups.iter().try_for_each(check)
        }
    }
}

/// How a pattern is played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaybackParams {
    /// Number of repetitions per playback.
    pub reps: u32,
    /// `false` is the "do not realert" mode: play once per detection.
    pub realert: bool,
    /// Gap between the end of one playback and the next while the event persists.
    pub realert_delay_ms: u64,
    /// Duration of one pattern step ("Pattern Speed").
    pub step_ms: u64,
    pub intensity_pct: u8,
}

impl Default for PlaybackParams {
    fn default() -> Self {
        PlaybackParams {
            reps: 1,
            realert: true,
            realert_delay_ms: 5000,
            step_ms: 250,
            intensity_pct: 80,
        }
    }
}

impl PlaybackParams {
    pub fn validate(&self) -> Result<(), PatternError> {
        if self.reps < 1 {
            return Err(PatternError::BadParams("reps must be at least 1".into()));
        }
        if self.step_ms < MIN_STEP_MS {
            return Err(PatternError::BadParams(format!(
                "step_ms must be at least {MIN_STEP_MS}"
            )));
        }
        if !(1..=100).contains(&self.intensity_pct) {
            return Err(PatternError::BadParams(
                "intensity_pct must be within 1..=100".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub offset_ms: u64,
    pub active: MotorSet,
    pub intensity_pct: u8,
}

/// Executable form of a pattern. Offsets start at 0 and strictly increase;
/// the last frame is all-off and sits at `total_ms`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSchedule {
    pub frames: Vec<Frame>,
    pub total_ms: u64,
    /// Distance between the starts of consecutive repetitions.
    pub rep_stride_ms: u64,
    /// Time from the start of a repetition until its motors stop.
    pub rep_active_ms: u64,
}

impl FrameSchedule {
    /// Frame active at `elapsed_ms` after playback start. Past the end the
    /// terminal all-off frame is returned.
    pub fn frame_at(&self, elapsed_ms: u64) -> &Frame {
        let idx = self.frames.partition_point(|f| f.offset_ms <= elapsed_ms);
        &self.frames[idx.saturating_sub(1)]
    }

    /// Time at which the repetition running at `elapsed_ms` finishes. In the
    /// off-gap between static pulses the repetition has already finished, so
    /// `elapsed_ms` itself is returned.
    pub fn repetition_end(&self, elapsed_ms: u64) -> u64 {
        let start = elapsed_ms / self.rep_stride_ms * self.rep_stride_ms;
        let end = (start + self.rep_active_ms).min(self.total_ms);
        end.max(elapsed_ms.min(self.total_ms))
    }

    /// Sequence of distinct active sets, ignoring timing.
    pub fn signature(&self) -> Vec<MotorSet> {
        let mut sig: Vec<MotorSet> = Vec::new();
        for frame in &self.frames {
            if sig.last() != Some(&frame.active) {
                sig.push(frame.active);
            }
        }
        sig
    }
}

/// Expands a validated pattern into its frame schedule.
///
/// Dynamic patterns hold each group for `step_ms`, repeat back to back `reps`
/// times and end with an all-off frame: `total = step * groups * reps`.
/// Static patterns pulse on for `step_ms` and off for `step_ms`; the off after
/// the last pulse is the terminal frame: `total = step * (2 * reps - 1)`.
pub fn expand(spec: &PatternSpec, params: &PlaybackParams) -> Result<FrameSchedule, PatternError> {
    validate_pattern(spec)?;
    params.validate()?;
    let step = params.step_ms;
    let reps = u64::from(params.reps);
    let intensity_pct = params.intensity_pct;
    let frame = |offset_ms, active| Frame {
        offset_ms,
        active,
        intensity_pct,
    };
    let mut frames = Vec::new();
    let schedule = match spec {
        PatternSpec::Static(motors) => {
            let on = MotorSet::from_ids(motors.iter().copied())?;
            for rep in 0..reps {
                frames.push(frame(2 * rep * step, on));
                frames.push(frame((2 * rep + 1) * step, MotorSet::EMPTY));
            }
            FrameSchedule {
                total_ms: step * (2 * reps - 1),
                frames,
                rep_stride_ms: 2 * step,
                rep_active_ms: step,
            }
        }
        PatternSpec::Dynamic(groups) => {
            let sets = groups
                .iter()
                .map(|g| MotorSet::from_ids(g.iter().copied()))
                .collect::<Result<Vec<_>, _>>()?;
            let n = sets.len() as u64;
            for rep in 0..reps {
                for (i, active) in sets.iter().enumerate() {
                    frames.push(frame((rep * n + i as u64) * step, *active));
                }
            }
            let total_ms = reps * n * step;
            frames.push(frame(total_ms, MotorSet::EMPTY));
            FrameSchedule {
                frames,
                total_ms,
                rep_stride_ms: n * step,
                rep_active_ms: n * step,
            }
        }
    };
    Ok(schedule)
}
