//! Motor driver abstraction and the simulated backend.
//!
//! A hardware driver sets the drive level derived from `intensity_pct` on
//! every channel listed in a frame and zero on the others, within one
//! scheduler tick. Motors vibrate at the nominal [`VIBRATION_HZ`]; intensity
//! maps linearly to drive level (see [`drive_level`]).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{expand, FrameSchedule, MotorSet, PatternError, PatternSpec, PlaybackParams};
pub use crate::pattern::{MOTOR_COUNT, MOTOR_SPACING_MM, VIBRATION_HZ};

/// On and off durations used by the motor self-test.
pub const TEST_ON_MS: u64 = 300;
pub const TEST_OFF_MS: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotorFrame {
    pub at_ms: u64,
    pub active: MotorSet,
    pub intensity_pct: u8,
}

impl MotorFrame {
    pub fn off(at_ms: u64) -> Self {
        MotorFrame {
            at_ms,
            active: MotorSet::EMPTY,
            intensity_pct: 0,
        }
    }

    pub fn is_off(&self) -> bool {
        self.active.is_empty()
    }

    /// Same motors and intensity, ignoring the timestamp.
    pub fn same_output(&self, other: &MotorFrame) -> bool {
        self.active == other.active && (self.is_off() || self.intensity_pct == other.intensity_pct)
    }
}

/// Linear map from intensity percentage to a 0.0..=1.0 drive level.
pub fn drive_level(intensity_pct: u8) -> f32 {
    f32::from(intensity_pct.min(100)) / 100.0
}

#[derive(Debug, Error)]
pub enum MotorError {
    #[error("motor id {0} is outside 1..=10")]
    BadMotorId(u8),
    #[error("motor backend is busy")]
    Busy,
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("frame log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("frame log line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Contract every motor driver implements.
pub trait MotorDriver: Send {
    fn apply_frame(&mut self, frame: &MotorFrame) -> Result<(), MotorError>;
}

/// Ordered record of applied frames. `at_ms` never decreases.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLog {
    pub frames: Vec<MotorFrame>,
}

impl FrameLog {
    pub fn push(&mut self, frame: MotorFrame) {
        debug_assert!(self.frames.last().is_none_or(|f| f.at_ms <= frame.at_ms));
        self.frames.push(frame);
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Drops frames that repeat the previous output.
    pub fn coalesced(&self) -> FrameLog {
        let mut out = FrameLog::default();
        for f in &self.frames {
            if out.frames.last().is_none_or(|last| !last.same_output(f)) {
                out.frames.push(*f);
            }
        }
        out
    }

    /// NDJSON export, one `{"active":[..],"at_ms":..,"intensity_pct":..}` per line.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<(), MotorError> {
        for f in &self.frames {
            serde_json::to_writer(&mut w, &serde_json::to_value(f).expect("frame serializes"))
                .map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> Result<FrameLog, MotorError> {
        let mut log = FrameLog::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let frame: MotorFrame = serde_json::from_str(&line).map_err(|e| MotorError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if log.frames.last().is_some_and(|f| f.at_ms > frame.at_ms) {
                return Err(MotorError::Parse {
                    line: i + 1,
                    message: "at_ms decreases".into(),
                });
            }
            log.frames.push(frame);
        }
        Ok(log)
    }
}

impl From<&FrameSchedule> for FrameLog {
    fn from(schedule: &FrameSchedule) -> Self {
        FrameLog {
            frames: schedule
                .frames
                .iter()
                .map(|f| MotorFrame {
                    at_ms: f.offset_ms,
                    active: f.active,
                    intensity_pct: f.intensity_pct,
                })
                .collect(),
        }
    }
}

/// Text rendering of one frame: the 3x3 matrix plus motor 10 below it.
pub fn render_frame(frame: &MotorFrame) -> String {
    let cell = |id: u8| {
        if frame.active.contains(id) {
            "(#)"
        } else {
            "( )"
        }
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "t={:>7} ms  intensity {:>3}%",
        frame.at_ms,
        if frame.is_off() {
            0
        } else {
            frame.intensity_pct
        }
    );
    for row in 0..3u8 {
        let _ = writeln!(
            out,
            "  {}{}{}",
            cell(row * 3 + 1),
            cell(row * 3 + 2),
            cell(row * 3 + 3)
        );
    }
    let _ = writeln!(out, "     {}", cell(10));
    out
}

/// Deterministic backend that records every frame and can mirror them to a
/// diagnostic writer.
pub struct SimulatedBackend {
    log: FrameLog,
    current: MotorFrame,
    busy: bool,
    visualizer: Option<Box<dyn Write + Send>>,
    diagnostics: Vec<String>,
}

impl Default for SimulatedBackend {
    fn default() -> Self {
        SimulatedBackend {
            log: FrameLog::default(),
            current: MotorFrame::off(0),
            busy: false,
            visualizer: None,
            diagnostics: Vec::new(),
        }
    }
}

impl std::fmt::Debug for SimulatedBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulatedBackend")
            .field("frames", &self.log.len())
            .field("current", &self.current)
            .field("busy", &self.busy)
            .finish()
    }
}

impl SimulatedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Redraws every applied frame to `out`.
    pub fn with_visualizer(mut self, out: Box<dyn Write + Send>) -> Self {
        self.visualizer = Some(out);
        self
    }

    pub fn log(&self) -> &FrameLog {
        &self.log
    }

    pub fn take_log(&mut self) -> FrameLog {
        std::mem::take(&mut self.log)
    }

    pub fn current(&self) -> &MotorFrame {
        &self.current
    }

    /// Channel state: drive level per motor id 1..=10.
    pub fn channels(&self) -> [f32; 10] {
        let level = drive_level(self.current.intensity_pct);
        std::array::from_fn(|i| {
            if self.current.active.contains(i as u8 + 1) {
                level
            } else {
                0.0
            }
        })
    }

    pub fn set_busy(&mut self, busy: bool) {
        self.busy = busy;
    }

    pub fn is_busy(&self) -> bool {
        self.busy
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    fn diagnostic(&mut self, line: String) {
        tracing::info!("{line}");
        if let Some(out) = self.visualizer.as_mut() {
            let _ = writeln!(out, "{line}");
        }
        self.diagnostics.push(line);
    }
}

impl MotorDriver for SimulatedBackend {
    fn apply_frame(&mut self, frame: &MotorFrame) -> Result<(), MotorError> {
        // MotorSet only holds ids 1..=10; out-of-range ids fail at construction.
        self.current = *frame;
        self.log.push(*frame);
        if let Some(out) = self.visualizer.as_mut() {
            let _ = out.write_all(render_frame(frame).as_bytes());
            let _ = out.flush();
        }
        Ok(())
    }
}

/// Motor self-test sequence: each motor on for [`TEST_ON_MS`] then off for
/// [`TEST_OFF_MS`], motors 1 through 10, ending with a terminal off frame.
pub fn test_motors_sequence(intensity_pct: u8) -> FrameLog {
    let mut log = FrameLog::default();
    let mut t = 0;
    for id in 1..=MOTOR_COUNT {
        log.push(MotorFrame {
            at_ms: t,
            active: MotorSet::single(id).expect("id in range"),
            intensity_pct,
        });
        t += TEST_ON_MS;
        log.push(MotorFrame {
            at_ms: t,
            active: MotorSet::EMPTY,
            intensity_pct,
        });
        t += TEST_OFF_MS;
    }
    log.push(MotorFrame {
        at_ms: t,
        active: MotorSet::EMPTY,
        intensity_pct,
    });
    log
}

/// Runs the self-test through the backend, reporting each step.
pub fn test_motors(backend: &mut SimulatedBackend) -> Result<FrameLog, MotorError> {
    if backend.is_busy() {
        return Err(MotorError::Busy);
    }
    let log = test_motors_sequence(100);
    for frame in &log.frames {
        backend.apply_frame(frame)?;
        let line = match frame.active.ids().next() {
            Some(id) => format!("[test-motors] t={} ms motor {id} on", frame.at_ms),
            None => format!("[test-motors] t={} ms all off", frame.at_ms),
        };
        backend.diagnostic(line);
    }
    Ok(log)
}

/// Plays a pattern through the backend. The returned log is exactly the
/// pattern's expanded schedule.
pub fn test_pattern(
    backend: &mut SimulatedBackend,
    spec: &PatternSpec,
    params: &PlaybackParams,
) -> Result<FrameLog, MotorError> {
    if backend.is_busy() {
        return Err(MotorError::Busy);
    }
    let schedule = expand(spec, params)?;
    let log = FrameLog::from(&schedule);
    for frame in &log.frames {
        backend.apply_frame(frame)?;
    }
    Ok(log)
}
