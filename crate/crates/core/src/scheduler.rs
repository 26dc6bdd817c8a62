//! Priority scheduler for haptic alerts.
//!
//! Up to four event slots map an event type on a set of robots to a pattern.
//! Slot 1 has the highest priority. Every (event type, robot) pair raised by
//! the detector becomes an *occurrence*; at most one occurrence plays at a
//! time and the scheduler emits one motor frame per tick.
//!
//! Each [`Scheduler::tick`] runs these steps in order:
//!
//! 1. **Complete.** The playing occurrence finishes once its schedule has run
//!    out, or, if its event was cleared mid-playback, once the repetition that
//!    was running at clear time has ended. Cleared occurrences are removed.
//!    Otherwise a realerting occurrence waits until
//!    `start + total_ms + realert_delay_ms`; a do-not-realert one is done
//!    until its event clears and is raised again.
//! 2. **Swap.** A pending configuration is installed once nothing plays.
//! 3. **Wake.** Waiting occurrences whose deadline has passed become ready.
//! 4. **Preempt.** A ready occurrence in a strictly higher-priority slot
//!    interrupts the playing one, which goes back to ready and later restarts
//!    from its first frame. Occurrences in the same slot never interrupt each
//!    other. An interrupted occurrence whose event already cleared is dropped.
//! 5. **Select.** With nothing playing, the ready occurrence with the lowest
//!    slot number starts; within a slot the one that became ready first wins,
//!    then the earlier raise, then the robot name.
//! 6. **Emit.** The frame of the playing schedule at the elapsed time, or
//!    all-off.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Edge, EventKey, EventTransition, EventType};
use crate::motor::MotorFrame;
use crate::pattern::{expand, FrameSchedule, PatternError, PatternRef, PlaybackParams};
use crate::sim::MAX_ROBOTS;

pub const TICK_MS: u64 = 10;
pub const MAX_SLOTS: usize = 4;

fn default_tick() -> u64 {
    TICK_MS
}

/// One prioritized event slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventConfig {
    pub slot: u8,
    pub event_type: EventType,
    pub robots: BTreeSet<String>,
    pub pattern: PatternRef,
    #[serde(flatten)]
    pub params: PlaybackParams,
}

/// Configuration file / API document:
/// `{"tick_ms":10,"events":[{"slot":1,"event_type":"error","robots":["rat"],
///   "pattern":{"predefined":"pulse_matrix"},"reps":2,"realert":true,
///   "realert_delay_ms":5000,"step_ms":200,"intensity_pct":100}]}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    #[serde(default = "default_tick")]
    pub tick_ms: u64,
    pub events: Vec<EventConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("configuration has no events")]
    NoEvents,
    #[error("at most {MAX_SLOTS} events can be monitored, got {0}")]
    TooManySlots(usize),
    #[error("slot {0} is outside 1..=4")]
    SlotOutOfRange(u8),
    #[error("slot {0} is used twice")]
    DuplicateSlot(u8),
    #[error("slots must be filled in priority order starting at 1")]
    SlotsNotContiguous,
    #[error("slot {0} monitors no robots")]
    NoRobots(u8),
    #[error("slot {0} monitors more than {MAX_ROBOTS} robots")]
    TooManyRobots(u8),
    #[error("{event_type} for {robot} is mapped to more than one pattern")]
    DuplicateEventMapping {
        event_type: EventType,
        robot: String,
    },
    #[error("slot {slot}: {source}")]
    Pattern {
        slot: u8,
        #[source]
        source: PatternError,
    },
    #[error("tick_ms must be {TICK_MS}, got {0}")]
    BadTick(u64),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::NoEvents => "NoEvents",
            ConfigError::TooManySlots(_) => "TooManySlots",
            ConfigError::SlotOutOfRange(_) => "SlotOutOfRange",
            ConfigError::DuplicateSlot(_) => "DuplicateSlot",
            ConfigError::SlotsNotContiguous => "SlotsNotContiguous",
            ConfigError::NoRobots(_) => "NoRobots",
            ConfigError::TooManyRobots(_) => "TooManyRobots",
            ConfigError::DuplicateEventMapping { .. } => "DuplicateEventMapping",
            ConfigError::Pattern { source, .. } => source.code(),
            ConfigError::BadTick(_) => "BadTick",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedSlot {
    pub slot: u8,
    pub event_type: EventType,
    pub params: PlaybackParams,
    pub schedule: Arc<FrameSchedule>,
}

/// A configuration that passed [`validate_config`], with patterns expanded.
/// The only way to hand a configuration to the scheduler.
#[derive(Debug, Clone)]
pub struct ValidConfig {
    config: SchedulerConfig,
    by_key: BTreeMap<EventKey, Arc<ResolvedSlot>>,
}

impl ValidConfig {
    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn slot_for(&self, key: &EventKey) -> Option<&ResolvedSlot> {
        self.by_key.get(key).map(|s| &**s)
    }

    pub fn keys(&self) -> impl Iterator<Item = &EventKey> {
        self.by_key.keys()
    }
}

pub fn validate_config(config: &SchedulerConfig) -> Result<ValidConfig, ConfigError> {
    if config.tick_ms != TICK_MS {
        return Err(ConfigError::BadTick(config.tick_ms));
    }
    if config.events.is_empty() {
        return Err(ConfigError::NoEvents);
    }
    if config.events.len() > MAX_SLOTS {
        return Err(ConfigError::TooManySlots(config.events.len()));
    }
    let mut slots = BTreeSet::new();
    for ev in &config.events {
        if !(1..=MAX_SLOTS as u8).contains(&ev.slot) {
            return Err(ConfigError::SlotOutOfRange(ev.slot));
        }
        if !slots.insert(ev.slot) {
            return Err(ConfigError::DuplicateSlot(ev.slot));
        }
    }
    if slots.iter().copied().ne(1..=config.events.len() as u8) {
        return Err(ConfigError::SlotsNotContiguous);
    }

    let mut ordered: Vec<&EventConfig> = config.events.iter().collect();
    ordered.sort_by_key(|ev| ev.slot);
    let mut by_key = BTreeMap::new();
    for ev in ordered {
        if ev.robots.is_empty() || ev.robots.iter().any(|r| r.trim().is_empty()) {
            return Err(ConfigError::NoRobots(ev.slot));
        }
        if ev.robots.len() > MAX_ROBOTS {
            return Err(ConfigError::TooManyRobots(ev.slot));
        }
        let pattern_err = |source| ConfigError::Pattern {
            slot: ev.slot,
            source,
        };
        let spec = ev.pattern.resolve().map_err(pattern_err)?;
        let schedule = expand(&spec, &ev.params).map_err(pattern_err)?;
        let resolved = Arc::new(ResolvedSlot {
            slot: ev.slot,
            event_type: ev.event_type,
            params: ev.params,
            schedule: Arc::new(schedule),
        });
        for robot in &ev.robots {
            let key = EventKey {
                event_type: ev.event_type,
                robot_id: robot.clone(),
            };
            if by_key.insert(key, Arc::clone(&resolved)).is_some() {
                return Err(ConfigError::DuplicateEventMapping {
                    event_type: ev.event_type,
                    robot: robot.clone(),
                });
            }
        }
    }
    Ok(ValidConfig {
        config: config.clone(),
        by_key,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "phase")]
pub enum Phase {
    Ready,
    Playing { started_at_ms: u64 },
    WaitRealert { deadline_ms: u64 },
    Done,
}

/// A live alert for one (event type, robot) pair.
#[derive(Debug, Clone, Serialize)]
pub struct Occurrence {
    pub key: EventKey,
    pub slot: u8,
    pub phase: Phase,
    pub raised_at_ms: u64,
    pub ready_since_ms: u64,
    /// Set when the event cleared during playback; the running repetition
    /// still completes.
    pub cleared_at_ms: Option<u64>,
    #[serde(skip)]
    resolved: Arc<ResolvedSlot>,
}

impl Occurrence {
    pub fn schedule(&self) -> &FrameSchedule {
        &self.resolved.schedule
    }

    pub fn params(&self) -> &PlaybackParams {
        &self.resolved.params
    }

    fn stop_point(&self, started_at_ms: u64) -> u64 {
        let schedule = &self.resolved.schedule;
        match self.cleared_at_ms {
            Some(cleared) => schedule.repetition_end(cleared.saturating_sub(started_at_ms)),
            None => schedule.total_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tick at {now_ms} ms does not advance past the previous tick at {last_ms} ms")]
pub struct NonMonotoneTick {
    pub now_ms: u64,
    pub last_ms: u64,
}

/// Deterministic alert scheduler. Time is supplied by the caller.
#[derive(Debug, Clone)]
pub struct Scheduler {
    config: Arc<ValidConfig>,
    pending: Option<Arc<ValidConfig>>,
    occurrences: BTreeMap<EventKey, Occurrence>,
    /// Every currently raised event, configured or not, so a config swap can
    /// pick up events that are already active.
    active: BTreeSet<EventKey>,
    playing: Option<EventKey>,
    last_tick_ms: Option<u64>,
}

impl Scheduler {
    pub fn new(config: ValidConfig) -> Self {
        Scheduler {
            config: Arc::new(config),
            pending: None,
            occurrences: BTreeMap::new(),
            active: BTreeSet::new(),
            playing: None,
            last_tick_ms: None,
        }
    }

    pub fn config(&self) -> &ValidConfig {
        &self.config
    }

    /// Queues a new configuration. It takes effect on the first tick with
    /// no playback in progress.
    pub fn replace_config(&mut self, config: ValidConfig) {
        self.pending = Some(Arc::new(config));
    }

    pub fn has_pending_config(&self) -> bool {
        self.pending.is_some()
    }

    pub fn playing(&self) -> Option<&Occurrence> {
        self.playing.as_ref().and_then(|k| self.occurrences.get(k))
    }

    pub fn occurrence(&self, key: &EventKey) -> Option<&Occurrence> {
        self.occurrences.get(key)
    }

    pub fn occurrences(&self) -> impl Iterator<Item = &Occurrence> {
        self.occurrences.values()
    }

    pub fn on_transition(&mut self, transition: &EventTransition, now_ms: u64) {
        let key = &transition.key;
        match transition.edge {
            Edge::Raised => {
                self.active.insert(key.clone());
                if let Some(occ) = self.occurrences.get_mut(key) {
                    // re-raised before the running repetition finished
                    occ.cleared_at_ms = None;
                    return;
                }
                if let Some(resolved) = self.config.by_key.get(key) {
                    let occ = new_occurrence(key.clone(), Arc::clone(resolved), now_ms);
                    self.occurrences.insert(key.clone(), occ);
                }
            }
            Edge::Cleared => {
                self.active.remove(key);
                let Some(occ) = self.occurrences.get_mut(key) else {
                    return;
                };
                if matches!(occ.phase, Phase::Playing { .. }) {
                    occ.cleared_at_ms = Some(now_ms);
                } else {
                    self.occurrences.remove(key);
                }
            }
        }
    }

    pub fn tick(&mut self, now_ms: u64) -> Result<MotorFrame, NonMonotoneTick> {
        if let Some(last_ms) = self.last_tick_ms {
            if now_ms <= last_ms {
                let err = NonMonotoneTick { now_ms, last_ms };
                tracing::warn!("{err}");
                return Err(err);
            }
        }
        self.last_tick_ms = Some(now_ms);

        self.complete_playback(now_ms);
        if self.playing.is_none() {
            if let Some(next) = self.pending.take() {
                self.install(next, now_ms);
            }
        }
        for occ in self.occurrences.values_mut() {
            if let Phase::WaitRealert { deadline_ms } = occ.phase {
                if deadline_ms <= now_ms {
                    occ.phase = Phase::Ready;
                    occ.ready_since_ms = deadline_ms;
                }
            }
        }
        self.preempt(now_ms);
        if self.playing.is_none() {
            self.select(now_ms);
        }
        Ok(self.current_frame(now_ms))
    }

    fn complete_playback(&mut self, now_ms: u64) {
        let Some(key) = self.playing.clone() else {
            return;
        };
        let occ = self
            .occurrences
            .get_mut(&key)
            .expect("playing occurrence exists");
        let Phase::Playing { started_at_ms } = occ.phase else {
            unreachable!(
                "playing key refers to an occurrence in phase {:?}",
                occ.phase
            );
        };
        if now_ms - started_at_ms < occ.stop_point(started_at_ms) {
            return;
        }
        self.playing = None;
        if occ.cleared_at_ms.is_some() {
            self.occurrences.remove(&key);
        } else if occ.resolved.params.realert {
            occ.phase = Phase::WaitRealert {
                deadline_ms: started_at_ms
                    + occ.resolved.schedule.total_ms
                    + occ.resolved.params.realert_delay_ms,
            };
        } else {
            occ.phase = Phase::Done;
        }
    }

    fn preempt(&mut self, now_ms: u64) {
        let Some(key) = self.playing.clone() else {
            return;
        };
        let playing_slot = self.occurrences[&key].slot;
        let outranked = self
            .occurrences
            .values()
            .any(|o| o.phase == Phase::Ready && o.slot < playing_slot);
        if !outranked {
            return;
        }
        self.playing = None;
        let occ = self
            .occurrences
            .get_mut(&key)
            .expect("playing occurrence exists");
        if occ.cleared_at_ms.is_some() {
            self.occurrences.remove(&key);
        } else {
            occ.phase = Phase::Ready;
            occ.ready_since_ms = now_ms;
        }
    }

    fn select(&mut self, now_ms: u64) {
        let next = self
            .occurrences
            .values()
            .filter(|o| o.phase == Phase::Ready)
            .min_by(|a, b| {
                (a.slot, a.ready_since_ms, a.raised_at_ms, &a.key.robot_id).cmp(&(
                    b.slot,
                    b.ready_since_ms,
                    b.raised_at_ms,
                    &b.key.robot_id,
                ))
            })
            .map(|o| o.key.clone());
        if let Some(key) = next {
            let occ = self
                .occurrences
                .get_mut(&key)
                .expect("selected occurrence exists");
            occ.phase = Phase::Playing {
                started_at_ms: now_ms,
            };
            occ.cleared_at_ms = None;
            self.playing = Some(key);
        }
    }

    fn current_frame(&self, now_ms: u64) -> MotorFrame {
        match self.playing() {
            Some(occ) => {
                let Phase::Playing { started_at_ms } = occ.phase else {
                    unreachable!("playing occurrence not in playing phase");
                };
                let frame = occ.resolved.schedule.frame_at(now_ms - started_at_ms);
                MotorFrame {
                    at_ms: now_ms,
                    active: frame.active,
                    intensity_pct: frame.intensity_pct,
                }
            }
            None => MotorFrame::off(now_ms),
        }
    }

    /// Installs a new configuration while nothing is playing. Occurrences
    /// keep their phase when their key is still mapped; already-active
    /// events that became mapped start as ready.
    fn install(&mut self, next: Arc<ValidConfig>, now_ms: u64) {
        debug_assert!(self.playing.is_none());
        self.occurrences
            .retain(|key, occ| match next.by_key.get(key) {
                Some(resolved) => {
                    occ.slot = resolved.slot;
                    occ.resolved = Arc::clone(resolved);
                    true
                }
                None => false,
            });
        for key in &self.active {
            if self.occurrences.contains_key(key) {
                continue;
            }
            if let Some(resolved) = next.by_key.get(key) {
                self.occurrences.insert(
                    key.clone(),
                    new_occurrence(key.clone(), Arc::clone(resolved), now_ms),
                );
            }
        }
        self.config = next;
    }
}

fn new_occurrence(key: EventKey, resolved: Arc<ResolvedSlot>, now_ms: u64) -> Occurrence {
    Occurrence {
        key,
        slot: resolved.slot,
        phase: Phase::Ready,
        raised_at_ms: now_ms,
        ready_since_ms: now_ms,
        cleared_at_ms: None,
        resolved,
    }
}
