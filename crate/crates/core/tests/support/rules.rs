//! Isolated, deterministic checks of each stated scheduling rule.

use serde_json::json;
use supervisor_core::scheduler::Phase;
use supervisor_core::{
    make_key, validate_config, EventTransition, EventType, Scheduler, SchedulerConfig,
};

pub const TICK: u64 = 10;

/// Scheduler plus a per-tick record of which motors were on.
pub struct Harness {
    sched: Scheduler,
    pub now: u64,
    /// (time, motor ids) per tick.
    pub frames: Vec<(u64, Vec<u8>)>,
    /// (start time, robot) of every playback.
    pub plays: Vec<(u64, String)>,
}

#[allow(clippy::too_many_arguments)]
pub fn slot(
    n: u8,
    ty: &str,
    robots: &[&str],
    pattern: &str,
    reps: u32,
    realert: bool,
    delay: u64,
    step: u64,
) -> serde_json::Value {
    json!({"slot": n, "event_type": ty, "robots": robots, "pattern": {"predefined": pattern},
           "reps": reps, "realert": realert, "realert_delay_ms": delay, "step_ms": step, "intensity_pct": 90})
}

impl Harness {
    pub fn new(events: Vec<serde_json::Value>) -> Self {
        let cfg: SchedulerConfig = serde_json::from_value(json!({ "events": events })).unwrap();
        Harness {
            sched: Scheduler::new(validate_config(&cfg).unwrap()),
            now: 0,
            frames: Vec::new(),
            plays: Vec::new(),
        }
    }

    pub fn raise(&mut self, ty: EventType, robot: &str) {
        let tr = EventTransition::raised(make_key(ty, robot), self.now);
        self.sched.on_transition(&tr, self.now);
    }

    pub fn clear(&mut self, ty: EventType, robot: &str) {
        let tr = EventTransition::cleared(make_key(ty, robot), self.now);
        self.sched.on_transition(&tr, self.now);
    }

    /// Ticks at `now`, then advances the clock by one tick.
    pub fn step(&mut self) -> Vec<u8> {
        let f = self.sched.tick(self.now).unwrap();
        let ids: Vec<u8> = f.active.ids().collect();
        self.frames.push((self.now, ids.clone()));
        if let Some(o) = self.sched.playing() {
            if let Phase::Playing { started_at_ms } = o.phase {
                if self.plays.last().is_none_or(|(t, _)| *t != started_at_ms) {
                    self.plays.push((started_at_ms, o.key.robot_id.clone()));
                }
            }
        }
        self.now += TICK;
        ids
    }

    pub fn run_until(&mut self, t: u64) {
        while self.now <= t {
            self.step();
        }
    }

    /// Start times of playbacks whose first frame lights `first`.
    pub fn starts(&self, first: &[u8]) -> Vec<u64> {
        let mut out = Vec::new();
        let mut prev: &[u8] = &[];
        for (t, ids) in &self.frames {
            if ids.as_slice() == first && prev != first {
                out.push(*t);
            }
            prev = ids;
        }
        out
    }

    pub fn playing_robot(&self) -> Option<String> {
        self.sched.playing().map(|o| o.key.robot_id.clone())
    }
}

const MATRIX: &[u8] = &[1, 2, 3, 4, 5, 6, 7, 8, 9];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// A slot-1 event raised during slot-2 playback takes over within one tick.
pub fn preemption_within_one_tick() -> Result<(), String> {
    let mut h = Harness::new(vec![
        slot(1, "error", &["rat"], "pulse_matrix", 1, false, 0, 100),
        slot(2, "idle", &["rat"], "circular", 3, false, 0, 100),
    ]);
    h.raise(EventType::Idle, "rat");
    h.run_until(250);
    ensure(h.frames.last().unwrap().1 == vec![6], || {
        format!("circular not at step 3: {:?}", h.frames.last())
    })?;
    let raised_at = h.now;
    h.raise(EventType::Error, "rat");
    let mut switched = None;
    for _ in 0..3 {
        let t = h.now;
        if h.step() == MATRIX {
            switched = Some(t);
            break;
        }
    }
    let t = switched.ok_or("error pattern never started")?;
    ensure(t - raised_at <= TICK, || {
        format!("preemption took {} ms", t - raised_at)
    })
}

/// Two robots in the same slot never interrupt each other.
pub fn same_slot_no_preemption() -> Result<(), String> {
    let mut h = Harness::new(vec![slot(
        1,
        "error",
        &["rat", "bingo"],
        "circular",
        2,
        false,
        0,
        100,
    )]);
    h.raise(EventType::Error, "rat");
    h.step();
    h.run_until(300);
    h.raise(EventType::Error, "bingo");
    while h.now < 800 {
        h.step();
        ensure(h.playing_robot().as_deref() == Some("rat"), || {
            format!("rat interrupted at {}", h.now)
        })?;
    }
    h.step();
    ensure(h.playing_robot().as_deref() == Some("bingo"), || {
        "bingo did not follow rat".into()
    })?;
    ensure(h.starts(&[4]) == vec![0, 400, 800], || {
        format!("starts {:?}", h.starts(&[4]))
    })
}

/// A lower-priority alert plays while the higher-priority one waits to
/// realert.
pub fn lower_plays_during_realert_wait() -> Result<(), String> {
    let mut h = Harness::new(vec![
        slot(1, "error", &["rat"], "pulse_matrix", 1, true, 2000, 100),
        slot(2, "idle", &["bingo"], "pulse_bottom", 1, true, 0, 100),
    ]);
    h.raise(EventType::Error, "rat");
    h.raise(EventType::Idle, "bingo");
    h.run_until(2100);
    let bottom = h.starts(&[10]);
    ensure(bottom.first() == Some(&100), || {
        format!("idle starts {bottom:?}")
    })?;
    ensure(bottom.iter().all(|t| *t < 2100), || {
        format!("idle played over error: {bottom:?}")
    })?;
    ensure(h.starts(MATRIX) == vec![0, 2100], || {
        format!("error starts {:?}", h.starts(MATRIX))
    })
}

/// Successive playbacks of a realerting event start total + delay apart.
pub fn realert_period() -> Result<(), String> {
    for (step, reps, delay) in [
        (100u64, 1u32, 500u64),
        (130, 2, 1234),
        (250, 3, 0),
        (10, 1, 7),
    ] {
        let mut h = Harness::new(vec![slot(
            1,
            "battery_low",
            &["rat"],
            "circular",
            reps,
            true,
            delay,
            step,
        )]);
        h.raise(EventType::BatteryLow, "rat");
        h.run_until(20_000);
        let total = step * 4 * u64::from(reps);
        let playbacks: Vec<u64> = h.plays.iter().map(|(t, _)| *t).collect();
        ensure(playbacks.len() >= 3, || {
            format!("step {step}: only {playbacks:?}")
        })?;
        for w in playbacks.windows(2) {
            let period = w[1] - w[0];
            let want = total + delay;
            ensure(period.abs_diff(want) <= TICK, || {
                format!("step {step} reps {reps} delay {delay}: period {period}, want {want}")
            })?;
        }
    }
    Ok(())
}

/// Without realert a pattern plays once per raised edge.
pub fn no_realert_once_per_edge() -> Result<(), String> {
    let mut h = Harness::new(vec![slot(
        1,
        "estop_enabled",
        &["rat"],
        "moving_diagonal",
        1,
        false,
        0,
        100,
    )]);
    h.raise(EventType::EstopEnabled, "rat");
    h.run_until(5000);
    ensure(h.starts(&[1]) == vec![0], || {
        format!("first edge starts {:?}", h.starts(&[1]))
    })?;
    h.clear(EventType::EstopEnabled, "rat");
    h.run_until(6000);
    h.raise(EventType::EstopEnabled, "rat");
    h.run_until(12_000);
    ensure(h.starts(&[1]) == vec![0, 6010], || {
        format!("starts {:?}", h.starts(&[1]))
    })
}

/// The same event on two robots forms two independent alerts.
pub fn per_robot_independence() -> Result<(), String> {
    let mut h = Harness::new(vec![
        slot(1, "error", &["rat"], "circular", 1, true, 1000, 100),
        slot(2, "error", &["bingo"], "moving_rows", 1, true, 1000, 100),
    ]);
    h.raise(EventType::Error, "rat");
    h.raise(EventType::Error, "bingo");
    h.run_until(3000);
    let rat = h.starts(&[4]);
    let bingo = h.starts(&[1, 2, 3]);
    ensure(rat == vec![0, 1400, 2800], || format!("rat {rat:?}"))?;
    ensure(bingo.first() == Some(&400), || format!("bingo {bingo:?}"))?;
    h.clear(EventType::Error, "rat");
    h.run_until(8000);
    let rat_after: Vec<u64> = h.starts(&[4]).into_iter().filter(|t| *t > 3000).collect();
    ensure(rat_after.is_empty(), || {
        format!("rat kept alerting {rat_after:?}")
    })?;
    let bingo_after = h
        .starts(&[1, 2, 3])
        .into_iter()
        .filter(|t| *t > 3000)
        .count();
    ensure(bingo_after >= 3, || "bingo stopped with rat".into())
}

pub type Rule = fn() -> Result<(), String>;

pub const ALL: &[(&str, Rule)] = &[
    (
        "higher-priority preemption within 1 tick",
        preemption_within_one_tick,
    ),
    ("same-slot non-preemption", same_slot_no_preemption),
    (
        "lower priority plays during realert wait",
        lower_plays_during_realert_wait,
    ),
    ("realert period = total + delay ± 1 tick", realert_period),
    (
        "do-not-realert plays once per raised edge",
        no_realert_once_per_edge,
    ),
    (
        "(error,rat) and (error,bingo) independent",
        per_robot_independence,
    ),
];
