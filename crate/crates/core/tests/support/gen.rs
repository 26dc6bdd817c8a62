//! Seeded random configurations, event traces and status streams.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supervisor_core::pattern::PREDEFINED_NAMES;
use supervisor_core::status::{Position, SensorReading};
use supervisor_core::{
    validate_config, EventConfig, EventType, PatternRef, PlaybackParams, RobotStatus,
    SchedulerConfig,
};

use super::scheduler_oracle::{Key, TraceEvent, TICK};

pub const ROBOTS: [&str; 4] = ["rat", "bingo", "otter", "wren"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn motor_group(rng: &mut ChaCha8Rng) -> BTreeSet<u8> {
    let n = rng.random_range(1..=4);
    (0..n).map(|_| rng.random_range(1..=10)).collect()
}

pub fn pattern(rng: &mut ChaCha8Rng) -> PatternRef {
    match rng.random_range(0..10) {
        0..=5 => PatternRef::Predefined(PREDEFINED_NAMES.choose(rng).unwrap().to_string()),
        6 | 7 => PatternRef::Static(motor_group(rng)),
        _ => PatternRef::Dynamic(
            (0..rng.random_range(1..=5))
                .map(|_| motor_group(rng))
                .collect(),
        ),
    }
}

pub fn params(rng: &mut ChaCha8Rng) -> PlaybackParams {
    PlaybackParams {
        reps: rng.random_range(1..=3),
        realert: rng.random_bool(0.7),
        realert_delay_ms: match rng.random_range(0..4) {
            0 => 0,
            1 => rng.random_range(0..100) * TICK,
            _ => rng.random_range(0..3000),
        },
        step_ms: match rng.random_range(0..3) {
            0 => rng.random_range(1..30) * TICK,
            _ => rng.random_range(10..=300),
        },
        intensity_pct: rng.random_range(1..=100),
    }
}

/// A valid configuration over `robots` with 1..=4 slots.
pub fn config(rng: &mut ChaCha8Rng, robots: &[&str]) -> SchedulerConfig {
    loop {
        let slots = rng.random_range(1..=4u8);
        let events = (1..=slots)
            .map(|slot| {
                let mut pool: Vec<&str> = robots.to_vec();
                pool.shuffle(rng);
                let n = rng.random_range(1..=pool.len());
                EventConfig {
                    slot,
                    event_type: *EventType::ALL.choose(rng).unwrap(),
                    robots: pool[..n].iter().map(|r| r.to_string()).collect(),
                    pattern: pattern(rng),
                    params: params(rng),
                }
            })
            .collect();
        let cfg = SchedulerConfig {
            tick_ms: TICK,
            events,
        };
        if validate_config(&cfg).is_ok() {
            return cfg;
        }
    }
}

/// One random scheduler trace.
#[derive(Debug, Clone)]
pub struct SchedulerTrace {
    pub config: SchedulerConfig,
    /// Sorted by time; every key alternates raise and clear.
    pub events: Vec<(u64, TraceEvent)>,
    pub end_ms: u64,
}

pub fn scheduler_trace(seed: u64) -> SchedulerTrace {
    let mut rng = rng(seed);
    let robot_count = rng.random_range(1..=4);
    let robots = &ROBOTS[..robot_count];
    let config = config(&mut rng, robots);
    let end_ms = rng.random_range(1..=6000) * TICK;
    let mut events = Vec::new();
    for event_type in EventType::ALL {
        for robot in robots {
            let key: Key = (event_type, robot.to_string());
            // mean dwell between toggles, in ticks
            let dwell = *[5u64, 50, 300, 1500].choose(&mut rng).unwrap();
            let mut t = rng.random_range(0..=dwell) * TICK;
            let mut up = false;
            while t <= end_ms {
                up = !up;
                events.push((
                    t,
                    if up {
                        TraceEvent::Raise(key.clone())
                    } else {
                        TraceEvent::Clear(key.clone())
                    },
                ));
                t += rng.random_range(1..=2 * dwell) * TICK;
            }
        }
    }
    let swaps = match rng.random_range(0..10) {
        0..=6 => 0,
        7 | 8 => 1,
        _ => 3,
    };
    for _ in 0..swaps {
        let at = rng.random_range(0..=end_ms / TICK) * TICK;
        events.push((at, TraceEvent::Swap(self::config(&mut rng, robots))));
    }
    // stable sort keeps each key's own events in order
    events.sort_by_key(|(t, _)| *t);
    SchedulerTrace {
        config,
        events,
        end_ms,
    }
}

/// Random status snapshot for `robot` at `t`, with predicates that flip
/// often enough to exercise every event type.
pub fn status(rng: &mut ChaCha8Rng, robot: &str, t: u64) -> RobotStatus {
    let mut s = RobotStatus::new(robot);
    s.timestamp_ms = t;
    s.battery_pct = match rng.random_range(0..4) {
        0 => 20.0,
        1 => rng.random_range(0.0..20.0),
        _ => rng.random_range(0.0..=100.0),
    };
    s.estop_enabled = rng.random_bool(0.3);
    s.errors = (0..rng.random_range(0..3))
        .map(|i| format!("E{}", rng.random_range(0..100) + i))
        .collect();
    s.idle = rng.random_bool(0.4);
    if !s.idle && rng.random_bool(0.5) {
        s.current_task = Some(
            ["patrol", "inspect valve", "return"]
                .choose(rng)
                .unwrap()
                .to_string(),
        );
    }
    s.position = Position::new(
        rng.random_range(-500.0..500.0),
        rng.random_range(-500.0..500.0),
    );
    s.heading_deg = rng.random_range(0.0..360.0);
    s.lights_on = rng.random_bool(0.5);
    s.sitting = rng.random_bool(0.2);
    s.sensors.clear();
    for name in ["gas_ppm", "temperature", "signal_strength"] {
        if rng.random_bool(0.7) {
            s.sensors.insert(
                name.to_string(),
                SensorReading {
                    value: rng.random_range(-100.0..100.0),
                    unit: "u".to_string(),
                },
            );
        }
    }
    s
}

/// Interleaved per-robot status stream with occasional stale (out of order)
/// snapshots. Predicates persist for a few snapshots at a time.
pub fn status_trace(seed: u64, len: usize) -> Vec<RobotStatus> {
    let mut rng = rng(seed);
    let robots = &ROBOTS[..rng.random_range(1..=4)];
    let mut clocks = vec![0u64; robots.len()];
    let mut last: Vec<Option<RobotStatus>> = vec![None; robots.len()];
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let i = rng.random_range(0..robots.len());
        let stale = clocks[i] > 0 && rng.random_bool(0.05);
        let t = if stale {
            clocks[i] - rng.random_range(1..=clocks[i].min(300))
        } else {
            clocks[i] += rng.random_range(0..=3) * 50;
            clocks[i]
        };
        let s = match &last[i] {
            Some(prev) if rng.random_bool(0.6) => {
                let mut s = prev.clone();
                s.timestamp_ms = t;
                s
            }
            _ => status(&mut rng, robots[i], t),
        };
        if !stale {
            last[i] = Some(s.clone());
        }
        out.push(s);
    }
    out
}
