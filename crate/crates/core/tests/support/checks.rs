//! Pattern, scenario and configuration checks shared by the per-topic
//! suites and the acceptance target.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};
use supervisor_core::pattern::PREDEFINED_NAMES;
use supervisor_core::sim::ScenarioAction;
use supervisor_core::{
    expand, predefined, run_supervised_scenario, validate_config, DetectorConfig, Direction, Edge,
    EventTransition, EventType, Fault, Intent, PatternRef, PlaybackParams, ScenarioEntry,
    SchedulerConfig, SimConfig, SimulatedBackend, Supervisor,
};

use super::gen::{self, rng, ROBOTS};

const GOLDEN_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/patterns");

fn render_ids(active: supervisor_core::MotorSet) -> String {
    let ids: Vec<String> = active.ids().map(|i| i.to_string()).collect();
    if ids.is_empty() {
        "-".into()
    } else {
        ids.join(",")
    }
}

/// Every predefined pattern expands to its golden frame file, and the seven
/// schedules are pairwise distinct.
pub fn patterns_golden() -> Result<(), String> {
    let params = PlaybackParams {
        reps: 2,
        step_ms: 100,
        ..PlaybackParams::default()
    };
    let mut seen = BTreeMap::new();
    for name in PREDEFINED_NAMES {
        let path = format!("{GOLDEN_DIR}/{name}.txt");
        let golden = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
        let schedule = expand(&predefined(name).map_err(|e| e.to_string())?, &params)
            .map_err(|e| e.to_string())?;
        let mut got = format!(
            "# reps={} step_ms={} total_ms={}\n",
            params.reps, params.step_ms, schedule.total_ms
        );
        for f in &schedule.frames {
            got.push_str(&format!("{} {}\n", f.offset_ms, render_ids(f.active)));
        }
        if got != golden {
            return Err(format!("{name}: expected\n{golden}got\n{got}"));
        }
        if let Some(other) = seen.insert(got, name) {
            return Err(format!("{name} and {other} expand identically"));
        }
    }
    Ok(())
}

/// Scenario from the acceptance list: rat raises an error at 5 s, bingo
/// becomes idle at 8 s.
pub struct Scenario {
    pub frames: Vec<(u64, String)>,
    pub transitions: Vec<EventTransition>,
}

pub fn scenario_config() -> SchedulerConfig {
    serde_json::from_value(json!({
        "tick_ms": 10,
        "events": [
            {"slot": 1, "event_type": "error", "robots": ["rat"],
             "pattern": {"predefined": "pulse_matrix"},
             "reps": 2, "realert": true, "realert_delay_ms": 1000, "step_ms": 200, "intensity_pct": 100},
            {"slot": 2, "event_type": "idle", "robots": ["bingo"],
             "pattern": {"predefined": "pulse_bottom"},
             "reps": 1, "realert": true, "realert_delay_ms": 500, "step_ms": 300, "intensity_pct": 60}
        ]
    }))
    .expect("scenario config parses")
}

pub fn run_scenario_rat_bingo(duration_ms: u64) -> Result<Scenario, String> {
    let script = vec![
        // bingo walks for 3 s, so it turns idle 5 s after stopping
        ScenarioEntry {
            at_ms: 0,
            robot: "bingo".into(),
            action: ScenarioAction::Command(Intent::Move {
                distance_m: 3.0,
                direction: Direction::Forward,
            }),
        },
        ScenarioEntry {
            at_ms: 5000,
            robot: "rat".into(),
            action: ScenarioAction::Fault(Fault::RaiseError("E_TRACTION".into())),
        },
    ];
    let config = validate_config(&scenario_config()).map_err(|e| e.to_string())?;
    let outcome = run_supervised_scenario(
        &["rat", "bingo"],
        &script,
        &SimConfig::default(),
        config,
        DetectorConfig::default(),
        duration_ms,
    )
    .map_err(|e| e.to_string())?;
    Ok(Scenario {
        frames: outcome
            .frames
            .frames
            .iter()
            .map(|f| (f.at_ms, render_ids(f.active)))
            .collect(),
        transitions: outcome.transitions,
    })
}

/// Expected coalesced frame log, worked out by hand from the priority and
/// realert rules: error (slot 1) pulses the matrix 200 on / 200 off / 200 on
/// and realerts 1000 ms after each playback ends; idle (slot 2) pulses the
/// bottom motor for 300 ms and realerts after 500 ms, yielding to the error
/// pattern whenever it becomes ready.
pub const SCENARIO_FRAMES: &[(u64, &str)] = &[
    (0, "-"),
    (5000, "M"),
    (5200, "-"),
    (5400, "M"),
    (5600, "-"),
    (6600, "M"),
    (6800, "-"),
    (7000, "M"),
    (7200, "-"),
    (8000, "B"),
    (8200, "M"),
    (8400, "-"),
    (8600, "M"),
    (8800, "B"),
    (9100, "-"),
    (9600, "B"),
    (9800, "M"),
    (10000, "-"),
    (10200, "M"),
    (10400, "B"),
    (10700, "-"),
    (11200, "B"),
    (11400, "M"),
    (11600, "-"),
    (11800, "M"),
    (12000, "B"),
    (12300, "-"),
    (12800, "B"),
    (13000, "M"),
    (13200, "-"),
    (13400, "M"),
    (13600, "B"),
    (13900, "-"),
    (14400, "B"),
    (14600, "M"),
    (14800, "-"),
    (15000, "M"),
];

pub fn scenario_check() -> Result<String, String> {
    let run = run_scenario_rat_bingo(15_000)?;
    let raised = |ty: EventType, robot: &str| {
        run.transitions
            .iter()
            .find(|t| t.key.event_type == ty && t.key.robot_id == robot && t.edge == Edge::Raised)
            .map(|t| t.at_ms)
    };
    let error_at = raised(EventType::Error, "rat").ok_or("error on rat never raised")?;
    let idle_at = raised(EventType::Idle, "bingo").ok_or("idle on bingo never raised")?;
    if error_at != 5000 || idle_at != 8000 {
        return Err(format!("events raised at error={error_at} idle={idle_at}"));
    }
    let first_error_frame = run
        .frames
        .iter()
        .find(|(t, ids)| *t >= error_at && ids == "1,2,3,4,5,6,7,8,9")
        .map(|(t, _)| *t)
        .ok_or("no error frame")?;
    let latency = first_error_frame - error_at;
    if latency > 200 {
        return Err(format!(
            "first error frame {latency} ms after the triggering snapshot"
        ));
    }
    let expected: Vec<(u64, String)> = SCENARIO_FRAMES
        .iter()
        .map(|(t, s)| {
            let ids = match *s {
                "M" => "1,2,3,4,5,6,7,8,9",
                "B" => "10",
                _ => "-",
            };
            (*t, ids.to_string())
        })
        .collect();
    if run.frames != expected {
        let i = (0..expected.len().max(run.frames.len()))
            .find(|&i| run.frames.get(i) != expected.get(i))
            .unwrap_or(0);
        return Err(format!(
            "frame {i}: expected {:?}, got {:?}",
            expected.get(i),
            run.frames.get(i)
        ));
    }
    Ok(format!(
        "first error frame +{latency} ms, {} frames",
        run.frames.len()
    ))
}

/// Validity rules restated independently of the library.
pub fn independently_valid(cfg: &SchedulerConfig) -> bool {
    let n = cfg.events.len();
    if cfg.tick_ms != 10 || n == 0 || n > 4 {
        return false;
    }
    let slots: BTreeSet<u8> = cfg.events.iter().map(|e| e.slot).collect();
    if slots.len() != n || slots != (1..=n as u8).collect() {
        return false;
    }
    let mut mapped = BTreeSet::new();
    for ev in &cfg.events {
        if ev.robots.is_empty()
            || ev.robots.len() > 4
            || ev.robots.iter().any(|r| r.trim().is_empty())
        {
            return false;
        }
        for r in &ev.robots {
            if !mapped.insert((ev.event_type, r.clone())) {
                return false;
            }
        }
        let p = &ev.params;
        if p.reps == 0 || p.step_ms < 10 || p.intensity_pct == 0 || p.intensity_pct > 100 {
            return false;
        }
        let ok_group = |g: &BTreeSet<u8>| !g.is_empty() && g.iter().all(|id| (1..=10).contains(id));
        let pattern_ok = match &ev.pattern {
            PatternRef::Predefined(name) => PREDEFINED_NAMES.contains(&name.as_str()),
            PatternRef::Static(g) => ok_group(g),
            PatternRef::Dynamic(gs) => !gs.is_empty() && gs.iter().all(ok_group),
        };
        if !pattern_ok {
            return false;
        }
    }
    true
}

fn mutate_config(rng: &mut rand_chacha::ChaCha8Rng, mut v: Value) -> Value {
    let events = v["events"].as_array_mut().unwrap();
    for _ in 0..rng.random_range(1..=3) {
        if events.is_empty() {
            break;
        }
        let i = rng.random_range(0..events.len());
        match rng.random_range(0..12) {
            0 => events[i]["robots"] = json!([]),
            1 => {
                let dup = events[i].clone();
                events.push(dup);
            }
            2 => events[i]["slot"] = json!(rng.random_range(0..7)),
            3 => events[i]["pattern"] = json!({"static": []}),
            4 => events[i]["pattern"] = json!({"dynamic": [[1], [rng.random_range(0..15)]]}),
            5 => events[i]["pattern"] = json!({"predefined": "zigzag"}),
            6 => events[i]["step_ms"] = json!(rng.random_range(0..15)),
            7 => events[i]["intensity_pct"] = json!(rng.random_range(0..=101)),
            8 => events[i]["reps"] = json!(rng.random_range(0..2)),
            9 => {
                events.remove(i);
            }
            10 => {
                events[i]["robots"] =
                    json!(ROBOTS.iter().chain(["kite"].iter()).collect::<Vec<_>>())
            }
            _ => {
                let robot = events[i]["robots"][0].clone();
                let ty = events[i]["event_type"].clone();
                let j = rng.random_range(0..events.len());
                events[j]["event_type"] = ty;
                events[j]["robots"].as_array_mut().unwrap().push(robot);
            }
        }
    }
    if rng.random_bool(0.05) {
        v["tick_ms"] = json!(*[0, 5, 20].choose(rng).unwrap());
    }
    v
}

/// The two stated rules give the right codes, and `count` fuzzed puts never
/// leave an invalid configuration active. Returns (accepted, rejected).
pub fn config_validation(count: u64) -> Result<(usize, usize), String> {
    let base = gen::config(&mut rng(1), &ROBOTS);
    let mut no_robots = base.clone();
    no_robots.events[0].robots.clear();
    match validate_config(&no_robots) {
        Err(e) if e.code() == "NoRobots" => {}
        other => return Err(format!("empty robot set gave {:?}", other.map(|_| ()))),
    }
    let mut dup = scenario_config();
    dup.events[1].event_type = EventType::Error;
    dup.events[1].robots.insert("rat".into());
    match validate_config(&dup) {
        Err(e) if e.code() == "DuplicateEventMapping" => {}
        other => return Err(format!("duplicate mapping gave {:?}", other.map(|_| ()))),
    }

    let mut rng = rng(0xc0f1);
    let initial = validate_config(&scenario_config()).unwrap();
    let mut sup = Supervisor::new(initial, DetectorConfig::default(), SimulatedBackend::new());
    let (mut accepted, mut rejected) = (0, 0);
    let mut t = 0;
    for i in 0..count {
        let candidate = gen::config(&mut rng, &ROBOTS);
        let body = if rng.random_bool(0.7) {
            mutate_config(&mut rng, serde_json::to_value(&candidate).unwrap())
        } else {
            serde_json::to_value(&candidate).unwrap()
        };
        let parsed: Result<SchedulerConfig, _> = serde_json::from_value(body);
        match parsed.map_err(|e| e.to_string()).and_then(|c| {
            validate_config(&c)
                .map_err(|e| e.to_string())
                .map(|v| (c, v))
        }) {
            Ok((c, valid)) => {
                if !independently_valid(&c) {
                    return Err(format!("put {i}: library accepted an invalid config {c:?}"));
                }
                sup.replace_config(valid);
                accepted += 1;
            }
            Err(_) => rejected += 1,
        }
        // keep alerts flowing so swaps interact with playback
        for robot in ROBOTS {
            let s = gen::status(&mut rng, robot, t);
            sup.ingest(&s, t);
        }
        for _ in 0..rng.random_range(1..30) {
            sup.tick(t).map_err(|e| e.to_string())?;
            t += 10;
        }
        let active = sup.scheduler().config().config();
        if !independently_valid(active) {
            return Err(format!("put {i}: invalid config became active"));
        }
        if let Some(occ) = sup.scheduler().playing() {
            if sup.scheduler().config().slot_for(&occ.key).is_none() {
                return Err(format!("put {i}: playing an unmapped occurrence"));
            }
        }
    }
    Ok((accepted, rejected))
}
