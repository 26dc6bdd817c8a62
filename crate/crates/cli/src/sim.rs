use std::io::BufRead;
use std::path::Path;
use std::time::Duration;

use anyhow::Context;
use supervisor_core::bus::{serve, Bus};
use supervisor_core::sim::{check_script_sorted, ScenarioRunner};
use supervisor_core::{Fleet, ScenarioEntry, SimConfig};
use tokio::time::MissedTickBehavior;

use crate::args::SimArgs;
use crate::BadInput;

/// Reads an NDJSON scenario; blank lines and `#` comments are skipped.
pub fn load_scenario(path: &Path) -> anyhow::Result<Vec<ScenarioEntry>> {
    let read = || -> anyhow::Result<Vec<ScenarioEntry>> {
        let file =
            std::fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut script = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            script.push(
                serde_json::from_str(line)
                    .with_context(|| format!("{}:{}", path.display(), i + 1))?,
            );
        }
        check_script_sorted(&script)?;
        Ok(script)
    };
    read().map_err(|e| BadInput(e).into())
}

pub async fn run(args: SimArgs) -> anyhow::Result<()> {
    let script = match &args.scenario {
        Some(path) => load_scenario(path)?,
        None => Vec::new(),
    };
    let sim = SimConfig::default();
    let mut fleet = Fleet::new(args.robots.iter().map(String::as_str), sim.clone())
        .map_err(|e| BadInput(e.into()))?;
    let bus = Bus::new();
    let server = serve(bus.clone(), args.publish.as_str())
        .await
        .with_context(|| format!("binding {}", args.publish))?;
    println!("publishing status on {}", server.local_addr);

    let mut runner = ScenarioRunner::new(&script);
    let mut interval = tokio::time::interval(Duration::from_millis(sim.dt_ms));
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut t = 0;
    let ctrl_c = tokio::signal::ctrl_c();
    tokio::pin!(ctrl_c);
    loop {
        tokio::select! {
            _ = &mut ctrl_c => break,
            _ = interval.tick() => {}
        }
        if t > 0 {
            fleet.step_all(sim.dt_ms)?;
        }
        runner.apply_due(&mut fleet, t)?;
        if t % sim.snapshot_every_ms == 0 {
            for status in fleet.snapshots() {
                bus.publish(&status)?;
            }
        }
        if args.duration_ms.is_some_and(|d| t >= d) {
            break;
        }
        t += sim.dt_ms;
    }
    tracing::info!(t_ms = t, "simulator stopped");
    Ok(())
}
