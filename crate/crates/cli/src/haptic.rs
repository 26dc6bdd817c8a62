use std::fs::File;
use std::io::BufWriter;
use std::time::Duration;

use anyhow::Context;
use supervisor_core::bus::{connect_subscriber, RobotFilter};
use supervisor_core::config::load_config;
use supervisor_core::scheduler::TICK_MS;
use supervisor_core::{DetectorConfig, Edge, RobotStatus, SimulatedBackend, Supervisor};
use tokio::sync::mpsc;
use tokio::time::MissedTickBehavior;

use crate::args::HapticArgs;
use crate::BadInput;

/// Bus reader, detector, scheduler and backend. The supervisor lives on the
/// tick task alone; the reader only forwards snapshots.
pub async fn run(args: HapticArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config).map_err(BadInput::from)?;
    let detector = DetectorConfig {
        battery_low_pct: args.battery_low_pct,
        debounce: args.debounce,
    };
    let mut backend = SimulatedBackend::new();
    if args.visualize {
        backend = backend.with_visualizer(Box::new(std::io::stdout()));
    }
    let mut supervisor = Supervisor::new(config, detector, backend);

    let filter = if args.robots.is_empty() {
        RobotFilter::all()
    } else {
        RobotFilter::only(args.robots.iter().map(String::as_str))
    };
    let mut sub = connect_subscriber(args.subscribe.as_str(), filter)
        .await
        .with_context(|| format!("subscribing to {}", args.subscribe))?;
    println!("subscribed to {}", args.subscribe);

    let (tx, mut rx) = mpsc::unbounded_channel::<RobotStatus>();
    let reader = tokio::spawn(async move {
        while let Some(msg) = sub.next().await {
            match msg {
                Ok(msg) => {
                    if tx.send(msg.payload).is_err() {
                        break;
                    }
                }
                Err(e) => tracing::warn!("dropping status frame: {e}"),
            }
        }
    });

    let mut interval = tokio::time::interval(Duration::from_millis(TICK_MS));
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let ctrl_c = tokio::signal::ctrl_c();
    tokio::pin!(ctrl_c);
    let mut now = 0;
    let result = loop {
        tokio::select! {
            _ = &mut ctrl_c => break Ok(()),
            _ = interval.tick() => {}
        }
        let mut ended = false;
        loop {
            match rx.try_recv() {
                Ok(status) => {
                    for tr in supervisor.ingest(&status, now) {
                        let edge = if tr.edge == Edge::Raised {
                            "raised"
                        } else {
                            "cleared"
                        };
                        println!("t={now} ms {edge} {}", tr.key);
                    }
                }
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => {
                    ended = true;
                    break;
                }
            }
        }
        if let Err(e) = supervisor.tick(now) {
            break Err(anyhow::Error::from(e));
        }
        if ended {
            println!("status stream ended");
            break Ok(());
        }
        now += TICK_MS;
    };
    reader.abort();
    supervisor.shutdown(now + TICK_MS)?;
    if let Some(path) = &args.frames_out {
        let file =
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        supervisor
            .driver()
            .log()
            .write_ndjson(BufWriter::new(file))?;
    }
    result
}
