use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use supervisor_core::bus::{Bus, RobotFilter, Subscription};
use supervisor_core::command::{Interpreter, Turn};
use supervisor_core::config::{load_or_default, ConfigFileError};
use supervisor_core::motor::MotorError;
use supervisor_core::runtime::RuntimeError;
use supervisor_core::scheduler::TICK_MS;
use supervisor_core::sim::{check_script_sorted, SimError};
use supervisor_core::{
    DetectorConfig, EventTransition, Fault, Fleet, MotorDriver, MotorFrame, RobotStatus,
    ScenarioEntry, SimConfig, Supervisor,
};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

/// Stream subscribers that fall further behind than this lose frames.
const STREAM_CAPACITY: usize = 1024;
/// Conversation turns kept per robot for prompt assembly.
pub(crate) const HISTORY_TURNS: usize = 20;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct GatewayOptions {
    /// Read at start (missing means the default configuration) and rewritten
    /// on every accepted put.
    pub config_path: PathBuf,
    pub robots: Vec<String>,
    pub sim: SimConfig,
    pub detector: DetectorConfig,
    pub interpreter: Interpreter,
    /// Disturbances applied to the embedded fleet on the gateway clock.
    pub scenario: Vec<ScenarioEntry>,
}

impl GatewayOptions {
    pub fn new(config_path: impl Into<PathBuf>) -> Self {
        GatewayOptions {
            config_path: config_path.into(),
            robots: vec!["rat".into(), "bingo".into()],
            sim: SimConfig::default(),
            detector: DetectorConfig::default(),
            interpreter: Interpreter::offline(),
            scenario: Vec::new(),
        }
    }
}

/// Motor driver that publishes frames to the frames stream.
pub(crate) struct StreamDriver {
    tx: broadcast::Sender<MotorFrame>,
}

impl MotorDriver for StreamDriver {
    fn apply_frame(&mut self, frame: &MotorFrame) -> Result<(), MotorError> {
        // no subscribers is not an error
        let _ = self.tx.send(*frame);
        Ok(())
    }
}

pub(crate) struct Core {
    pub fleet: Fleet,
    pub supervisor: Supervisor<StreamDriver>,
    status_rx: Subscription,
    scenario: Vec<ScenarioEntry>,
    scenario_pos: usize,
    /// Time of the next tick; everything before it has been processed.
    pub now_ms: u64,
}

pub(crate) struct Shared {
    core: Mutex<Core>,
    pub config_path: PathBuf,
    /// Held for the whole of a config put; a second put finds it taken.
    pub put_lock: Arc<tokio::sync::Mutex<()>>,
    pub interpreter: Interpreter,
    pub history: Mutex<HashMap<String, Vec<Turn>>>,
    pub events: broadcast::Sender<EventTransition>,
    pub frames: broadcast::Sender<MotorFrame>,
    pub robots: watch::Sender<Vec<RobotStatus>>,
    pub closing: watch::Sender<bool>,
    bus: Arc<Bus>,
    sim: SimConfig,
}

impl Shared {
    pub fn core(&self) -> MutexGuard<'_, Core> {
        self.core.lock().expect("gateway state poisoned")
    }

    /// One scheduler tick: fleet step when due, scenario, snapshots through
    /// the bus into the detector, then the scheduler.
    fn tick(&self) -> Result<(), RuntimeError> {
        let mut core = self.core();
        let core = &mut *core;
        let t = core.now_ms;
        if t > 0 && t.is_multiple_of(self.sim.dt_ms) {
            core.fleet.step_all(self.sim.dt_ms)?;
        }
        while let Some(entry) = core
            .scenario
            .get(core.scenario_pos)
            .filter(|e| e.at_ms <= t)
        {
            if let Err(e) = core.fleet.apply_entry(entry, t) {
                tracing::warn!("scenario entry at {} ms: {e}", entry.at_ms);
            }
            core.scenario_pos += 1;
        }
        if t.is_multiple_of(self.sim.snapshot_every_ms) {
            let snapshots = core.fleet.snapshots();
            for s in &snapshots {
                self.bus.publish(s)?;
            }
            self.robots.send_replace(snapshots);
        }
        while let Some(msg) = core.status_rx.try_next() {
            match msg {
                Ok(msg) => {
                    for tr in core.supervisor.ingest(&msg.payload, t) {
                        tracing::info!(event = %tr.key.event_type.as_str(), robot = %tr.key.robot_id, edge = ?tr.edge, "transition");
                        let _ = self.events.send(tr);
                    }
                }
                Err(e) => tracing::warn!("dropping status frame: {e}"),
            }
        }
        core.supervisor.tick(t)?;
        core.now_ms = t + TICK_MS;
        Ok(())
    }
}

pub struct Gateway {
    shared: Arc<Shared>,
    ticker: JoinHandle<()>,
}

impl Gateway {
    /// Loads the configuration, builds the fleet and starts the tick task.
    /// Must run inside a tokio runtime.
    pub fn start(options: GatewayOptions) -> Result<Gateway, GatewayError> {
        let config = load_or_default(&options.config_path)?;
        check_script_sorted(&options.scenario)?;
        let sim = options.sim.clone();
        if sim.dt_ms == 0
            || !sim.dt_ms.is_multiple_of(TICK_MS)
            || !sim.snapshot_every_ms.is_multiple_of(sim.dt_ms)
        {
            return Err(SimError::BadConfig(
                "dt_ms must be a multiple of the tick dividing snapshot_every_ms".into(),
            )
            .into());
        }
        let fleet = Fleet::new(options.robots.iter().map(String::as_str), sim.clone())?;
        let bus = Bus::new();
        let status_rx = bus.subscribe(RobotFilter::all());
        let (frames, _) = broadcast::channel(STREAM_CAPACITY);
        let (events, _) = broadcast::channel(STREAM_CAPACITY);
        let supervisor = Supervisor::new(
            config,
            options.detector,
            StreamDriver { tx: frames.clone() },
        );
        let shared = Arc::new(Shared {
            robots: watch::Sender::new(fleet.snapshots()),
            core: Mutex::new(Core {
                fleet,
                supervisor,
                status_rx,
                scenario: options.scenario.clone(),
                scenario_pos: 0,
                now_ms: 0,
            }),
            config_path: options.config_path.clone(),
            put_lock: Arc::new(tokio::sync::Mutex::new(())),
            interpreter: options.interpreter.clone(),
            history: Mutex::new(HashMap::new()),
            events,
            frames,
            closing: watch::Sender::new(false),
            bus,
            sim,
        });
        let ticker = tokio::spawn(tick_loop(Arc::clone(&shared)));
        Ok(Gateway { shared, ticker })
    }

    pub fn router(&self) -> axum::Router {
        crate::api::router(Arc::clone(&self.shared))
    }

    /// Bus carrying every published snapshot; serve it to share the fleet.
    pub fn bus(&self) -> Arc<Bus> {
        Arc::clone(&self.shared.bus)
    }

    /// Logical time of the next tick.
    pub fn now_ms(&self) -> u64 {
        self.shared.core().now_ms
    }

    pub fn inject_fault(&self, robot_id: &str, fault: &Fault) -> Result<(), SimError> {
        self.shared.core().fleet.inject_fault(robot_id, fault)
    }

    pub fn snapshot(&self, robot_id: &str) -> Result<RobotStatus, SimError> {
        self.shared.core().fleet.snapshot(robot_id)
    }

    /// Serves HTTP on `listener` until `signal` resolves, then ends open
    /// streams and turns the motors off.
    pub async fn serve<F>(
        self,
        listener: TcpListener,
        signal: F,
    ) -> Result<MotorFrame, GatewayError>
    where
        F: Future<Output = ()> + Send + 'static,
    {
        let shared = Arc::clone(&self.shared);
        axum::serve(listener, self.router())
            .with_graceful_shutdown(async move {
                signal.await;
                shared.closing.send_replace(true);
            })
            .await?;
        Ok(self.shutdown())
    }

    /// Stops the tick task and sends a final all-off frame.
    pub fn shutdown(self) -> MotorFrame {
        self.ticker.abort();
        self.shared.closing.send_replace(true);
        let mut core = self.shared.core();
        let now = core.now_ms;
        core.supervisor
            .shutdown(now)
            .expect("stream driver cannot fail")
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.ticker.abort();
    }
}

async fn tick_loop(shared: Arc<Shared>) {
    let mut interval = tokio::time::interval(Duration::from_millis(TICK_MS));
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        interval.tick().await;
        if let Err(e) = shared.tick() {
            tracing::error!("tick failed: {e}");
        }
    }
}
