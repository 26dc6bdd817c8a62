use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use supervisor_core::config::DEFAULT_CONFIG_PATH;

#[derive(Debug, Parser)]
#[command(
    name = "supervisor",
    version,
    about = "Robot supervision: simulator, haptic alerts, gateway and chat"
)]
pub struct Cli {
    /// More log output on stderr (repeat for more). A level name in
    /// RUST_LOG (error, warn, info, debug, trace) takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn log_level(&self) -> tracing::Level {
        if let Some(level) = std::env::var("RUST_LOG")
            .ok()
            .and_then(|v| v.trim().parse().ok())
        {
            return level;
        }
        match self.verbose {
            0 => tracing::Level::WARN,
            1 => tracing::Level::INFO,
            _ => tracing::Level::DEBUG,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the fleet simulator and publish status snapshots.
    Sim(SimArgs),
    /// Run the haptic alert daemon against a status publisher.
    Haptic(HapticArgs),
    /// Serve the HTTP API with an embedded fleet and alert pipeline.
    Gateway(GatewayArgs),
    /// Type commands to a robot and read its replies.
    Chat(ChatArgs),
    /// Re-render a recorded motor frame log.
    Replay(ReplayArgs),
}

fn robot_list() -> Vec<String> {
    vec!["rat".into(), "bingo".into()]
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// NDJSON scenario script: one {"at_ms","robot","action"} entry per line.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Address the status server binds.
    #[arg(long, default_value = "127.0.0.1:7501")]
    pub publish: String,
    #[arg(long, value_delimiter = ',', default_values_t = robot_list())]
    pub robots: Vec<String>,
    /// Stop after this much simulated time instead of waiting for Ctrl-C.
    #[arg(long)]
    pub duration_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct HapticArgs {
    #[arg(long, default_value = DEFAULT_CONFIG_PATH)]
    pub config: PathBuf,
    /// Status publisher to subscribe to.
    #[arg(long, default_value = "127.0.0.1:7501")]
    pub subscribe: String,
    /// Only these robots (comma separated); default all.
    #[arg(long, value_delimiter = ',')]
    pub robots: Vec<String>,
    /// Draw every motor frame in the terminal.
    #[arg(long)]
    pub visualize: bool,
    /// Write the frame log as NDJSON on shutdown.
    #[arg(long)]
    pub frames_out: Option<PathBuf>,
    /// Snapshots a changed predicate must persist beyond the first.
    #[arg(long, default_value_t = 0)]
    pub debounce: u32,
    #[arg(long, default_value_t = supervisor_core::events::DEFAULT_BATTERY_LOW_PCT)]
    pub battery_low_pct: f64,
}

#[derive(Debug, Args)]
pub struct GatewayArgs {
    #[arg(long, default_value = DEFAULT_CONFIG_PATH)]
    pub config: PathBuf,
    #[arg(long, default_value = "0.0.0.0:7500")]
    pub listen: String,
    #[arg(long, value_delimiter = ',', default_values_t = robot_list())]
    pub robots: Vec<String>,
    /// Scenario script applied to the embedded fleet.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Also serve the embedded fleet's status bus on this address.
    #[arg(long)]
    pub publish: Option<String>,
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[arg(long, default_value = "rat")]
    pub robot: String,
    /// Send utterances to a running gateway instead of a local robot.
    #[arg(long)]
    pub gateway: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// NDJSON frame log.
    #[arg(long)]
    pub frames: PathBuf,
    /// Print every frame immediately instead of at its recorded time.
    #[arg(long)]
    pub instant: bool,
    /// Playback speed multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
}
