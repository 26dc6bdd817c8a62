//! `supervisor`: fleet simulator, haptic daemon, gateway, chat REPL and
//! frame-log replay in one binary.
//!
//! Exit codes: 0 clean shutdown, 1 runtime failure, 2 configuration error,
//! 64 usage error.

mod args;
mod chat;
mod haptic;
mod replay;
mod sim;

use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use supervisor_core::config::ConfigFileError;
use supervisor_gateway::{Gateway, GatewayError, GatewayOptions};

use args::{Cli, Command, GatewayArgs};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// A configuration or scenario file that cannot be used.
#[derive(Debug)]
pub struct BadInput(pub anyhow::Error);

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for BadInput {}

impl From<ConfigFileError> for BadInput {
    fn from(e: ConfigFileError) -> Self {
        BadInput(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(cli.log_level())
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    match runtime.block_on(dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<BadInput>().is_some() => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

async fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sim(a) => sim::run(a).await,
        Command::Haptic(a) => haptic::run(a).await,
        Command::Gateway(a) => gateway(a).await,
        Command::Chat(a) => chat::run(a).await,
        Command::Replay(a) => replay::run(a).await,
    }
}

async fn gateway(args: GatewayArgs) -> anyhow::Result<()> {
    let mut options = GatewayOptions::new(&args.config);
    options.robots = args.robots.clone();
    if let Some(path) = &args.scenario {
        options.scenario = sim::load_scenario(path)?;
    }
    options.interpreter =
        supervisor_core::command::Interpreter::from_env().context("model client settings")?;
    let gateway = match Gateway::start(options) {
        Ok(g) => g,
        Err(GatewayError::Config(e)) => return Err(BadInput::from(e).into()),
        Err(e) => return Err(e.into()),
    };
    let _bus_server = match args.publish {
        Some(addr) => {
            let server = supervisor_core::bus::serve(gateway.bus(), addr.as_str())
                .await
                .with_context(|| format!("publishing status on {addr}"))?;
            tracing::info!("status bus on {}", server.local_addr);
            Some(server)
        }
        None => None,
    };
    let listener = tokio::net::TcpListener::bind(&args.listen)
        .await
        .with_context(|| format!("binding {}", args.listen))?;
    println!("gateway listening on http://{}", listener.local_addr()?);
    let last = gateway
        .serve(listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    tracing::info!("shut down; final frame {:?}", last.active);
    Ok(())
}
