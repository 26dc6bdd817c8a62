use std::io::{BufRead, IsTerminal, Write};
use std::time::Instant;

use anyhow::{bail, Context};
use serde_json::{json, Value};
use supervisor_core::command::{Interpreter, Role, Turn};
use supervisor_core::{CommandResult, Fleet, SimConfig};

use crate::args::ChatArgs;

const HISTORY_TURNS: usize = 20;

/// One exchange as shown to the user.
struct Exchange {
    speech: String,
    result: Option<CommandResult>,
}

trait Robot {
    async fn say(&mut self, utterance: &str) -> anyhow::Result<Exchange>;
}

/// A simulated robot in this process; its clock follows wall time between
/// utterances.
struct LocalRobot {
    id: String,
    fleet: Fleet,
    interpreter: Interpreter,
    history: Vec<Turn>,
    started: Instant,
    sim_ms: u64,
}

impl LocalRobot {
    fn new(id: &str) -> anyhow::Result<Self> {
        Ok(LocalRobot {
            id: id.into(),
            fleet: Fleet::new([id], SimConfig::default())?,
            interpreter: Interpreter::from_env().context("model client settings")?,
            history: Vec::new(),
            started: Instant::now(),
            sim_ms: 0,
        })
    }

    fn catch_up(&mut self) -> anyhow::Result<()> {
        let dt = self.fleet.config().dt_ms;
        let target = self.started.elapsed().as_millis() as u64;
        while self.sim_ms + dt <= target {
            self.fleet.step_all(dt)?;
            self.sim_ms += dt;
        }
        Ok(())
    }
}

impl Robot for LocalRobot {
    async fn say(&mut self, utterance: &str) -> anyhow::Result<Exchange> {
        self.catch_up()?;
        let snapshot = self.fleet.snapshot(&self.id)?;
        let out = self
            .interpreter
            .interpret(utterance, &snapshot, &self.history)
            .await;
        let result = match out.reply.intent() {
            Some(intent) if !intent.is_query() => {
                Some(self.fleet.apply_command(&self.id, intent, self.sim_ms)?)
            }
            _ => None,
        };
        self.history.push(Turn {
            role: Role::User,
            text: utterance.into(),
        });
        self.history.push(Turn {
            role: Role::Assistant,
            text: out.reply.speech.clone(),
        });
        let excess = self.history.len().saturating_sub(HISTORY_TURNS);
        self.history.drain(..excess);
        Ok(Exchange {
            speech: out.reply.speech,
            result,
        })
    }
}

/// A robot behind a running gateway.
struct RemoteRobot {
    id: String,
    url: String,
    client: reqwest::Client,
}

impl Robot for RemoteRobot {
    async fn say(&mut self, utterance: &str) -> anyhow::Result<Exchange> {
        let r = self
            .client
            .post(&self.url)
            .json(&json!({ "robot_id": self.id, "utterance": utterance }))
            .send()
            .await
            .with_context(|| format!("posting to {}", self.url))?;
        let status = r.status();
        let body: Value = r.json().await.context("gateway reply is not JSON")?;
        if !status.is_success() {
            bail!(
                "gateway: {} {}",
                body["code"].as_str().unwrap_or("?"),
                body["message"].as_str().unwrap_or("")
            );
        }
        Ok(Exchange {
            speech: body["reply"]["speech"]
                .as_str()
                .unwrap_or_default()
                .to_string(),
            result: match body.get("result") {
                Some(v) => {
                    Some(serde_json::from_value(v.clone()).context("malformed command result")?)
                }
                None => None,
            },
        })
    }
}

async fn repl(robot: &mut impl Robot, id: &str) -> anyhow::Result<()> {
    let interactive = std::io::stdin().is_terminal();
    let mut stdout = std::io::stdout();
    let mut lines = std::io::stdin().lock().lines();
    loop {
        if interactive {
            write!(stdout, "{id}> ")?;
            stdout.flush()?;
        }
        let Some(line) = lines.next() else {
            return Ok(());
        };
        let line = line?;
        let utterance = line.trim();
        if utterance.is_empty() {
            continue;
        }
        if matches!(utterance, "quit" | "exit") {
            return Ok(());
        }
        let exchange = robot.say(utterance).await?;
        writeln!(stdout, "{}", exchange.speech)?;
        if let Some(r) = exchange.result {
            let verdict = if r.accepted { "accepted" } else { "rejected" };
            writeln!(stdout, "[command {verdict}] {}", r.message)?;
        }
        stdout.flush()?;
    }
}

pub async fn run(args: ChatArgs) -> anyhow::Result<()> {
    match &args.gateway {
        Some(base) => {
            let mut robot = RemoteRobot {
                id: args.robot.clone(),
                url: format!("{}/api/command", base.trim_end_matches('/')),
                client: reqwest::Client::new(),
            };
            repl(&mut robot, &args.robot).await
        }
        None => {
            let mut robot = LocalRobot::new(&args.robot)?;
            repl(&mut robot, &args.robot).await
        }
    }
}
