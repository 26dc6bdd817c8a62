//! Real-server harness: a gateway on an ephemeral port with a throwaway
//! config file, plus a minimal server-sent-events reader.
#![allow(dead_code)]

use std::path::PathBuf;
use std::time::Duration;

use futures::StreamExt;
use serde_json::{json, Value};
use supervisor_core::config::canonical_json;
use supervisor_core::SchedulerConfig;
use supervisor_gateway::{Gateway, GatewayOptions};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub struct TestServer {
    pub gateway: Gateway,
    pub base: String,
    pub client: reqwest::Client,
    pub config_path: PathBuf,
    _dir: tempfile::TempDir,
    server: JoinHandle<()>,
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.server.abort();
    }
}

#[allow(clippy::too_many_arguments)]
pub fn slot(
    n: u8,
    ty: &str,
    robots: &[&str],
    pattern: Value,
    reps: u32,
    realert: bool,
    delay: u64,
    step: u64,
) -> Value {
    json!({"slot": n, "event_type": ty, "robots": robots, "pattern": pattern, "reps": reps,
           "realert": realert, "realert_delay_ms": delay, "step_ms": step, "intensity_pct": 100})
}

/// Slot 1: error on rat or bingo plays pulse_matrix, continuously realerting.
pub fn alert_config() -> SchedulerConfig {
    serde_json::from_value(json!({"tick_ms": 10, "events": [
        slot(1, "error", &["bingo", "rat"], json!({"predefined": "pulse_matrix"}), 3, true, 0, 200),
        slot(2, "estop_enabled", &["rat"], json!({"predefined": "circular"}), 1, true, 1000, 100),
    ]}))
    .unwrap()
}

impl TestServer {
    pub async fn start() -> TestServer {
        TestServer::start_with(None, |_| {}).await
    }

    /// `config` is written to the config file before start.
    pub async fn start_with(
        config: Option<&SchedulerConfig>,
        tweak: impl FnOnce(&mut GatewayOptions),
    ) -> TestServer {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("supervisor.json");
        if let Some(cfg) = config {
            std::fs::write(&config_path, canonical_json(cfg)).unwrap();
        }
        let mut options = GatewayOptions::new(&config_path);
        tweak(&mut options);
        let gateway = Gateway::start(options).unwrap();
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let router = gateway.router();
        let server = tokio::spawn(async move {
            axum::serve(listener, router).await.unwrap();
        });
        TestServer {
            gateway,
            base,
            client: reqwest::Client::new(),
            config_path,
            _dir: dir,
            server,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(self.url(path)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self
            .client
            .post(self.url(path))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn put_config(&self, body: impl Into<reqwest::Body>) -> (u16, String) {
        let r = self
            .client
            .put(self.url("/api/config"))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        (r.status().as_u16(), r.text().await.unwrap())
    }

    pub async fn stream(&self, name: &str) -> SseReader {
        let r = self
            .client
            .get(self.url(&format!("/api/stream/{name}")))
            .send()
            .await
            .unwrap();
        assert_eq!(r.status().as_u16(), 200);
        SseReader {
            body: Box::pin(r.bytes_stream()),
            buf: String::new(),
        }
    }

    /// Waits until an alert occupies the motors.
    pub async fn wait_for_frame(&self, frames: &mut SseReader, ids: &[u8]) -> Value {
        loop {
            let (_, data) = frames
                .next_within(Duration::from_secs(5))
                .await
                .expect("frame expected");
            if frame_ids(&data) == ids {
                return data;
            }
        }
    }
}

pub fn frame_ids(frame: &Value) -> Vec<u8> {
    frame["active"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as u8)
        .collect()
}

type ByteStream =
    std::pin::Pin<Box<dyn futures::Stream<Item = reqwest::Result<axum::body::Bytes>> + Send>>;

pub struct SseReader {
    body: ByteStream,
    buf: String,
}

impl SseReader {
    /// Next `(event name, data)`, skipping keep-alive comments. `None` when
    /// the stream ends.
    pub async fn next(&mut self) -> Option<(String, Value)> {
        loop {
            if let Some(end) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..end + 2).collect();
                let mut name = String::from("message");
                let mut data = String::new();
                for line in block.lines() {
                    if let Some(v) = line.strip_prefix("event:") {
                        name = v.trim().to_string();
                    } else if let Some(v) = line.strip_prefix("data:") {
                        data.push_str(v.trim_start());
                    }
                }
                if data.is_empty() {
                    continue;
                }
                return Some((
                    name,
                    serde_json::from_str(&data).expect("event data is JSON"),
                ));
            }
            let chunk = self.body.next().await?.ok()?;
            self.buf
                .push_str(std::str::from_utf8(&chunk).expect("utf-8 stream"));
        }
    }

    /// `None` on timeout or end of stream.
    pub async fn next_within(&mut self, limit: Duration) -> Option<(String, Value)> {
        tokio::time::timeout(limit, self.next())
            .await
            .ok()
            .flatten()
    }
}
