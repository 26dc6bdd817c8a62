//! Status transport: newline-delimited JSON frames carrying [`RobotStatus`].
//!
//! A frame is one JSON object with sorted keys followed by `\n`. Subscribers
//! connect over TCP and send a single line `{"subscribe":["rat","bingo"]}`
//! (an empty list selects every robot); the server then streams matching
//! frames. The in-process [`Bus`] runs the same encode, filter and decode path
//! without a socket.
//!
//! Delivery is at-most-once. A subscriber that disconnects misses whatever is
//! published meanwhile.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::sync::mpsc;

use crate::status::RobotStatus;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_PORT: u16 = 7501;
/// Default publish cadence of the simulator, in milliseconds (10 Hz).
pub const DEFAULT_PUBLISH_EVERY_MS: u64 = 100;

const REQUIRED_PAYLOAD_FIELDS: [&str; 11] = [
    "robot_id",
    "timestamp_ms",
    "battery_pct",
    "estop_enabled",
    "errors",
    "current_task",
    "idle",
    "sensors",
    "position",
    "heading_deg",
    "lights_on",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusMessage {
    pub schema_version: u32,
    pub payload: RobotStatus,
}

impl StatusMessage {
    pub fn new(payload: RobotStatus) -> Self {
        StatusMessage {
            schema_version: SCHEMA_VERSION,
            payload,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("missing field {0:?}")]
    MissingField(String),
    #[error("unsupported schema version {0}")]
    Version(i64),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Error)]
pub enum BusError {
    #[error("connection failed: {0}")]
    Connect(#[source] std::io::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid message: {0}")]
    Invalid(String),
}

/// Encodes one frame: canonical JSON (sorted keys) terminated by `\n`.
///
/// Panics if the payload breaks its invariants; encoding is only defined for
/// valid messages.
pub fn encode_status(msg: &StatusMessage) -> Vec<u8> {
    try_encode_status(msg).expect("encode_status called with an invalid message")
}

pub fn try_encode_status(msg: &StatusMessage) -> Result<Vec<u8>, BusError> {
    if msg.schema_version != SCHEMA_VERSION {
        return Err(BusError::Invalid(format!(
            "schema_version {}",
            msg.schema_version
        )));
    }
    msg.payload.check_invariants().map_err(BusError::Invalid)?;
    // serde_json's Map is ordered by key, so going through Value sorts fields.
    let value = serde_json::to_value(msg).map_err(|e| BusError::Invalid(e.to_string()))?;
    let mut bytes = serde_json::to_vec(&value).map_err(|e| BusError::Invalid(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Decodes one frame. Accepts a trailing `\n` (and `\r\n`). Total over
/// arbitrary input.
pub fn decode_status(line: &[u8]) -> Result<StatusMessage, DecodeError> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    let value: Value =
        serde_json::from_slice(line).map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| DecodeError::Malformed("frame is not a JSON object".into()))?;
    let version = obj
        .get("schema_version")
        .ok_or_else(|| DecodeError::MissingField("schema_version".into()))?;
    let version = version
        .as_i64()
        .ok_or_else(|| DecodeError::Malformed("schema_version is not an integer".into()))?;
    if version != i64::from(SCHEMA_VERSION) {
        return Err(DecodeError::Version(version));
    }
    let payload = obj
        .get("payload")
        .ok_or_else(|| DecodeError::MissingField("payload".into()))?;
    let fields = payload
        .as_object()
        .ok_or_else(|| DecodeError::Malformed("payload is not an object".into()))?;
    if let Some(missing) = REQUIRED_PAYLOAD_FIELDS
        .iter()
        .find(|f| !fields.contains_key(**f))
    {
        return Err(DecodeError::MissingField(format!("payload.{missing}")));
    }
    let payload: RobotStatus = serde_json::from_value(payload.clone())
        .map_err(|e| DecodeError::Malformed(e.to_string()))?;
    payload.check_invariants().map_err(DecodeError::Invariant)?;
    Ok(StatusMessage::new(payload))
}

/// Robot selection for a subscriber. Empty means all robots.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RobotFilter(BTreeSet<String>);

impl RobotFilter {
    pub fn all() -> Self {
        RobotFilter::default()
    }

    pub fn only<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        RobotFilter(ids.into_iter().map(Into::into).collect())
    }

    pub fn matches(&self, robot_id: &str) -> bool {
        self.0.is_empty() || self.0.contains(robot_id)
    }

    fn request_line(&self) -> Vec<u8> {
        let mut line = serde_json::to_vec(&serde_json::json!({ "subscribe": self.0 }))
            .expect("filter serializes");
        line.push(b'\n');
        line
    }

    fn parse_request(line: &str) -> Result<Self, BusError> {
        #[derive(Deserialize)]
        struct Request {
            subscribe: Vec<String>,
        }
        let req: Request =
            serde_json::from_str(line.trim()).map_err(|e| BusError::Invalid(e.to_string()))?;
        Ok(RobotFilter::only(req.subscribe))
    }
}

struct Subscriber {
    filter: RobotFilter,
    tx: mpsc::UnboundedSender<Arc<[u8]>>,
}

/// In-process fan-out of encoded frames.
#[derive(Default)]
pub struct Bus {
    subscribers: Mutex<Vec<Subscriber>>,
}

impl Bus {
    pub fn new() -> Arc<Self> {
        Arc::new(Bus::default())
    }

    /// Publishes one status to every live subscriber whose filter matches.
    /// Returns the number of subscribers it was delivered to.
    pub fn publish(&self, status: &RobotStatus) -> Result<usize, BusError> {
        let frame: Arc<[u8]> = try_encode_status(&StatusMessage::new(status.clone()))?.into();
        let mut subs = self.subscribers.lock().expect("bus lock poisoned");
        subs.retain(|s| !s.tx.is_closed());
        let mut delivered = 0;
        for sub in subs.iter().filter(|s| s.filter.matches(&status.robot_id)) {
            if sub.tx.send(Arc::clone(&frame)).is_ok() {
                delivered += 1;
            }
        }
        Ok(delivered)
    }

    fn attach(&self, filter: RobotFilter) -> mpsc::UnboundedReceiver<Arc<[u8]>> {
        let (tx, rx) = mpsc::unbounded_channel();
        self.subscribers
            .lock()
            .expect("bus lock poisoned")
            .push(Subscriber { filter, tx });
        rx
    }

    /// Loopback subscription. Receives only frames published after this call.
    pub fn subscribe(&self, filter: RobotFilter) -> Subscription {
        Subscription {
            inner: SubscriptionInner::Loopback(self.attach(filter)),
        }
    }

    pub fn subscriber_count(&self) -> usize {
        let mut subs = self.subscribers.lock().expect("bus lock poisoned");
        subs.retain(|s| !s.tx.is_closed());
        subs.len()
    }
}

enum SubscriptionInner {
    Loopback(mpsc::UnboundedReceiver<Arc<[u8]>>),
    Tcp(tokio::io::Lines<BufReader<TcpStream>>),
}

/// Receiving end of a status stream, loopback or socket.
pub struct Subscription {
    inner: SubscriptionInner,
}

impl Subscription {
    /// Next frame, or `None` once the stream has ended. A broken connection
    /// is reported as end of stream.
    pub async fn next(&mut self) -> Option<Result<StatusMessage, DecodeError>> {
        match &mut self.inner {
            SubscriptionInner::Loopback(rx) => rx.recv().await.map(|f| decode_status(&f)),
            SubscriptionInner::Tcp(lines) => match lines.next_line().await {
                Ok(Some(line)) => Some(decode_status(line.as_bytes())),
                Ok(None) => None,
                Err(e) => {
                    tracing::warn!("status stream broken: {e}");
                    None
                }
            },
        }
    }

    /// Non-blocking receive for loopback subscriptions. Socket subscriptions
    /// always return `None`; use [`Subscription::next`] for those.
    pub fn try_next(&mut self) -> Option<Result<StatusMessage, DecodeError>> {
        match &mut self.inner {
            SubscriptionInner::Loopback(rx) => rx.try_recv().ok().map(|f| decode_status(&f)),
            SubscriptionInner::Tcp(_) => None,
        }
    }
}

/// Connects to a status server and registers the filter.
pub async fn connect_subscriber<A: ToSocketAddrs>(
    addr: A,
    filter: RobotFilter,
) -> Result<Subscription, BusError> {
    let mut stream = TcpStream::connect(addr).await.map_err(BusError::Connect)?;
    stream.write_all(&filter.request_line()).await?;
    Ok(Subscription {
        inner: SubscriptionInner::Tcp(BufReader::new(stream).lines()),
    })
}

/// TCP front end for a [`Bus`]: each accepted connection becomes a filtered
/// subscriber. Returned from [`serve`].
pub struct BusServer {
    pub local_addr: SocketAddr,
    handle: tokio::task::JoinHandle<()>,
}

impl BusServer {
    pub fn abort(&self) {
        self.handle.abort();
    }
}

impl Drop for BusServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

/// Binds `addr` and serves the bus to socket subscribers until dropped.
pub async fn serve<A: ToSocketAddrs>(bus: Arc<Bus>, addr: A) -> Result<BusServer, BusError> {
    let listener = TcpListener::bind(addr).await.map_err(BusError::Connect)?;
    let local_addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        loop {
            let (stream, peer) = match listener.accept().await {
                Ok(conn) => conn,
                Err(e) => {
                    tracing::warn!("accept failed: {e}");
                    continue;
                }
            };
            let bus = Arc::clone(&bus);
            tokio::spawn(async move {
                if let Err(e) = serve_connection(bus, stream).await {
                    tracing::debug!(%peer, "subscriber closed: {e}");
                }
            });
        }
    });
    Ok(BusServer { local_addr, handle })
}

async fn serve_connection(bus: Arc<Bus>, stream: TcpStream) -> Result<(), BusError> {
    let (read, mut write) = stream.into_split();
    let mut reader = BufReader::new(read);
    let mut line = String::new();
    reader.read_line(&mut line).await?;
    let filter = RobotFilter::parse_request(&line)?;
    let mut rx = bus.attach(filter);
    loop {
        tokio::select! {
            frame = rx.recv() => match frame {
                Some(frame) => write.write_all(&frame).await?,
                None => return Ok(()),
            },
            // Anything further from the client (including EOF) ends the session.
            n = reader.read_line(&mut line) => {
                if n? == 0 {
                    return Ok(());
                }
            }
        }
    }
}
