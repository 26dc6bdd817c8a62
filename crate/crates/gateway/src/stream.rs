//! Server-sent event streams. Each connection is an independent subscriber;
//! all of them end when the gateway shuts down.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::response::sse::{Event, KeepAlive, KeepAliveStream, Sse};
use futures::stream::{self, Stream, StreamExt};
use serde::Serialize;
use tokio::sync::broadcast;
use tokio::time::Instant;

use crate::runtime::Shared;

type EventStream = Sse<KeepAliveStream<stream::BoxStream<'static, Result<Event, Infallible>>>>;

/// Minimum spacing of robot status pushes (at most 10 per second).
pub(crate) const ROBOTS_PERIOD: Duration = Duration::from_millis(100);

fn event<T: Serialize>(name: &'static str, value: &T) -> Result<Event, Infallible> {
    Ok(Event::default()
        .event(name)
        .json_data(value)
        .expect("stream values serialize"))
}

fn from_broadcast<T>(
    rx: broadcast::Receiver<T>,
    name: &'static str,
) -> impl Stream<Item = Result<Event, Infallible>>
where
    T: Serialize + Clone + Send + 'static,
{
    stream::unfold(rx, move |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(v) => return Some((event(name, &v), rx)),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(stream = name, skipped = n, "slow subscriber lost messages");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    })
}

fn finish(
    shared: &Shared,
    s: impl Stream<Item = Result<Event, Infallible>> + Send + 'static,
) -> EventStream {
    let mut closing = shared.closing.subscribe();
    let closed = async move {
        let _ = closing.wait_for(|c| *c).await;
    };
    Sse::new(s.take_until(closed).boxed()).keep_alive(KeepAlive::default())
}

/// Event transitions as they occur.
pub(crate) async fn events(State(shared): State<Arc<Shared>>) -> EventStream {
    let rx = shared.events.subscribe();
    finish(&shared, from_broadcast(rx, "transition"))
}

/// The current output, then every output change.
pub(crate) async fn frames(State(shared): State<Arc<Shared>>) -> EventStream {
    // subscribe under the lock so no change falls between the two; before
    // the first tick there is no output yet and that tick broadcasts it
    let (current, rx) = {
        let core = shared.core();
        let current = core.supervisor.last_output().copied();
        (current, shared.frames.subscribe())
    };
    let first = stream::iter(current.map(|f| event("frame", &f)));
    finish(&shared, first.chain(from_broadcast(rx, "frame")))
}

/// Latest status of every robot, one `robot` event each, at most every
/// [`ROBOTS_PERIOD`].
pub(crate) async fn robots(State(shared): State<Arc<Shared>>) -> EventStream {
    let rx = shared.robots.subscribe();
    let s = stream::unfold((rx, None::<Instant>), |(mut rx, last)| async move {
        if let Some(last) = last {
            tokio::time::sleep_until(last + ROBOTS_PERIOD).await;
            rx.changed().await.ok()?;
        }
        let batch: Vec<_> = rx
            .borrow_and_update()
            .iter()
            .map(|s| event("robot", s))
            .collect();
        Some((stream::iter(batch), (rx, Some(Instant::now()))))
    })
    .flatten();
    finish(&shared, s)
}
