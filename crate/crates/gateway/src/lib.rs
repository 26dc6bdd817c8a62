//! HTTP and server-push front end for the supervision runtime.
//!
//! One [`Gateway`] owns an embedded fleet, the alert pipeline and a 10 ms
//! tick task. Handlers and streams only touch it through short critical
//! sections, so the scheduler never waits on a client.
//!
//! Routes (all bodies JSON, every error an [`ApiError`]):
//!
//! ```text
//! GET  /api/config            PUT /api/config
//! GET  /api/robots            GET /api/robots/{id}
//! POST /api/test-motors       POST /api/test-pattern
//! POST /api/command
//! GET  /api/stream/events     GET /api/stream/frames     GET /api/stream/robots
//! ```

mod api;
mod error;
mod runtime;
mod stream;

pub use error::ApiError;
pub use runtime::{Gateway, GatewayError, GatewayOptions};

pub const DEFAULT_PORT: u16 = 7500;
