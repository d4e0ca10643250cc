//! Boundary to generative models: protocol v1 for external generator
//! processes, and built-in synthetic generators for desk-scale runs.

mod cone;
pub mod protocol;
mod serve;
mod session;

use std::time::Duration;

use thiserror::Error;

use crate::latent::LatentError;

pub use cone::{synthetic_cone, SyntheticCone, CONE_C_MAX, CONE_C_MIN};
pub use protocol::{GeneratorRequest, GeneratorResponse, LatentPayload, Message, RequestKind, PROTOCOL_VERSION};
pub use serve::{echo_session, in_process_session, serve, EchoGenerator, Generator};
pub use session::{ExternalObjective, Session, SessionOptions, Ticket, DEFAULT_MAX_IN_FLIGHT, TIMEOUT_ENV};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BridgeError {
    #[error("failed to start generator: {0}")]
    Spawn(String),
    #[error("generator did not complete the handshake within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("generator speaks protocol version {0}, expected 1")]
    VersionMismatch(u32),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("request {id} timed out")]
    Timeout { id: u64 },
    #[error("generator connection closed")]
    Closed,
    #[error("generator error: {0}")]
    Generator(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Latent(#[from] LatentError),
}
