use thiserror::Error;

use crate::btf_protocol::{Artifact, Channel, Model};

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("public key set exhausted after {used} samples")]
    ExhaustedPublicKey { used: usize },

    #[error("unsupported symmetric security level {0} (only 80 is available)")]
    UnsupportedLevel(u32),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("threshold {threshold} does not fit a {width}-bit counter")]
    WidthMismatch { width: usize, threshold: u64 },

    #[error("{artifact:?} may not travel on {channel:?} under {model:?}")]
    ChannelViolation {
        model: Model,
        channel: Channel,
        artifact: Artifact,
    },

    #[error("missing key material: {0}")]
    MissingKey(&'static str),

    #[error("no template registered for client {0}")]
    NoTemplate(u32),

    #[error("incomplete run: {0}")]
    IncompleteRun(String),

    #[error("party separation violated: {0}")]
    Separation(String),

    #[error("message authentication failed on {0:?}")]
    BadMac(Channel),

    #[error("unexpected message: wanted {wanted:?}, got {got:?}")]
    UnexpectedMessage { wanted: Artifact, got: Artifact },

    #[error("malformed encoding: {0}")]
    Decode(String),

    #[error("transport closed on {0:?}")]
    TransportClosed(Channel),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
