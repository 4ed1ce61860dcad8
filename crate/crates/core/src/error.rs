use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("invalid roi: {0}")]
    InvalidRoi(String),
    #[error("pixel ({x}, {y}) is outside the {width}x{height} sensor")]
    PixelOutOfBounds { x: u32, y: u32, width: u32, height: u32 },
    #[error("invalid packet: {0}")]
    InvalidPacket(String),
    #[error("invalid event stream: {0}")]
    InvalidStream(String),
    #[error("no signal: {0}")]
    NoSignal(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("pearson correlation undefined: {0} has zero standard deviation")]
    UndefinedCorrelation(&'static str),
    #[error("no detection: {0}")]
    NoDetection(String),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
