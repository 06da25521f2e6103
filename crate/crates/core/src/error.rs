use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid bundle spec: {0}")]
    InvalidSpec(String),

    #[error("least-squares fit is singular: {0}")]
    FitSingular(String),

    /// A sample point (or one of its neighbourhood offsets) fell outside
    /// the voxel grid. Callers treat this as a stop signal.
    #[error("point ({x:.3}, {y:.3}, {z:.3}) mm lies outside the voxel grid")]
    OutOfBounds { x: f64, y: f64, z: f64 },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("checkpoint error in tensor `{tensor}`: {message}")]
    Checkpoint { tensor: String, message: String },

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("sequence of length {len} exceeds block size {block_size}")]
    ContextOverflow { len: usize, block_size: usize },

    #[error("forward trace was produced by a different parameter generation")]
    StaleTrace,

    #[error("training diverged: non-finite gradient in tensor `{tensor}`")]
    TrainingDiverged { tensor: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format { offset, message: msg.into() }
    }

    pub(crate) fn out_of_bounds<T: crate::Real>(p: &crate::Vec3<T>) -> Self {
        Error::OutOfBounds {
            x: p[0].to_f64().unwrap_or(f64::NAN),
            y: p[1].to_f64().unwrap_or(f64::NAN),
            z: p[2].to_f64().unwrap_or(f64::NAN),
        }
    }
}
