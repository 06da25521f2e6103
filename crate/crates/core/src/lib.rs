//! Attention-based streamline tractography on spherical-harmonic diffusion
//! data: synthetic phantoms, a causal decoder with a convolutional
//! neighbourhood embedding, bundle-weighted training, iterative tracking and
//! tractogram scoring.
//!
//! Numeric code is generic over [`Real`]; the aliases below pin the
//! precisions used in practice (`f32` for training and tracking, `f64` for
//! gradient checks).

mod binio;
mod error;
mod scalar;

pub mod config;
pub mod metrics;
pub mod model;
pub mod phantom;
pub mod shcore;
pub mod streamlines;
pub mod tracker;
pub mod train;

pub use error::{Error, Result};
pub use scalar::{add3, cast3, cross3, dot3, norm3, normalize3, scale3, sub3, Real, Vec3};

pub type VolumeF32 = shcore::Volume<f32>;
pub type VolumeF64 = shcore::Volume<f64>;
pub type ModelParamsF32 = model::ModelParams<f32>;
pub type ModelParamsF64 = model::ModelParams<f64>;
pub type TrainSequenceF32 = streamlines::TrainSequence<f32>;
pub type TrainSequenceF64 = streamlines::TrainSequence<f64>;
