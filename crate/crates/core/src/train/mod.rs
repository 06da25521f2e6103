//! Bundle-weighted regression loss, Adam, and the mini-batch training loop.

mod adam;
mod fit;
mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fit::{batch_gradient, build_dataset, fit, label_counts, EpochReport, FitResult, TrainConfig};
pub use loss::{bundle_weights, weighted_loss, BundleWeights, LossItem, WeightingMode};
