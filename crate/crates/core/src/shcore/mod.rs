//! Spherical-harmonic signal representation and coefficient volumes.
//!
//! Diffusion signals are projected onto the real, symmetric (even-order)
//! SH basis, ordered by `(l, m)` with `m` running from `-l` to `l`. At
//! `l_max = 6` this gives the 28 channels the network consumes.

mod basis;
mod fit;
mod scheme;
mod vol1;
mod volume;

pub use basis::{sh_basis, sh_basis_into, sh_count, sh_orders};
pub use fit::{fit_sh, ShFitter, DEFAULT_LAMBDA};
pub use scheme::GradientScheme;
pub use vol1::{read_volume, read_volume_from, write_volume, write_volume_to, VOL1_MAGIC};
pub use volume::{Grid, Volume, PATCH_CELLS};

/// Maximum SH order used for the network input.
pub const DEFAULT_LMAX: usize = 6;

/// Channel count of a coefficient volume at [`DEFAULT_LMAX`].
pub const SH_CHANNELS: usize = 28;

/// A voxel grid of SH coefficients (one channel per basis function).
pub type ShVolume<T> = Volume<T>;
