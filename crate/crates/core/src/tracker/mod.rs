//! Deterministic streamline propagation: seeds are placed uniformly in the
//! tracking mask and each streamline grows by `α · ŷ/‖ŷ‖` until it leaves
//! the mask or grid, the prediction collapses, or it reaches the length cap.

mod config;
mod model;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::metrics::VoxelMask;
use crate::streamlines::{Streamline, Tractogram};
use crate::{norm3, Error, Result, Vec3};

pub use config::{StopHistogram, StopReason, TrackConfig};
pub use model::{DirectionModel, DirectionSession, NeuralModel, NeuralSession, OracleModel, OracleSession};

/// Uniform seed points, `per_voxel` in each set voxel, in voxel index order.
pub fn generate_seeds(mask: &VoxelMask, per_voxel: usize, rng: &mut impl Rng) -> Result<Vec<Vec3<f64>>> {
    if mask.is_empty() {
        return Err(Error::invalid("seed mask is empty"));
    }
    // Keep clear of the cube faces so round-off never moves a seed into a
    // neighbour.
    let half = 0.5 - 1e-6;
    let grid = mask.grid();
    let mut seeds = Vec::with_capacity(mask.count() * per_voxel);
    for ijk in mask.voxels() {
        for _ in 0..per_voxel {
            let v = [0, 1, 2].map(|a| ijk[a] as f64 + rng.random_range(-half..half));
            seeds.push(grid.voxel_to_world(&v));
        }
    }
    Ok(seeds)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tracked {
    pub streamline: Streamline,
    /// Reason the last pass ended.
    pub stop: StopReason,
}

/// Grows one streamline from `seed`.
///
/// With `bidirectional`, a second pass restarts at the seed with the
/// reversed first pass as context, and the result runs from the far end of
/// the first pass through the seed to the end of the second. The length cap
/// applies to the whole streamline.
pub fn propagate<M: DirectionModel>(
    model: &M,
    seed: &Vec3<f64>,
    mask: &VoxelMask,
    cfg: &TrackConfig,
) -> Result<Tracked> {
    propagate_with(&mut model.session(), seed, mask, cfg)
}

fn propagate_with<S: DirectionSession>(
    session: &mut S,
    seed: &Vec3<f64>,
    mask: &VoxelMask,
    cfg: &TrackConfig,
) -> Result<Tracked> {
    if !mask.contains_point(seed) {
        return Err(Error::invalid(format!("seed {seed:?} lies outside the tracking mask")));
    }
    session.reset();
    let mut first = vec![*seed];
    let (stop, steps) = match pushed(session, seed)? {
        Some(y) => grow(session, &mut first, y, 0, mask, cfg)?,
        None => (StopReason::OutOfBounds, 0),
    };
    if !cfg.bidirectional || stop == StopReason::MaxLength {
        return Ok(Tracked { streamline: Streamline::new(first, None), stop });
    }

    session.reset();
    let mut vertices: Vec<Vec3<f64>> = first.iter().rev().copied().collect();
    // A first pass that exited has a final vertex without features; it stays
    // in the output but not in the context.
    let skip = usize::from(matches!(stop, StopReason::LeftMask | StopReason::OutOfBounds) && steps > 0);
    let mut y = None;
    for p in &vertices[skip..] {
        y = pushed(session, p)?;
        if y.is_none() {
            break;
        }
    }
    let stop = match y {
        Some(y) => grow(session, &mut vertices, y, steps, mask, cfg)?.0,
        None => StopReason::OutOfBounds,
    };
    Ok(Tracked { streamline: Streamline::new(vertices, None), stop })
}

/// `None` when the vertex's features leave the volume.
fn pushed<S: DirectionSession>(session: &mut S, p: &Vec3<f64>) -> Result<Option<Vec3<f64>>> {
    match session.push(p) {
        Ok(y) => Ok(Some(y)),
        Err(Error::OutOfBounds { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Extends `vertices` from its last vertex, whose prediction is `y`.
/// Returns the stop reason and the total step count including `steps`.
fn grow<S: DirectionSession>(
    session: &mut S,
    vertices: &mut Vec<Vec3<f64>>,
    mut y: Vec3<f64>,
    mut steps: usize,
    mask: &VoxelMask,
    cfg: &TrackConfig,
) -> Result<(StopReason, usize)> {
    let alpha = cfg.step_size;
    let max_steps = (cfg.max_length / alpha - 1e-9).ceil().max(1.0) as usize;
    loop {
        let n = norm3(&y);
        if !(n >= cfg.stop_norm_tau) || n == 0.0 {
            return Ok((StopReason::LowNorm, steps));
        }
        let last = *vertices.last().expect("context holds the seed");
        let p = [0, 1, 2].map(|a| last[a] + alpha * (y[a] / n));
        vertices.push(p);
        steps += 1;
        if !mask.grid().contains(&p) {
            return Ok((StopReason::OutOfBounds, steps));
        }
        if !mask.contains_point(&p) {
            return Ok((StopReason::LeftMask, steps));
        }
        if steps >= max_steps {
            return Ok((StopReason::MaxLength, steps));
        }
        match pushed(session, &p)? {
            Some(next) => y = next,
            None => return Ok((StopReason::OutOfBounds, steps)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrackResult {
    /// Kept streamlines in seed order.
    pub tractogram: Tractogram,
    pub histogram: StopHistogram,
    pub n_seeds: usize,
    /// Streamlines shorter than the minimum length.
    pub discarded: usize,
}

/// Seeds the mask and propagates every seed in parallel. Output order
/// follows seed order regardless of scheduling.
pub fn track<M: DirectionModel>(model: &M, mask: &VoxelMask, cfg: &TrackConfig) -> Result<TrackResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds = generate_seeds(mask, cfg.seeds_per_voxel, &mut rng)?;
    track_seeds(model, &seeds, mask, cfg)
}

pub fn track_seeds<M: DirectionModel>(
    model: &M,
    seeds: &[Vec3<f64>],
    mask: &VoxelMask,
    cfg: &TrackConfig,
) -> Result<TrackResult> {
    cfg.validate()?;
    let results: Vec<Result<Tracked>> = seeds
        .par_iter()
        .map_init(|| model.session(), |s, seed| propagate_with(s, seed, mask, cfg))
        .collect();
    let mut histogram = StopHistogram::default();
    let mut kept = Vec::new();
    let mut discarded = 0;
    for r in results {
        let t = r?;
        histogram.add(t.stop);
        if t.streamline.arc_length() + 1e-9 < cfg.min_length {
            discarded += 1;
        } else {
            kept.push(t.streamline);
        }
    }
    log::debug!("tracked {} seeds, kept {}, discarded {discarded}", seeds.len(), kept.len());
    Ok(TrackResult { tractogram: Tractogram::new(kept), histogram, n_seeds: seeds.len(), discarded })
}
