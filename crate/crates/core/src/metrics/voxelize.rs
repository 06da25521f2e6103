use super::VoxelMask;
use crate::shcore::Grid;
use crate::streamlines::{Streamline, Tractogram};
use crate::{norm3, sub3, Vec3};

/// Points along a streamline spaced at most `step` apart: every vertex plus
/// evenly spaced interior points on each segment.
pub fn sample_points(s: &Streamline, step: f64, mut f: impl FnMut(Vec3<f64>)) {
    let v = &s.vertices;
    if v.is_empty() {
        return;
    }
    f(v[0]);
    for w in v.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = sub3(&b, &a);
        let n = (norm3(&d) / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            let t = i as f64 / n as f64;
            f([a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]]);
        }
    }
}

/// Marks every voxel visited by a streamline sampled at `step` mm.
pub fn voxelize_streamline(mask: &mut VoxelMask, s: &Streamline, step: f64) {
    let grid = mask.grid().clone();
    sample_points(s, step, |p| {
        if let Some(v) = grid.containing_voxel(&p) {
            mask.set(v);
        }
    });
}

pub fn voxelize<'a>(streamlines: impl IntoIterator<Item = &'a Streamline>, grid: &Grid<f64>, step: f64) -> VoxelMask {
    assert!(step > 0.0, "voxelization step must be positive");
    let mut mask = VoxelMask::new(grid.clone());
    for s in streamlines {
        voxelize_streamline(&mut mask, s, step);
    }
    mask
}

pub fn voxelize_tractogram(t: &Tractogram, grid: &Grid<f64>, step: f64) -> VoxelMask {
    voxelize(t.iter(), grid, step)
}
