// Brute-force reference for voxelization, coverage and connection
// classification on axis-aligned grids. Shared by the metrics oracle test and
// the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use tractoformer::metrics::{Connection, RoiSet, VoxelMask};
use tractoformer::shcore::Grid;
use tractoformer::streamlines::{Streamline, Tractogram};

pub type Voxel = [usize; 3];

#[derive(Clone, Debug)]
pub struct BoxGrid {
    pub dims: [usize; 3],
    pub size: f64,
    pub origin: [f64; 3],
}

impl BoxGrid {
    pub fn grid(&self) -> Grid<f64> {
        Grid::axis_aligned(self.dims, [self.size; 3], self.origin).unwrap()
    }

    pub fn lookup(&self, p: [f64; 3]) -> Option<Voxel> {
        let mut v = [0; 3];
        for a in 0..3 {
            let c = ((p[a] - self.origin[a]) / self.size + 0.5).floor();
            if c < 0.0 || c >= self.dims[a] as f64 {
                return None;
            }
            v[a] = c as usize;
        }
        Some(v)
    }
}

pub fn points(s: &Streamline, step: f64) -> Vec<[f64; 3]> {
    let v = &s.vertices;
    let mut out = Vec::new();
    if let Some(&first) = v.first() {
        out.push(first);
    }
    for i in 1..v.len() {
        let (a, b) = (v[i - 1], v[i]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
        let n = ((len / step).ceil() as usize).max(1);
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]);
        }
    }
    out
}

pub fn voxel_set(g: &BoxGrid, streamlines: &[Streamline], step: f64) -> BTreeSet<Voxel> {
    streamlines.iter().flat_map(|s| points(s, step)).filter_map(|p| g.lookup(p)).collect()
}

pub fn mask_set(m: &VoxelMask) -> BTreeSet<Voxel> {
    let d = m.dims();
    let mut out = BTreeSet::new();
    for k in 0..d[2] {
        for j in 0..d[1] {
            for i in 0..d[0] {
                if m.get([i, j, k]) {
                    out.insert([i, j, k]);
                }
            }
        }
    }
    out
}

/// (dice, overlap, overreach) in percent.
pub fn coverage(rec: &BTreeSet<Voxel>, gt: &BTreeSet<Voxel>) -> (f64, f64, f64) {
    let inter = rec.intersection(gt).count();
    let extra = rec.difference(gt).count();
    (
        200.0 * inter as f64 / (rec.len() + gt.len()) as f64,
        100.0 * inter as f64 / gt.len() as f64,
        100.0 * extra as f64 / gt.len() as f64,
    )
}

pub fn classify(g: &BoxGrid, rois: &[BTreeSet<Voxel>], pairs: &[(usize, usize)], s: &Streamline) -> Connection {
    if s.vertices.len() < 2 {
        return Connection::None;
    }
    let ends = [s.vertices[0], *s.vertices.last().unwrap()];
    let inside = |e: usize, r: usize| g.lookup(ends[e]).is_some_and(|v| rois[r].contains(&v));
    for (j, &(a, b)) in pairs.iter().enumerate() {
        if (inside(0, a) && inside(1, b)) || (inside(0, b) && inside(1, a)) {
            return Connection::Valid(j);
        }
    }
    for a in 0..rois.len() {
        for b in a + 1..rois.len() {
            if (inside(0, a) && inside(1, b)) || (inside(0, b) && inside(1, a)) {
                return Connection::Invalid(a, b);
            }
        }
    }
    Connection::None
}

fn rand_voxel(rng: &mut impl Rng, dims: [usize; 3]) -> Voxel {
    [0, 1, 2].map(|a| rng.random_range(0..dims[a]))
}

pub struct Instance {
    pub grid: BoxGrid,
    pub streamlines: Vec<Streamline>,
    pub gt: BTreeSet<Voxel>,
    pub rois: Vec<BTreeSet<Voxel>>,
    pub pairs: Vec<(usize, usize)>,
}

impl Instance {
    pub fn random(rng: &mut impl Rng) -> Self {
        let dims = [rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=6)];
        let size = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let origin = [0; 3].map(|_| rng.random_range(-4..=4) as f64 * 0.5);
        let grid = BoxGrid { dims, size, origin };
        let lo = origin.map(|o| o - size);
        let hi = [0, 1, 2].map(|a| origin[a] + size * dims[a] as f64);
        let n_rois = rng.random_range(2..=5);
        let rois: Vec<BTreeSet<Voxel>> = (0..n_rois)
            .map(|_| (0..rng.random_range(1..=4)).map(|_| rand_voxel(rng, dims)).collect())
            .collect();
        let n_pairs = rng.random_range(1..=n_rois / 2 + 1);
        let mut pairs = Vec::new();
        while pairs.len() < n_pairs {
            let a = rng.random_range(0..n_rois);
            let b = rng.random_range(0..n_rois);
            if a != b {
                pairs.push((a, b));
            }
        }
        let mut gt: BTreeSet<Voxel> = (0..rng.random_range(1..=12)).map(|_| rand_voxel(rng, dims)).collect();
        gt.insert(rand_voxel(rng, dims));
        let n_streamlines = rng.random_range(0..=20);
        let streamlines = (0..n_streamlines)
            .map(|_| {
                let n = rng.random_range(1..=6);
                let verts = (0..n)
                    .map(|_| {
                        if rng.random_bool(0.3) {
                            // Endpoint-like vertex placed inside a random ROI voxel.
                            let r = &rois[rng.random_range(0..n_rois)];
                            let v = *r.iter().nth(rng.random_range(0..r.len())).unwrap();
                            [0, 1, 2].map(|a| origin[a] + size * (v[a] as f64 + rng.random_range(-0.45..0.45)))
                        } else {
                            [0, 1, 2].map(|a| rng.random_range(lo[a]..hi[a]))
                        }
                    })
                    .collect();
                Streamline::new(verts, None)
            })
            .collect();
        Instance { grid, streamlines, gt, rois, pairs }
    }

    pub fn to_mask(&self, set: &BTreeSet<Voxel>) -> VoxelMask {
        let mut m = VoxelMask::new(self.grid.grid());
        set.iter().for_each(|&v| m.set(v));
        m
    }

    pub fn roi_set(&self) -> RoiSet {
        RoiSet { rois: self.rois.iter().map(|r| self.to_mask(r)).collect(), pairs: self.pairs.clone() }
    }

    pub fn tractogram(&self) -> Tractogram {
        self.streamlines.iter().cloned().collect()
    }
}
