//! Synthetic bundle phantoms with a multi-tensor DWI forward model.
//!
//! Bundles are tubes of parallel streamlines around parametric centerlines.
//! Each voxel's fiber populations are the bundles passing through it; the
//! signal mixes one axially symmetric tensor per population with equal
//! volume fractions.

mod config;
mod curve;
mod io;
mod signal;

pub use config::PhantomConfig;
pub use curve::{generate_streamlines, BundleSpec, Centerline, MAX_LENGTH, MIN_LENGTH};
pub use io::{
    read_ground_truth, write_phantom, PhantomFiles, BUNDLES_FILE, CONFIG_FILE, DWI_FILE, SCHEME_FILE, SH_FILE, TRACTS_FILE,
    WM_MASK_FILE,
};
pub use signal::{add_rician, multi_tensor_signal, tensor_quadratic};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::metrics::{GroundTruth, RoiSet, VoxelMask};
use crate::shcore::{Grid, ShFitter, Volume};
use crate::streamlines::{Streamline, Tractogram};
use crate::{add3, norm3, normalize3, scale3, sub3, Error, Result, Vec3};

/// Streamline vertex spacing, mm.
pub const STREAMLINE_STEP: f64 = 1.0;
/// Arc length of centerline at each end that defines an endpoint ROI, mm.
pub const ROI_LENGTH: f64 = 3.0;
/// Minimum ROI dilation, voxels.
pub const ROI_DILATION: usize = 2;

/// One bundle's share of a voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberPopulation {
    pub bundle: usize,
    /// Unit mean tangent (streamline orientation preserved).
    pub direction: Vec3<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct Phantom {
    pub config: PhantomConfig,
    pub tractogram: Tractogram,
    pub dwi: Volume<f32>,
    pub wm_mask: VoxelMask,
    pub bundle_masks: Vec<VoxelMask>,
    pub rois: RoiSet,
    /// Per voxel (linear index), the populations present.
    pub populations: Vec<Vec<FiberPopulation>>,
}

impl Phantom {
    pub fn generate(config: &PhantomConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let step = config.sampling_step();

        let mut streamlines = Vec::new();
        for spec in &config.bundles {
            streamlines.extend(generate_streamlines(spec, STREAMLINE_STEP, &mut rng)?);
        }
        let tractogram = Tractogram::new(streamlines);

        let bundle_of_label = |label: Option<u32>| {
            config.bundles.iter().position(|b| Some(b.label) == label).expect("generated labels")
        };
        let n_bundles = config.bundles.len();
        let mut bundle_masks = vec![VoxelMask::new(grid.clone()); n_bundles];
        let mut sums: Vec<Vec<(usize, Vec3<f64>, usize)>> = vec![Vec::new(); grid.n_voxels()];
        for s in tractogram.iter() {
            let j = bundle_of_label(s.label);
            for_each_tangent_sample(s, step, |p, t| {
                let Some(v) = grid.containing_voxel(&p) else {
                    return Err(Error::InvalidSpec(format!(
                        "bundle `{}` leaves the grid at ({:.2}, {:.2}, {:.2})",
                        config.bundles[j].name, p[0], p[1], p[2]
                    )));
                };
                bundle_masks[j].set(v);
                let cell = &mut sums[grid.linear_index(v)];
                match cell.iter_mut().find(|e| e.0 == j) {
                    Some(e) => {
                        e.1 = add3(&e.1, &t);
                        e.2 += 1;
                    }
                    None => cell.push((j, t, 1)),
                }
                Ok(())
            })?;
        }
        let populations: Vec<Vec<FiberPopulation>> = sums
            .into_iter()
            .map(|cell| {
                cell.into_iter()
                    .filter_map(|(bundle, sum, samples)| {
                        // Opposing tangents within one bundle cancel; such a
                        // voxel carries no usable orientation for that bundle.
                        normalize3(&sum).map(|direction| FiberPopulation { bundle, direction, samples })
                    })
                    .collect()
            })
            .collect();

        let mut wm_mask = VoxelMask::new(grid.clone());
        for m in &bundle_masks {
            wm_mask.union_with(m)?;
        }

        let rois = build_rois(config, &grid)?;
        for s in tractogram.iter() {
            let j = bundle_of_label(s.label);
            let (a, b) = rois.pairs[j];
            let (first, last) = (s.first().unwrap(), s.last().unwrap());
            if !(rois.rois[a].contains_point(first) && rois.rois[b].contains_point(last)) {
                return Err(Error::InvalidSpec(format!(
                    "bundle `{}`: a streamline endpoint falls outside its ROI",
                    config.bundles[j].name
                )));
            }
        }

        let dwi = simulate(config, &grid, &populations, &mut rng)?;
        Ok(Self { config: config.clone(), tractogram, dwi, wm_mask, bundle_masks, rois, populations })
    }

    pub fn grid(&self) -> &Grid<f64> {
        self.wm_mask.grid()
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            grid: self.grid().clone(),
            bundle_names: self.config.bundles.iter().map(|b| b.name.clone()).collect(),
            bundle_masks: self.bundle_masks.clone(),
            rois: self.rois.clone(),
        }
    }

    /// Number of voxels holding at least two fiber populations.
    pub fn crossing_voxels(&self) -> usize {
        self.populations.iter().filter(|p| p.len() >= 2).count()
    }

    pub fn populations_at(&self, p: &Vec3<f64>) -> &[FiberPopulation] {
        match self.grid().containing_voxel(p) {
            Some(v) => &self.populations[self.grid().linear_index(v)],
            None => &[],
        }
    }

    /// SH coefficient volume of the simulated DWI, fitted in double
    /// precision.
    pub fn fit_sh(&self, l_max: usize, lambda: f64) -> Result<Volume<f32>> {
        let sh = ShFitter::<f64>::new(&self.config.scheme, l_max, lambda)?.fit_volume(&self.dwi.cast())?;
        Ok(sh.cast())
    }
}

/// Visits the voxelization sample points of a streamline together with the
/// unit direction of the segment they lie on.
fn for_each_tangent_sample(
    s: &Streamline,
    step: f64,
    mut f: impl FnMut(Vec3<f64>, Vec3<f64>) -> Result<()>,
) -> Result<()> {
    let v = &s.vertices;
    if v.len() < 2 {
        return Ok(());
    }
    let first = normalize3(&sub3(&v[1], &v[0])).unwrap_or([1.0, 0.0, 0.0]);
    f(v[0], first)?;
    for w in v.windows(2) {
        let d = sub3(&w[1], &w[0]);
        let t = normalize3(&d).unwrap_or(first);
        let n = (norm3(&d) / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            f(add3(&w[0], &scale3(&d, i as f64 / n as f64)), t)?;
        }
    }
    Ok(())
}

fn build_rois(config: &PhantomConfig, grid: &Grid<f64>) -> Result<RoiSet> {
    let min_voxel = config.voxel_size.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rois = Vec::new();
    let mut pairs = Vec::new();
    for spec in &config.bundles {
        let dense = spec.centerline.dense();
        let mut arc = vec![0.0; dense.len()];
        for i in 1..dense.len() {
            arc[i] = arc[i - 1] + norm3(&sub3(&dense[i], &dense[i - 1]));
        }
        let total = *arc.last().unwrap();
        let radius = ROI_DILATION.max((spec.tube_radius / min_voxel).ceil() as usize);
        let end_roi = |keep: &dyn Fn(f64) -> bool| -> Result<VoxelMask> {
            let mut m = VoxelMask::new(grid.clone());
            for (p, &s) in dense.iter().zip(&arc) {
                if keep(s) {
                    if let Some(v) = grid.containing_voxel(p) {
                        m.set(v);
                    }
                }
            }
            if m.is_empty() {
                return Err(Error::InvalidSpec(format!("bundle `{}`: endpoint region outside the grid", spec.name)));
            }
            Ok(m.dilate(radius))
        };
        let a = end_roi(&|s| s <= ROI_LENGTH)?;
        let b = end_roi(&|s| s >= total - ROI_LENGTH)?;
        pairs.push((rois.len(), rois.len() + 1));
        rois.push(a);
        rois.push(b);
    }
    Ok(RoiSet { rois, pairs })
}

fn simulate(
    config: &PhantomConfig,
    grid: &Grid<f64>,
    populations: &[Vec<FiberPopulation>],
    rng: &mut ChaCha8Rng,
) -> Result<Volume<f32>> {
    let nc = config.scheme.len();
    let mut signal = vec![0.0f64; grid.n_voxels() * nc];
    signal.par_chunks_mut(nc).zip(populations.par_iter()).for_each(|(out, pops)| {
        let dirs: Vec<Vec3<f64>> = pops.iter().map(|p| p.direction).collect();
        multi_tensor_signal(&config.scheme, config.s0, config.diffusivities, &dirs, out);
    });
    if let Some(snr) = config.snr {
        let sigma = config.s0 / snr;
        add_rician(&mut signal, sigma, rng);
    }
    Volume::from_grid(grid.cast(), nc, signal.into_iter().map(|x| x as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross_config() -> PhantomConfig {
        let mut c = PhantomConfig::default();
        c.dims = [24, 24, 8];
        c.bundles = vec![
            BundleSpec {
                name: "x".into(),
                centerline: Centerline::Straight { start: [1.0, 12.0, 4.0], end: [22.0, 12.0, 4.0] },
                tube_radius: 1.0,
                streamline_count: 20,
                label: 0,
            },
            BundleSpec {
                name: "y".into(),
                centerline: Centerline::Straight { start: [12.0, 1.0, 4.0], end: [12.0, 22.0, 4.0] },
                tube_radius: 1.0,
                streamline_count: 20,
                label: 1,
            },
        ];
        c
    }

    #[test]
    fn masks_cover_vertices_and_crossings_exist() {
        let p = Phantom::generate(&cross_config()).unwrap();
        assert_eq!(p.tractogram.len(), 40);
        for s in p.tractogram.iter() {
            let j = s.label.unwrap() as usize;
            for v in &s.vertices {
                assert!(p.wm_mask.contains_point(v));
                assert!(p.bundle_masks[j].contains_point(v));
            }
        }
        assert!(p.crossing_voxels() >= 1);
        let center = p.populations_at(&[12.0, 12.0, 4.0]);
        assert_eq!(center.len(), 2);
        assert!((center[0].direction[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_signal_bounds() {
        let p = Phantom::generate(&cross_config()).unwrap();
        let scheme = &p.config.scheme;
        for s in p.dwi.data().chunks(scheme.len()) {
            for (i, &x) in s.iter().enumerate() {
                if scheme.is_b0(i) {
                    assert_eq!(x as f64, p.config.s0);
                } else {
                    assert!(x > 0.0 && x as f64 <= p.config.s0);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let mut c = cross_config();
        c.snr = Some(20.0);
        let a = Phantom::generate(&c).unwrap();
        let b = Phantom::generate(&c).unwrap();
        assert_eq!(a.tractogram, b.tractogram);
        assert_eq!(a.dwi, b.dwi);
        c.seed += 1;
        assert_ne!(Phantom::generate(&c).unwrap().dwi, a.dwi);
    }

    #[test]
    fn bundle_leaving_grid_rejected() {
        let mut c = cross_config();
        c.bundles[0].centerline = Centerline::Straight { start: [1.0, 12.0, 4.0], end: [40.0, 12.0, 4.0] };
        assert!(matches!(Phantom::generate(&c), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn ground_truth_scores_itself() {
        let p = Phantom::generate(&cross_config()).unwrap();
        let r = crate::metrics::score(&p.tractogram, &p.ground_truth(), p.config.sampling_step()).unwrap();
        assert_eq!((r.dice, r.vc, r.vb, r.ib), (100.0, 100.0, 2, 0));
    }
}
