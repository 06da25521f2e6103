use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tractoformer::metrics::VoxelMask;
use tractoformer::model::{forward_features, ModelConfig, ModelParams, Variant};
use tractoformer::shcore::{Grid, Volume};
use tractoformer::tracker::*;
use tractoformer::Vec3;

fn grid(dims: [usize; 3]) -> Grid<f64> {
    Grid::axis_aligned(dims, [1.0; 3], [0.0; 3]).unwrap()
}

fn slab(dims: [usize; 3], xs: std::ops::Range<usize>) -> VoxelMask {
    let mut m = VoxelMask::new(grid(dims));
    for i in xs {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                m.set([i, j, k]);
            }
        }
    }
    m
}

fn unidirectional() -> TrackConfig {
    TrackConfig { bidirectional: false, ..Default::default() }
}

fn assert_unit_steps(v: &[Vec3<f64>], alpha: f64) {
    for w in v.windows(2) {
        let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2)).sqrt();
        assert!((d - alpha).abs() < 1e-6, "step {d}");
    }
}

#[test]
fn seeds_fill_set_voxels() {
    let mut m = VoxelMask::new(grid([6, 5, 4]));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    while m.count() < 10 {
        m.set([rng.random_range(0..6), rng.random_range(0..5), rng.random_range(0..4)]);
    }
    let seeds = generate_seeds(&m, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(seeds.len(), 50);
    assert!(seeds.iter().all(|s| m.contains_point(s)));
    assert_eq!(seeds, generate_seeds(&m, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap());
    assert!(generate_seeds(&VoxelMask::new(grid([2, 2, 2])), 5, &mut rng).is_err());
}

#[test]
fn constant_field_crosses_slab() {
    let mask = slab([50, 3, 3], 0..40);
    let model = OracleModel::new(|_: &[Vec3<f64>]| [1.0, 0.0, 0.0]);
    let t = propagate(&model, &[0.0, 1.0, 1.0], &mask, &unidirectional()).unwrap();
    assert_eq!(t.stop, StopReason::LeftMask);
    assert_eq!(t.streamline.len(), 41);
    assert!((t.streamline.arc_length() - 40.0).abs() < 1e-9);
    assert_unit_steps(&t.streamline.vertices, 1.0);
}

#[test]
fn zero_prediction_stops_with_low_norm() {
    let mask = slab([50, 3, 3], 0..40);
    for k in [1, 2, 7] {
        let model = OracleModel::new(move |c: &[Vec3<f64>]| if c.len() == k { [0.0; 3] } else { [0.0, 0.0, 0.0] });
        let model2 = OracleModel::new(move |c: &[Vec3<f64>]| if c.len() == k { [0.0; 3] } else { [2.0, 0.0, 0.0] });
        let t = propagate(&model2, &[0.0, 1.0, 1.0], &mask, &unidirectional()).unwrap();
        assert_eq!(t.stop, StopReason::LowNorm);
        assert_eq!(t.streamline.len(), k);
        let t = propagate(&model, &[0.0, 1.0, 1.0], &mask, &unidirectional()).unwrap();
        assert_eq!(t.streamline.len(), 1);
    }
    // below tau but non-zero
    let weak = OracleModel::new(|_: &[Vec3<f64>]| [0.0, 0.099, 0.0]);
    assert_eq!(propagate(&weak, &[0.0, 1.0, 1.0], &mask, &unidirectional()).unwrap().stop, StopReason::LowNorm);
}

#[test]
fn max_length_cap() {
    let mask = slab([260, 3, 3], 0..260);
    let model = OracleModel::new(|_: &[Vec3<f64>]| [0.3, 0.0, 0.0]);
    let t = propagate(&model, &[1.0, 1.0, 1.0], &mask, &unidirectional()).unwrap();
    assert_eq!(t.stop, StopReason::MaxLength);
    assert_eq!(t.streamline.len(), 201);
    assert!((t.streamline.arc_length() - 200.0).abs() < 1e-9);
}

#[test]
fn grid_exit_is_out_of_bounds() {
    let mask = slab([10, 3, 3], 0..10);
    let model = OracleModel::new(|_: &[Vec3<f64>]| [0.0, 1.0, 0.0]);
    let t = propagate(&model, &[5.0, 1.0, 1.0], &mask, &unidirectional()).unwrap();
    assert_eq!(t.stop, StopReason::OutOfBounds);
    assert_eq!(t.streamline.len(), 3);
}

#[test]
fn seed_outside_mask_rejected() {
    let mask = slab([50, 3, 3], 0..40);
    let model = OracleModel::new(|_: &[Vec3<f64>]| [1.0, 0.0, 0.0]);
    assert!(propagate(&model, &[45.0, 1.0, 1.0], &mask, &unidirectional()).is_err());
}

/// Keeps going the way the context is already heading; +x from a bare seed.
fn momentum(c: &[Vec3<f64>]) -> Vec3<f64> {
    match c {
        [.., a, b] => [b[0] - a[0], b[1] - a[1], b[2] - a[2]],
        _ => [1.0, 0.0, 0.0],
    }
}

#[test]
fn bidirectional_continues_through_seed() {
    let mask = slab([50, 3, 3], 5..45);
    let model = OracleModel::new(momentum);
    let t = propagate(&model, &[25.0, 1.0, 1.0], &mask, &TrackConfig::default()).unwrap();
    assert_eq!(t.stop, StopReason::LeftMask);
    let v = &t.streamline.vertices;
    assert_eq!(v.len(), 42);
    assert_eq!(v[0], [45.0, 1.0, 1.0]);
    assert_eq!(v[20], [25.0, 1.0, 1.0]);
    assert_eq!(v[41], [4.0, 1.0, 1.0]);
    assert_unit_steps(v, 1.0);
    for p in &v[1..v.len() - 1] {
        assert!(mask.contains_point(p));
    }
}

#[test]
fn bidirectional_respects_total_length() {
    let mask = slab([260, 3, 3], 0..260);
    let model = OracleModel::new(momentum);
    let cfg = TrackConfig { max_length: 50.0, ..Default::default() };
    let t = propagate(&model, &[100.0, 1.0, 1.0], &mask, &cfg).unwrap();
    assert_eq!(t.stop, StopReason::MaxLength);
    assert_eq!(t.streamline.len(), 51);
}

#[test]
fn track_filters_and_is_deterministic() {
    let mask = slab([50, 4, 4], 0..40);
    let model = OracleModel::new(|c: &[Vec3<f64>]| {
        let p = c[c.len() - 1];
        [1.0, 0.2 * (p[0] * 0.3).sin(), 0.0]
    });
    let cfg = TrackConfig { seeds_per_voxel: 2, seed: 11, ..Default::default() };
    let a = track(&model, &mask, &cfg).unwrap();
    assert_eq!(a.n_seeds, 40 * 16 * 2);
    assert_eq!(a.histogram.total(), a.n_seeds);
    assert_eq!(a.tractogram.len() + a.discarded, a.n_seeds);
    assert!(!a.tractogram.is_empty());
    for s in a.tractogram.iter() {
        let len = s.arc_length();
        assert!(len >= cfg.min_length - 1e-6 && len <= cfg.max_length + cfg.step_size, "{len}");
        assert_unit_steps(&s.vertices, 1.0);
        for p in &s.vertices[1..s.len() - 1] {
            assert!(mask.contains_point(p));
        }
    }
    let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| track(&model, &mask, &cfg).unwrap());
    assert_eq!(a.tractogram, b.tractogram);
    assert_eq!(a.histogram, b.histogram);

    let none = track(&model, &mask, &TrackConfig { seeds_per_voxel: 0, ..cfg }).unwrap();
    assert!(none.tractogram.is_empty());
}

fn random_sh(dims: [usize; 3], channels: usize, rng: &mut ChaCha8Rng) -> Volume<f64> {
    let mut v = Volume::<f64>::axis_aligned(dims, channels, [1.0; 3], [0.0; 3]).unwrap();
    v.data_mut().iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
    v
}

fn patch_rows(sh: &Volume<f64>, vertices: &[Vec3<f64>]) -> Vec<f64> {
    vertices.iter().flat_map(|p| sh.extract_neighborhood(p).unwrap()).collect()
}

#[test]
fn incremental_predictions_match_batch_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (trial, block) in [(0, 40), (1, 40), (2, 8), (3, 5)] {
        let variant = Variant::ALL[trial % 3];
        let cfg = ModelConfig { n_layers: 2, n_heads: 2, d_model: 8, block_size: block, in_channels: 3, variant };
        let params = ModelParams::<f64>::init(&cfg, trial as u64).unwrap();
        let sh = random_sh([14, 14, 14], 3, &mut rng);
        let mask = slab([14, 14, 14], 0..14);
        let model = NeuralModel::new(&params, &sh).unwrap();
        let tc = TrackConfig { stop_norm_tau: 0.0, max_length: 25.0, step_size: 0.5, bidirectional: false, ..Default::default() };
        let mut checked = 0;
        for _ in 0..6 {
            let seed = [0, 1, 2].map(|_| rng.random_range(4.0..9.0));
            let t = propagate(&model, &seed, &mask, &tc).unwrap();
            let v = &t.streamline.vertices;
            assert_unit_steps(v, 0.5);
            for i in 0..v.len() - 1 {
                let lo = (i + 1).saturating_sub(block);
                let rows = patch_rows(&sh, &v[lo..=i]);
                let trace = forward_features(&params, &rows, i + 1 - lo).unwrap();
                let y = trace.prediction(i - lo);
                let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
                for a in 0..3 {
                    let step = (v[i + 1][a] - v[i][a]) / 0.5;
                    assert!((step - y[a] / n).abs() < 1e-9, "trial {trial} vertex {i}");
                }
                checked += 1;
            }
        }
        assert!(checked > 10);
    }
}

#[test]
fn neural_model_checks_channels() {
    let cfg = ModelConfig { n_layers: 1, n_heads: 1, d_model: 4, block_size: 4, in_channels: 3, variant: Variant::Full };
    let params = ModelParams::<f32>::init(&cfg, 0).unwrap();
    let sh = Volume::<f32>::axis_aligned([4, 4, 4], 2, [1.0; 3], [0.0; 3]).unwrap();
    assert!(NeuralModel::new(&params, &sh).is_err());
}
