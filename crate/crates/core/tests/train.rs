mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tractoformer::model::{ModelConfig, ModelParams, Variant};
use tractoformer::phantom::{BundleSpec, Centerline, Phantom, PhantomConfig};
use tractoformer::shcore::DEFAULT_LAMBDA;
use tractoformer::streamlines::TrainSequence;
use tractoformer::train::*;

fn arc_phantom(count: usize) -> Phantom {
    let mut c = PhantomConfig::default();
    c.dims = [28, 28, 7];
    c.bundles = vec![BundleSpec {
        name: "arc".into(),
        centerline: Centerline::Arc {
            center: [2.0, 2.0, 3.0],
            start: [24.0, 2.0, 3.0],
            normal: [0.0, 0.0, 1.0],
            angle: std::f64::consts::FRAC_PI_2,
        },
        tube_radius: 1.0,
        streamline_count: count,
        label: 0,
    }];
    Phantom::generate(&c).unwrap()
}

fn dataset(p: &Phantom) -> Vec<TrainSequence<f32>> {
    let sh = p.fit_sh(6, DEFAULT_LAMBDA).unwrap();
    let (d, skipped) = build_dataset(&p.tractogram, &sh, 96, 1.0).unwrap();
    assert_eq!(skipped, 0);
    d
}

fn small_model(variant: Variant) -> ModelConfig {
    ModelConfig { n_layers: 2, n_heads: 4, d_model: 32, block_size: 96, in_channels: 28, variant }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let weights = BundleWeights::new(vec![0.3, 0.7]).unwrap();
    let lens = [3usize, 1, 5];
    let targets: Vec<Vec<[f64; 3]>> =
        lens.iter().map(|&n| (0..n).map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0))).collect()).collect();
    let mut preds: Vec<f64> = (0..3 * lens.iter().sum::<usize>()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels = [1u32, 0, 1];
    for squared in [true, false] {
        let eval = |p: &[f64]| {
            let mut off = 0;
            let items: Vec<LossItem<f64>> = lens
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let it = LossItem { predictions: &p[off..off + 3 * n], targets: &targets[i], label: labels[i] };
                    off += 3 * n;
                    it
                })
                .collect();
            weighted_loss(&items, &weights, squared).unwrap()
        };
        let analytic: Vec<f64> = eval(&preds).1.concat();
        let (err, _) = support::fd::max_relative_error(&mut preds, &analytic, 1e-6, 1e-9, |p| eval(p).0);
        assert!(err < 1e-6, "squared={squared}: {err:e}");
    }
}

#[test]
fn doubling_class_weight_doubles_loss() {
    let y = [[1.0f64, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let p = [0.5, 0.2, 0.0, 0.1, 0.7, 0.3];
    let item = || LossItem { predictions: &p, targets: &y, label: 0 };
    let a = weighted_loss(&[item()], &BundleWeights::new(vec![0.2, 0.8]).unwrap(), true).unwrap();
    let b = weighted_loss(&[item()], &BundleWeights::new(vec![0.4, 0.6]).unwrap(), true).unwrap();
    assert!((b.0 - 2.0 * a.0).abs() < 1e-15);
    for (ga, gb) in a.1[0].iter().zip(&b.1[0]) {
        assert!((gb - 2.0 * ga).abs() < 1e-15);
    }
}

#[test]
fn padding_does_not_reach_gradients() {
    let p = arc_phantom(2);
    let data = dataset(&p);
    let params = ModelParams::<f32>::init(&small_model(Variant::Full), 1).unwrap();
    let seq = &data[0];
    let mut padded = seq.padded_features();
    let n = seq.n_valid() * seq.row_width();
    padded[n..].iter_mut().for_each(|v| *v = 7.0);
    // Same valid prefix, different (garbage) padding: sequences only expose
    // their valid rows, so the gradient is unchanged.
    let other = TrainSequence::new(seq.len(), seq.row_width(), padded[..n].to_vec(), seq.valid_targets().to_vec(), 0).unwrap();
    let a = batch_gradient(&params, &[seq], None, true).unwrap();
    let b = batch_gradient(&params, &[&other], None, true).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn uniform_single_bundle_equals_unweighted() {
    let p = arc_phantom(6);
    let data = dataset(&p);
    let mut cfg = TrainConfig { batch_size: 4, epochs: 2, weighting: Some(WeightingMode::Uniform), ..Default::default() };
    cfg.adam.learning_rate = 1e-3;
    let init = ModelParams::<f32>::init(&small_model(Variant::Full), 2).unwrap();
    let a = fit(&data, init.clone(), &cfg, |_| {}).unwrap();
    cfg.weighting = None;
    let b = fit(&data, init, &cfg, |_| {}).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.curve, b.curve);
}

#[test]
fn empty_dataset_rejected() {
    let init = ModelParams::<f32>::init(&small_model(Variant::Full), 0).unwrap();
    assert!(fit::<f32>(&[], init, &TrainConfig::default(), |_| {}).is_err());
}

#[test]
fn memorises_one_streamline() {
    let p = arc_phantom(1);
    let data = dataset(&p);
    let cfg = TrainConfig {
        batch_size: 1,
        epochs: 500,
        weighting: None,
        adam: AdamConfig { learning_rate: 3e-3, ..Default::default() },
        ..Default::default()
    };
    let init = ModelParams::<f32>::init(&small_model(Variant::Full), 3).unwrap();
    let r = fit(&data, init, &cfg, |_| {}).unwrap();
    let last = r.curve.last().unwrap();
    assert_eq!(last.steps, 500);
    assert!(last.loss < 1e-3, "final loss {}", last.loss);
    assert!(r.curve[r.best_epoch].loss <= last.loss);
}

#[test]
fn training_is_deterministic() {
    let p = arc_phantom(9);
    let data = dataset(&p);
    let cfg = TrainConfig { batch_size: 4, epochs: 2, ..Default::default() };
    let init = ModelParams::<f32>::init(&small_model(Variant::ContextOnly), 4).unwrap();
    let a = fit(&data, init.clone(), &cfg, |_| {}).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| fit(&data, init, &cfg, |_| {}).unwrap());
    assert_eq!(a.params, b.params);
    assert!(a.curve_csv().starts_with("epoch,loss\n0,"));
}
