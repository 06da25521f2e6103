mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tractoformer::model::*;
use tractoformer::Error;

fn tiny(variant: Variant) -> ModelConfig {
    ModelConfig { n_layers: 2, n_heads: 2, d_model: 8, block_size: 7, in_channels: 28, variant }
}

fn random_features(rng: &mut impl Rng, c: &ModelConfig, len: usize) -> Vec<f64> {
    (0..len * c.patch_width()).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Larger-than-default weights so every nonlinearity is exercised.
fn params(c: &ModelConfig, seed: u64) -> ModelParams<f64> {
    let mut p = ModelParams::<f64>::init(c, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for x in p.data_mut() {
        *x += rng.random_range(-0.2..0.2);
    }
    p
}

fn contraction(p: &ModelParams<f64>, feats: &[f64], len: usize, w: &[f64]) -> f64 {
    let t = forward_features(p, feats, len).unwrap();
    t.predictions().iter().zip(w).map(|(a, b)| a * b).sum()
}

#[test]
fn gradients_match_finite_differences() {
    for variant in Variant::ALL {
        let c = tiny(variant);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = params(&c, 2);
        let len = 5;
        let feats = random_features(&mut rng, &c, len);
        let w: Vec<f64> = (0..3 * len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let trace = forward_features(&p, &feats, len).unwrap();
        let grads = backward(&trace, &w, &p).unwrap();
        let cfg = *p.config();
        let mut x = p.data().to_vec();
        let (err, at) = support::fd::max_relative_error(&mut x, grads.data(), 1e-4, 1e-7, |x| {
            p.data_mut().copy_from_slice(x);
            contraction(&p, &feats, len, &w)
        });
        let name = &p.layout().tensors.iter().find(|t| t.slot.range().contains(&at)).unwrap().name;
        assert!(err < 1e-4, "{:?}: relative error {err:e} in {name}", cfg.variant);
    }
}

#[test]
fn zero_upstream_gives_zero_gradient() {
    let c = tiny(Variant::Full);
    let p = params(&c, 3);
    let feats = random_features(&mut ChaCha8Rng::seed_from_u64(0), &c, 4);
    let t = forward_features(&p, &feats, 4).unwrap();
    let g = backward(&t, &[0.0; 12], &p).unwrap();
    assert!(g.data().iter().all(|&v| v == 0.0));
}

#[test]
fn masked_positions_leave_positional_rows_untouched() {
    let c = tiny(Variant::Full);
    let p = params(&c, 4);
    let feats = random_features(&mut ChaCha8Rng::seed_from_u64(1), &c, 6);
    let t = forward_features(&p, &feats, 6).unwrap();
    let mut w = vec![1.0; 18];
    w[9..].fill(0.0); // only positions 0..3 contribute
    let g = backward(&t, &w, &p).unwrap();
    let pos = g.tensor("pos").unwrap();
    assert!(pos[3 * 8..].iter().all(|&v| v == 0.0));
    assert!(pos[..3 * 8].iter().any(|&v| v != 0.0));
}

#[test]
fn stale_trace_rejected() {
    let c = tiny(Variant::Full);
    let mut p = params(&c, 5);
    let feats = random_features(&mut ChaCha8Rng::seed_from_u64(2), &c, 3);
    let t = forward_features(&p, &feats, 3).unwrap();
    p.data_mut()[0] += 1.0;
    assert!(matches!(backward(&t, &[1.0; 9], &p), Err(Error::StaleTrace)));
}

#[test]
fn causality_and_mask_exactness() {
    let c = ModelConfig { n_layers: 3, n_heads: 2, d_model: 16, block_size: 12, ..tiny(Variant::Full) };
    let p = params(&c, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let len = rng.random_range(2..=12);
        let cut = rng.random_range(1..len);
        let feats = random_features(&mut rng, &c, len);
        let mut other = feats.clone();
        for v in &mut other[cut * c.patch_width()..] {
            *v = rng.random_range(-5.0..5.0);
        }
        let a = forward_features(&p, &feats, len).unwrap();
        let b = forward_features(&p, &other, len).unwrap();
        assert_eq!(a.predictions()[..3 * cut], b.predictions()[..3 * cut]);
        for layer in 0..c.n_layers {
            for head in 0..c.n_heads {
                let grid = a.attention(layer, head).unwrap();
                for i in 0..len {
                    let row = &grid[i * len..(i + 1) * len];
                    assert!(row[i + 1..].iter().all(|&x| x == 0.0));
                    assert!((row[..=i].iter().sum::<f64>() - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn single_token_attention_is_one() {
    let c = tiny(Variant::ContextOnly);
    let p = params(&c, 8);
    let t = forward_features(&p, &random_features(&mut ChaCha8Rng::seed_from_u64(3), &c, 1), 1).unwrap();
    assert_eq!(dump_attention(&t, 1, 1).unwrap(), vec![1.0]);
    assert!(dump_attention(&t, 2, 0).is_err());
    assert!(dump_attention(&t, 0, 2).is_err());
}

#[test]
fn embedding_of_ones() {
    let c = ModelConfig { n_layers: 0, n_heads: 1, d_model: 2, block_size: 4, ..tiny(Variant::Full) };
    let mut p = ModelParams::<f64>::zeros(&c).unwrap();
    let w = p.layout().embed_w;
    p.get_mut(w).fill(1.0);
    let z = embed(&p, &vec![1.0; 2 * c.patch_width()], 2).unwrap();
    assert_eq!(z, vec![756.0; 4]);
    let zero = embed(&ModelParams::<f64>::zeros(&c).unwrap(), &vec![0.0; c.patch_width()], 1).unwrap();
    assert_eq!(zero, vec![0.0; 2]);
}

#[test]
fn identical_patches_embed_identically() {
    let c = tiny(Variant::Full);
    let p = params(&c, 9);
    let row = random_features(&mut ChaCha8Rng::seed_from_u64(4), &c, 1);
    let z = embed(&p, &[row.clone(), row].concat(), 2).unwrap();
    assert_eq!(z[..8], z[8..]);
}

#[test]
fn positions_matter() {
    let c = tiny(Variant::Full);
    let p = params(&c, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let feats = random_features(&mut rng, &c, 4);
    let pw = c.patch_width();
    let mut swapped = feats.clone();
    swapped[..pw].copy_from_slice(&feats[pw..2 * pw]);
    swapped[pw..2 * pw].copy_from_slice(&feats[..pw]);
    let a = forward_features(&p, &feats, 4).unwrap();
    let b = forward_features(&p, &swapped, 4).unwrap();
    assert_ne!(a.predictions()[3..6], b.predictions()[..3]);
    assert_ne!(a.predictions()[9..], b.predictions()[9..]);
}

#[test]
fn context_overflow() {
    let c = tiny(Variant::Full);
    let p = params(&c, 11);
    let feats = random_features(&mut ChaCha8Rng::seed_from_u64(6), &c, 8);
    assert!(matches!(forward_features(&p, &feats, 8), Err(Error::ContextOverflow { len: 8, block_size: 7 })));
}

#[test]
fn zero_layer_model_is_head_of_normed_embedding() {
    let c = ModelConfig { n_layers: 0, ..tiny(Variant::Full) };
    let p = params(&c, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_features(&mut rng, &c, 3);
    let b = random_features(&mut rng, &c, 3);
    let (za, zb) = (embed(&p, &a, 3).unwrap(), embed(&p, &b, 3).unwrap());
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let zs = embed(&p, &sum, 3).unwrap();
    let bias = p.tensor("embed.bias").unwrap();
    for i in 0..zs.len() {
        // Affine superposition: z(a + b) = z(a) + z(b) - bias.
        assert!((zs[i] - (za[i] + zb[i] - bias[i % 8])).abs() < 1e-12);
    }
    let t = forward(&p, &za, 3).unwrap();
    let (pos, g, beta, hw, hb) = (
        p.tensor("pos").unwrap(),
        p.tensor("lnf.gain").unwrap(),
        p.tensor("lnf.bias").unwrap(),
        p.tensor("head.weight").unwrap(),
        p.tensor("head.bias").unwrap(),
    );
    for r in 0..3 {
        let x: Vec<f64> = (0..8).map(|i| za[r * 8 + i] + pos[r * 8 + i]).collect();
        let mean = x.iter().sum::<f64>() / 8.0;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
        let n: Vec<f64> = (0..8).map(|i| g[i] * (x[i] - mean) / (var + 1e-5).sqrt() + beta[i]).collect();
        for o in 0..3 {
            let y = hb[o] + (0..8).map(|i| hw[o * 8 + i] * n[i]).sum::<f64>();
            assert!((y - t.predictions()[r * 3 + o]).abs() < 1e-12);
        }
    }
}

#[test]
fn decoder_matches_batch_forward() {
    for variant in Variant::ALL {
        let c = ModelConfig { block_size: 6, ..tiny(variant) };
        let p = params(&c, 13);
        let pw = c.patch_width();
        let feats = random_features(&mut ChaCha8Rng::seed_from_u64(9), &c, 10);
        let mut dec = Decoder::new(&p);
        for t in 0..10 {
            let y = dec.push(&feats[t * pw..(t + 1) * pw]).unwrap();
            // Window of the most recent block_size rows.
            let start = (t + 1).saturating_sub(c.block_size);
            let n = t + 1 - start;
            let full = forward_features(&p, &feats[start * pw..(t + 1) * pw], n).unwrap();
            assert_eq!(y, full.prediction(n - 1), "{variant} step {t}");
            assert_eq!(dec.len(), n);
        }
    }
}

#[test]
fn f32_and_f64_agree() {
    let c = tiny(Variant::Full);
    let p = params(&c, 14);
    let feats = random_features(&mut ChaCha8Rng::seed_from_u64(10), &c, 5);
    let a = forward_features(&p, &feats, 5).unwrap();
    let p32 = p.cast::<f32>();
    let f32s: Vec<f32> = feats.iter().map(|&v| v as f32).collect();
    let b = forward_features(&p32, &f32s, 5).unwrap();
    for (x, y) in a.predictions().iter().zip(b.predictions()) {
        assert!((x - *y as f64).abs() < 1e-4);
    }
}
