use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::{Real, Result};

/// Standard deviation of the initial weights and positional table.
pub const INIT_STD: f64 = 0.02;

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Location of one tensor inside the flat parameter buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub len: usize,
}

impl Slot {
    pub fn range(self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub slot: Slot,
    /// Biases and normalisation offsets start at zero, gains at one.
    pub init: Init,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    Normal,
    Zeros,
    Ones,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttnSlots {
    pub ln1_g: Slot,
    pub ln1_b: Slot,
    pub wq: Slot,
    pub bq: Slot,
    pub wk: Slot,
    pub bk: Slot,
    pub wv: Slot,
    pub bv: Slot,
    pub wo: Slot,
    pub bo: Slot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlots {
    pub attn: Option<AttnSlots>,
    pub ln2_g: Slot,
    pub ln2_b: Slot,
    pub w1: Slot,
    pub b1: Slot,
    pub w2: Slot,
    pub b2: Slot,
}

/// Named tensor table for a configuration. Linear weights are stored
/// `[out, in]` row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub embed_w: Slot,
    pub embed_b: Slot,
    pub pos: Option<Slot>,
    pub layers: Vec<LayerSlots>,
    pub lnf_g: Slot,
    pub lnf_b: Slot,
    pub head_w: Slot,
    pub head_b: Slot,
    pub tensors: Vec<TensorInfo>,
    pub total: usize,
}

struct Builder {
    tensors: Vec<TensorInfo>,
    total: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> Slot {
        let len = shape.iter().product();
        let slot = Slot { offset: self.total, len };
        self.total += len;
        self.tensors.push(TensorInfo { name, shape: shape.to_vec(), slot, init });
        slot
    }
}

impl Layout {
    pub fn new(c: &ModelConfig) -> Self {
        let d = c.d_model;
        let f = c.d_ff();
        let mut b = Builder { tensors: Vec::new(), total: 0 };
        let embed_w = b.add("embed.weight".into(), &[d, c.embed_width()], Init::Normal);
        let embed_b = b.add("embed.bias".into(), &[d], Init::Zeros);
        let pos = c.variant.uses_attention().then(|| b.add("pos".into(), &[c.block_size, d], Init::Normal));
        let layers = (0..c.n_layers)
            .map(|l| {
                let mut n = |s: &str, shape: &[usize], init| b.add(format!("layer{l}.{s}"), shape, init);
                let attn = c.variant.uses_attention().then(|| AttnSlots {
                    ln1_g: n("ln1.gain", &[d], Init::Ones),
                    ln1_b: n("ln1.bias", &[d], Init::Zeros),
                    wq: n("attn.q.weight", &[d, d], Init::Normal),
                    bq: n("attn.q.bias", &[d], Init::Zeros),
                    wk: n("attn.k.weight", &[d, d], Init::Normal),
                    bk: n("attn.k.bias", &[d], Init::Zeros),
                    wv: n("attn.v.weight", &[d, d], Init::Normal),
                    bv: n("attn.v.bias", &[d], Init::Zeros),
                    wo: n("attn.out.weight", &[d, d], Init::Normal),
                    bo: n("attn.out.bias", &[d], Init::Zeros),
                });
                LayerSlots {
                    attn,
                    ln2_g: n("ln2.gain", &[d], Init::Ones),
                    ln2_b: n("ln2.bias", &[d], Init::Zeros),
                    w1: n("mlp.fc.weight", &[f, d], Init::Normal),
                    b1: n("mlp.fc.bias", &[f], Init::Zeros),
                    w2: n("mlp.proj.weight", &[d, f], Init::Normal),
                    b2: n("mlp.proj.bias", &[d], Init::Zeros),
                }
            })
            .collect();
        let lnf_g = b.add("lnf.gain".into(), &[d], Init::Ones);
        let lnf_b = b.add("lnf.bias".into(), &[d], Init::Zeros);
        let head_w = b.add("head.weight".into(), &[3, d], Init::Normal);
        let head_b = b.add("head.bias".into(), &[3], Init::Zeros);
        Self { embed_w, embed_b, pos, layers, lnf_g, lnf_b, head_w, head_b, tensors: b.tensors, total: b.total }
    }
}

/// All trainable tensors in one flat buffer. Gradients and optimiser
/// moments use the same type. Every mutable access stamps a fresh
/// generation so traces recorded against older values are detected.
#[derive(Clone, Debug)]
pub struct ModelParams<T> {
    config: ModelConfig,
    layout: Arc<Layout>,
    data: Vec<T>,
    generation: u64,
}

impl<T: Real> PartialEq for ModelParams<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.data == other.data
    }
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Arc::new(Layout::new(config));
        let data = vec![T::zero(); layout.total];
        Ok(Self { config: *config, layout, data, generation: next_generation() })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            layout: self.layout.clone(),
            data: vec![T::zero(); self.data.len()],
            generation: next_generation(),
        }
    }

    /// Weights and positional table ~ N(0, 0.02), biases 0, gains 1.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let layout = p.layout.clone();
        for t in &layout.tensors {
            let dst = &mut p.data[t.slot.range()];
            match t.init {
                Init::Normal => dst.iter_mut().for_each(|x| *x = T::c(normal.sample(&mut rng))),
                Init::Zeros => {}
                Init::Ones => dst.fill(T::one()),
            }
        }
        Ok(p)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        self.generation = next_generation();
        &mut self.data
    }

    #[inline]
    pub fn get(&self, s: Slot) -> &[T] {
        &self.data[s.range()]
    }

    #[inline]
    pub fn get_mut(&mut self, s: Slot) -> &mut [T] {
        self.generation = next_generation();
        &mut self.data[s.range()]
    }

    /// `(name, shape, values)` for every tensor in layout order.
    pub fn tensors(&self) -> impl Iterator<Item = (&str, &[usize], &[T])> {
        self.layout.tensors.iter().map(|t| (t.name.as_str(), t.shape.as_slice(), &self.data[t.slot.range()]))
    }

    pub fn tensor(&self, name: &str) -> Option<&[T]> {
        self.layout.tensors.iter().find(|t| t.name == name).map(|t| &self.data[t.slot.range()])
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config,
            layout: self.layout.clone(),
            data: self.data.iter().map(|&x| U::c(x.to_f64().unwrap())).collect(),
            generation: next_generation(),
        }
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.generation = next_generation();
        self.data.iter_mut().zip(&other.data).for_each(|(a, &b)| *a = *a + b);
    }

    pub fn scale(&mut self, k: T) {
        self.generation = next_generation();
        self.data.iter_mut().for_each(|a| *a = *a * k);
    }

    pub fn fill_zero(&mut self) {
        self.generation = next_generation();
        self.data.fill(T::zero());
    }

    /// First tensor containing a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.layout
            .tensors
            .iter()
            .find(|t| self.data[t.slot.range()].iter().any(|x| !x.is_finite()))
            .map(|t| t.name.as_str())
    }
}
