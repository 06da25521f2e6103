use super::forward::embed_input;
use super::ops::*;
use super::params::ModelParams;
use crate::{Error, Real, Result};

/// Incremental evaluation with cached keys and values: feeding rows one at
/// a time yields the same predictions as a full forward pass over the same
/// rows. Once `block_size` rows are held, the oldest is dropped and the
/// window is replayed so positions restart at zero.
#[derive(Clone, Debug)]
pub struct Decoder<'a, T> {
    params: &'a ModelParams<T>,
    /// Embedded rows currently in the window.
    embedded: Vec<T>,
    keys: Vec<Vec<T>>,
    values: Vec<Vec<T>>,
    len: usize,
    scratch: Scratch<T>,
}

#[derive(Clone, Debug)]
struct Scratch<T> {
    x: Vec<T>,
    xhat: Vec<T>,
    a: Vec<T>,
    q: Vec<T>,
    o: Vec<T>,
    proj: Vec<T>,
    h: Vec<T>,
    probs: Vec<T>,
}

impl<'a, T: Real> Decoder<'a, T> {
    pub fn new(params: &'a ModelParams<T>) -> Self {
        let c = params.config();
        let (d, f, b) = (c.d_model, c.d_ff(), c.block_size);
        let z = |n| vec![T::zero(); n];
        Self {
            params,
            embedded: Vec::with_capacity(b * d),
            keys: (0..c.n_layers).map(|_| Vec::with_capacity(b * d)).collect(),
            values: (0..c.n_layers).map(|_| Vec::with_capacity(b * d)).collect(),
            len: 0,
            scratch: Scratch { x: z(d), xhat: z(d), a: z(d), q: z(d), o: z(d), proj: z(d), h: z(f), probs: z(b) },
        }
    }

    /// Rows currently in the context window.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn reset(&mut self) {
        self.embedded.clear();
        self.keys.iter_mut().for_each(Vec::clear);
        self.values.iter_mut().for_each(Vec::clear);
        self.len = 0;
    }

    /// Appends one patch row and returns the prediction at its position.
    pub fn push(&mut self, patch: &[T]) -> Result<[T; 3]> {
        let c = *self.params.config();
        if patch.len() != c.patch_width() {
            return Err(Error::invalid(format!("patch row has {} values, expected {}", patch.len(), c.patch_width())));
        }
        let d = c.d_model;
        let l = self.params.layout();
        let mut z = vec![T::zero(); d];
        linear_row(embed_input(&c, patch), self.params.get(l.embed_w), self.params.get(l.embed_b), &mut z);
        if self.len == c.block_size {
            let kept = self.embedded[d..].to_vec();
            self.reset();
            for row in kept.chunks_exact(d) {
                self.step(row, false);
            }
        }
        Ok(self.step(&z, true).expect("prediction requested"))
    }

    fn step(&mut self, z: &[T], predict: bool) -> Option<[T; 3]> {
        let p = self.params;
        let c = *p.config();
        let l = p.layout();
        let d = c.d_model;
        let f = c.d_ff();
        let i = self.len;
        self.embedded.extend_from_slice(z);
        let s = &mut self.scratch;
        s.x.copy_from_slice(z);
        if let Some(pos) = l.pos {
            let row = &p.get(pos)[i * d..(i + 1) * d];
            s.x.iter_mut().zip(row).for_each(|(a, &r)| *a = *a + r);
        }
        for (li, ls) in l.layers.iter().enumerate() {
            if let Some(at) = ls.attn {
                layer_norm_row(&s.x, p.get(at.ln1_g), p.get(at.ln1_b), &mut s.xhat, &mut s.a);
                linear_row(&s.a, p.get(at.wq), p.get(at.bq), &mut s.q);
                let kv = self.keys[li].len();
                self.keys[li].resize(kv + d, T::zero());
                self.values[li].resize(kv + d, T::zero());
                linear_row(&s.a, p.get(at.wk), p.get(at.bk), &mut self.keys[li][kv..]);
                linear_row(&s.a, p.get(at.wv), p.get(at.bv), &mut self.values[li][kv..]);
                let dk = c.head_dim();
                let scale = T::one() / T::c(dk as f64).sqrt();
                for h in 0..c.n_heads {
                    let off = h * dk;
                    attend_row(
                        &s.q[off..off + dk],
                        &self.keys[li],
                        &self.values[li],
                        d,
                        off,
                        i,
                        scale,
                        &mut s.probs,
                        &mut s.o[off..off + dk],
                    );
                }
                linear_row(&s.o, p.get(at.wo), p.get(at.bo), &mut s.proj);
                s.x.iter_mut().zip(&s.proj).for_each(|(a, &b)| *a = *a + b);
            }
            layer_norm_row(&s.x, p.get(ls.ln2_g), p.get(ls.ln2_b), &mut s.xhat, &mut s.a);
            linear_row(&s.a, p.get(ls.w1), p.get(ls.b1), &mut s.h);
            s.h.iter_mut().for_each(|v| *v = gelu(*v));
            linear_row(&s.h[..f], p.get(ls.w2), p.get(ls.b2), &mut s.proj);
            s.x.iter_mut().zip(&s.proj).for_each(|(a, &b)| *a = *a + b);
        }
        self.len += 1;
        if !predict {
            return None;
        }
        layer_norm_row(&s.x, p.get(l.lnf_g), p.get(l.lnf_b), &mut s.xhat, &mut s.a);
        let mut y = [T::zero(); 3];
        linear_row(&s.a, p.get(l.head_w), p.get(l.head_b), &mut y);
        Some(y)
    }
}
