use super::config::ModelConfig;
use super::ops::*;
use super::params::{LayerSlots, ModelParams};
use crate::{Error, Real, Result};

/// Offset of the centre cell's channels within a patch row.
pub(crate) fn center_offset(c: &ModelConfig) -> usize {
    (crate::shcore::PATCH_CELLS / 2) * c.in_channels
}

/// Embedding input for one patch row: the whole patch or its centre cell.
#[inline]
pub(crate) fn embed_input<'a, T>(c: &ModelConfig, patch: &'a [T]) -> &'a [T] {
    if c.variant.uses_patch() {
        patch
    } else {
        let o = center_offset(c);
        &patch[o..o + c.in_channels]
    }
}

/// Maps `len` patch rows to `len x d_model` embeddings.
pub fn embed<T: Real>(params: &ModelParams<T>, features: &[T], len: usize) -> Result<Vec<T>> {
    let c = params.config();
    let pw = c.patch_width();
    if features.len() != len * pw {
        return Err(Error::invalid(format!(
            "expected {len} feature rows of width {pw}, got {} values",
            features.len()
        )));
    }
    let d = c.d_model;
    let l = params.layout();
    let (w, b) = (params.get(l.embed_w), params.get(l.embed_b));
    let mut out = vec![T::zero(); len * d];
    for (row, z) in features.chunks_exact(pw).zip(out.chunks_exact_mut(d)) {
        linear_row(embed_input(c, row), w, b, z);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
struct AttnTrace<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
    a: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// `heads x T x T`, zero above the diagonal.
    probs: Vec<T>,
    o: Vec<T>,
}

#[derive(Clone, Debug)]
struct LayerTrace<T> {
    attn: Option<AttnTrace<T>>,
    xhat2: Vec<T>,
    rstd2: Vec<T>,
    m: Vec<T>,
    h: Vec<T>,
    gh: Vec<T>,
}

/// Activations of one forward pass, kept for the backward pass and for
/// attention inspection.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    generation: u64,
    config: ModelConfig,
    len: usize,
    features: Option<Vec<T>>,
    layers: Vec<LayerTrace<T>>,
    xhat_f: Vec<T>,
    rstd_f: Vec<T>,
    out_f: Vec<T>,
    predictions: Vec<T>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `len x 3`, one direction per position.
    pub fn predictions(&self) -> &[T] {
        &self.predictions
    }

    pub fn prediction(&self, t: usize) -> [T; 3] {
        let p = &self.predictions[3 * t..3 * t + 3];
        [p[0], p[1], p[2]]
    }

    /// Post-softmax weights of one head; rows are queries, columns keys.
    pub fn attention(&self, layer: usize, head: usize) -> Result<&[T]> {
        if layer >= self.config.n_layers || head >= self.config.n_heads {
            return Err(Error::invalid(format!(
                "layer {layer} / head {head} out of range ({} layers, {} heads)",
                self.config.n_layers, self.config.n_heads
            )));
        }
        let attn = self.layers[layer]
            .attn
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("variant {} has no attention", self.config.variant)))?;
        let tt = self.len * self.len;
        Ok(&attn.probs[head * tt..(head + 1) * tt])
    }
}

/// Copy of one head's `T x T` attention grid.
pub fn dump_attention<T: Real>(trace: &ForwardTrace<T>, layer: usize, head: usize) -> Result<Vec<T>> {
    trace.attention(layer, head).map(<[T]>::to_vec)
}

fn check_len(c: &ModelConfig, len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::invalid("sequence is empty"));
    }
    if len > c.block_size {
        return Err(Error::ContextOverflow { len, block_size: c.block_size });
    }
    Ok(())
}

/// Runs the decoder over `len` embedded rows.
pub fn forward<T: Real>(params: &ModelParams<T>, embedded: &[T], len: usize) -> Result<ForwardTrace<T>> {
    let c = *params.config();
    check_len(&c, len)?;
    if embedded.len() != len * c.d_model {
        return Err(Error::invalid(format!("expected {len} x {} embeddings, got {}", c.d_model, embedded.len())));
    }
    let d = c.d_model;
    let l = params.layout();
    let mut x = embedded.to_vec();
    if let Some(pos) = l.pos {
        let pos = params.get(pos);
        x.iter_mut().zip(pos).for_each(|(a, &p)| *a = *a + p);
    }
    let mut layers = Vec::with_capacity(c.n_layers);
    for ls in &l.layers {
        let (trace, out) = layer_forward(params, &c, ls, x, len);
        layers.push(trace);
        x = out;
    }
    let mut xhat_f = vec![T::zero(); len * d];
    let mut out_f = vec![T::zero(); len * d];
    let mut rstd_f = vec![T::zero(); len];
    layer_norm(&x, d, params.get(l.lnf_g), params.get(l.lnf_b), &mut xhat_f, &mut out_f, &mut rstd_f);
    let mut predictions = vec![T::zero(); len * 3];
    linear(&out_f, d, params.get(l.head_w), params.get(l.head_b), &mut predictions);
    Ok(ForwardTrace {
        generation: params.generation(),
        config: c,
        len,
        features: None,
        layers,
        xhat_f,
        rstd_f,
        out_f,
        predictions,
    })
}

/// Embeds patch rows and runs the decoder, keeping the features so the
/// backward pass also reaches the embedding weights.
pub fn forward_features<T: Real>(params: &ModelParams<T>, features: &[T], len: usize) -> Result<ForwardTrace<T>> {
    check_len(params.config(), len)?;
    let z = embed(params, features, len)?;
    let mut trace = forward(params, &z, len)?;
    trace.features = Some(features.to_vec());
    Ok(trace)
}

fn layer_forward<T: Real>(
    params: &ModelParams<T>,
    c: &ModelConfig,
    ls: &LayerSlots,
    x_in: Vec<T>,
    len: usize,
) -> (LayerTrace<T>, Vec<T>) {
    let d = c.d_model;
    let f = c.d_ff();
    let mut x_mid = x_in.clone();
    let attn = ls.attn.map(|s| {
        let mut xhat = vec![T::zero(); len * d];
        let mut a = vec![T::zero(); len * d];
        let mut rstd = vec![T::zero(); len];
        layer_norm(&x_in, d, params.get(s.ln1_g), params.get(s.ln1_b), &mut xhat, &mut a, &mut rstd);
        let mut q = vec![T::zero(); len * d];
        let mut k = vec![T::zero(); len * d];
        let mut v = vec![T::zero(); len * d];
        linear(&a, d, params.get(s.wq), params.get(s.bq), &mut q);
        linear(&a, d, params.get(s.wk), params.get(s.bk), &mut k);
        linear(&a, d, params.get(s.wv), params.get(s.bv), &mut v);
        let dk = c.head_dim();
        let scale = T::one() / T::c(dk as f64).sqrt();
        let mut probs = vec![T::zero(); c.n_heads * len * len];
        let mut o = vec![T::zero(); len * d];
        for h in 0..c.n_heads {
            let off = h * dk;
            for i in 0..len {
                let row = &mut probs[(h * len + i) * len..(h * len + i + 1) * len];
                attend_row(
                    &q[i * d + off..i * d + off + dk],
                    &k,
                    &v,
                    d,
                    off,
                    i,
                    scale,
                    row,
                    &mut o[i * d + off..i * d + off + dk],
                );
            }
        }
        let mut proj = vec![T::zero(); len * d];
        linear(&o, d, params.get(s.wo), params.get(s.bo), &mut proj);
        x_mid.iter_mut().zip(&proj).for_each(|(a, &p)| *a = *a + p);
        AttnTrace { xhat, rstd, a, q, k, v, probs, o }
    });
    let mut xhat2 = vec![T::zero(); len * d];
    let mut m = vec![T::zero(); len * d];
    let mut rstd2 = vec![T::zero(); len];
    layer_norm(&x_mid, d, params.get(ls.ln2_g), params.get(ls.ln2_b), &mut xhat2, &mut m, &mut rstd2);
    let mut h = vec![T::zero(); len * f];
    linear(&m, d, params.get(ls.w1), params.get(ls.b1), &mut h);
    let gh: Vec<T> = h.iter().map(|&v| gelu(v)).collect();
    let mut out = vec![T::zero(); len * d];
    linear(&gh, f, params.get(ls.w2), params.get(ls.b2), &mut out);
    out.iter_mut().zip(&x_mid).for_each(|(a, &r)| *a = r + *a);
    (LayerTrace { attn, xhat2, rstd2, m, h, gh }, out)
}

/// Reverse pass: accumulates `d(<predictions, d_predictions>)/d(params)`
/// into `grads` and returns the gradient with respect to the embedded rows.
pub fn backward_into<T: Real>(
    trace: &ForwardTrace<T>,
    d_predictions: &[T],
    params: &ModelParams<T>,
    grads: &mut ModelParams<T>,
) -> Result<Vec<T>> {
    if trace.generation != params.generation() || trace.config != *params.config() {
        return Err(Error::StaleTrace);
    }
    let len = trace.len;
    if d_predictions.len() != 3 * len {
        return Err(Error::invalid(format!("expected {} prediction gradients, got {}", 3 * len, d_predictions.len())));
    }
    let c = trace.config;
    let d = c.d_model;
    let f = c.d_ff();
    let l = params.layout().clone();
    let g = grads.data_mut();

    // Head and final norm.
    let mut d_out_f = vec![T::zero(); len * d];
    {
        let (gw, gb) = split2(g, l.head_w, l.head_b);
        linear_backward(&trace.out_f, d, params.get(l.head_w), d_predictions, gw, gb, Some(&mut d_out_f));
    }
    let mut dx = vec![T::zero(); len * d];
    {
        let (gg, gb) = split2(g, l.lnf_g, l.lnf_b);
        layer_norm_backward(&trace.xhat_f, &trace.rstd_f, d, params.get(l.lnf_g), &d_out_f, gg, gb, &mut dx);
    }

    for (ls, lt) in l.layers.iter().zip(&trace.layers).rev() {
        // Feed-forward: out = x_mid + W2 gelu(W1 ln2(x_mid) + b1) + b2.
        let mut d_gh = vec![T::zero(); len * f];
        {
            let (gw, gb) = split2(g, ls.w2, ls.b2);
            linear_backward(&lt.gh, f, params.get(ls.w2), &dx, gw, gb, Some(&mut d_gh));
        }
        let d_h: Vec<T> = d_gh.iter().zip(&lt.h).map(|(&dg, &h)| dg * gelu_grad(h)).collect();
        let mut d_m = vec![T::zero(); len * d];
        {
            let (gw, gb) = split2(g, ls.w1, ls.b1);
            linear_backward(&lt.m, d, params.get(ls.w1), &d_h, gw, gb, Some(&mut d_m));
        }
        {
            let (gg, gb) = split2(g, ls.ln2_g, ls.ln2_b);
            layer_norm_backward(&lt.xhat2, &lt.rstd2, d, params.get(ls.ln2_g), &d_m, gg, gb, &mut dx);
        }
        // dx now holds d(x_mid).
        if let (Some(s), Some(at)) = (ls.attn, &lt.attn) {
            let mut d_o = vec![T::zero(); len * d];
            {
                let (gw, gb) = split2(g, s.wo, s.bo);
                linear_backward(&at.o, d, params.get(s.wo), &dx, gw, gb, Some(&mut d_o));
            }
            let dk = c.head_dim();
            let scale = T::one() / T::c(dk as f64).sqrt();
            let mut dq = vec![T::zero(); len * d];
            let mut dkk = vec![T::zero(); len * d];
            let mut dv = vec![T::zero(); len * d];
            let mut dp = vec![T::zero(); len];
            for h in 0..c.n_heads {
                let off = h * dk;
                for i in 0..len {
                    let p = &at.probs[(h * len + i) * len..(h * len + i) * len + i + 1];
                    let doi = &d_o[i * d + off..i * d + off + dk];
                    let mut dsum = T::zero();
                    for j in 0..=i {
                        dp[j] = dot(doi, &at.v[j * d + off..j * d + off + dk]);
                        dsum = dsum + p[j] * dp[j];
                        axpy(p[j], doi, &mut dv[j * d + off..j * d + off + dk]);
                    }
                    for j in 0..=i {
                        let ds = p[j] * (dp[j] - dsum) * scale;
                        if ds == T::zero() {
                            continue;
                        }
                        axpy(ds, &at.k[j * d + off..j * d + off + dk], &mut dq[i * d + off..i * d + off + dk]);
                        axpy(ds, &at.q[i * d + off..i * d + off + dk], &mut dkk[j * d + off..j * d + off + dk]);
                    }
                }
            }
            let mut d_a = vec![T::zero(); len * d];
            for (w, b, dy) in [(s.wq, s.bq, &dq), (s.wk, s.bk, &dkk), (s.wv, s.bv, &dv)] {
                let (gw, gb) = split2(g, w, b);
                linear_backward(&at.a, d, params.get(w), dy, gw, gb, Some(&mut d_a));
            }
            let (gg, gb) = split2(g, s.ln1_g, s.ln1_b);
            layer_norm_backward(&at.xhat, &at.rstd, d, params.get(s.ln1_g), &d_a, gg, gb, &mut dx);
        }
    }

    // dx is d(embedded + pos).
    if let Some(pos) = l.pos {
        let gp = &mut g[pos.range()];
        gp[..len * d].iter_mut().zip(&dx).for_each(|(a, &b)| *a = *a + b);
    }
    if let Some(features) = &trace.features {
        let pw = c.patch_width();
        let ew = c.embed_width();
        let (gw, gb) = split2(g, l.embed_w, l.embed_b);
        for (row, dz) in features.chunks_exact(pw).zip(dx.chunks_exact(d)) {
            linear_backward(embed_input(&c, row), ew, params.get(l.embed_w), dz, gw, gb, None);
        }
    }
    Ok(dx)
}

/// Fresh gradient buffer for one trace.
pub fn backward<T: Real>(trace: &ForwardTrace<T>, d_predictions: &[T], params: &ModelParams<T>) -> Result<ModelParams<T>> {
    let mut grads = params.zeros_like();
    backward_into(trace, d_predictions, params, &mut grads)?;
    Ok(grads)
}

/// Two disjoint mutable tensor views; `a` must precede `b` in the buffer.
fn split2<T>(g: &mut [T], a: super::params::Slot, b: super::params::Slot) -> (&mut [T], &mut [T]) {
    debug_assert!(a.offset + a.len <= b.offset);
    let (lo, hi) = g.split_at_mut(b.offset);
    (&mut lo[a.range()], &mut hi[..b.len])
}
