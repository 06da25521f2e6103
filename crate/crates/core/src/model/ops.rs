//! Dense kernels shared by the batch forward pass, the incremental decoder
//! and the backward pass. Per-row results depend only on that row, so the
//! batch and incremental paths agree bit for bit.

use crate::Real;

pub(crate) const LN_EPS: f64 = 1e-5;

/// Dot product with eight independent accumulators.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += k * x`
#[inline]
pub(crate) fn axpy<T: Real>(k: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + k * xi;
    }
}

/// One row: `y = W x + b`, `W` is `[out, in]`.
#[inline]
pub(crate) fn linear_row<T: Real>(x: &[T], w: &[T], b: &[T], y: &mut [T]) {
    let n_in = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        *yo = dot(&w[o * n_in..(o + 1) * n_in], x) + b[o];
    }
}

/// Rows of `x` (`n x in`) mapped to rows of `y` (`n x out`).
pub(crate) fn linear<T: Real>(x: &[T], n_in: usize, w: &[T], b: &[T], y: &mut [T]) {
    let n_out = b.len();
    for (xr, yr) in x.chunks_exact(n_in).zip(y.chunks_exact_mut(n_out)) {
        linear_row(xr, w, b, yr);
    }
}

/// Accumulates `dW += dy^T x`, `db += sum dy` and, if given, `dx += dy W`.
pub(crate) fn linear_backward<T: Real>(
    x: &[T],
    n_in: usize,
    w: &[T],
    dy: &[T],
    dw: &mut [T],
    db: &mut [T],
    mut dx: Option<&mut [T]>,
) {
    let n_out = db.len();
    for (r, (xr, dyr)) in x.chunks_exact(n_in).zip(dy.chunks_exact(n_out)).enumerate() {
        for o in 0..n_out {
            let g = dyr[o];
            if g == T::zero() {
                continue;
            }
            db[o] = db[o] + g;
            axpy(g, xr, &mut dw[o * n_in..(o + 1) * n_in]);
            if let Some(dx) = dx.as_deref_mut() {
                axpy(g, &w[o * n_in..(o + 1) * n_in], &mut dx[r * n_in..(r + 1) * n_in]);
            }
        }
    }
}

/// Layer norm of one row; writes the normalised row to `xhat` and returns
/// the reciprocal standard deviation.
#[inline]
pub(crate) fn layer_norm_row<T: Real>(x: &[T], g: &[T], b: &[T], xhat: &mut [T], y: &mut [T]) -> T {
    let n = T::c(x.len() as f64);
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let rstd = T::one() / (var + T::c(LN_EPS)).sqrt();
    for i in 0..x.len() {
        xhat[i] = (x[i] - mean) * rstd;
        y[i] = g[i] * xhat[i] + b[i];
    }
    rstd
}

pub(crate) fn layer_norm<T: Real>(x: &[T], d: usize, g: &[T], b: &[T], xhat: &mut [T], y: &mut [T], rstd: &mut [T]) {
    for (r, rs) in rstd.iter_mut().enumerate() {
        let s = r * d..(r + 1) * d;
        *rs = layer_norm_row(&x[s.clone()], g, b, &mut xhat[s.clone()], &mut y[s]);
    }
}

/// Accumulates gain/bias gradients and adds the input gradient to `dx`.
pub(crate) fn layer_norm_backward<T: Real>(
    xhat: &[T],
    rstd: &[T],
    d: usize,
    g: &[T],
    dy: &[T],
    dg: &mut [T],
    db: &mut [T],
    dx: &mut [T],
) {
    let n = T::c(d as f64);
    let mut dxhat = vec![T::zero(); d];
    for (r, &rs) in rstd.iter().enumerate() {
        let s = r * d..(r + 1) * d;
        let (xh, dyr) = (&xhat[s.clone()], &dy[s.clone()]);
        let mut m1 = T::zero();
        let mut m2 = T::zero();
        for i in 0..d {
            dg[i] = dg[i] + dyr[i] * xh[i];
            db[i] = db[i] + dyr[i];
            dxhat[i] = dyr[i] * g[i];
            m1 = m1 + dxhat[i];
            m2 = m2 + dxhat[i] * xh[i];
        }
        m1 = m1 / n;
        m2 = m2 / n;
        let dxr = &mut dx[s];
        for i in 0..d {
            dxr[i] = dxr[i] + rs * (dxhat[i] - m1 - xh[i] * m2);
        }
    }
}

const GELU_A: f64 = 0.044715;

/// Tanh-approximated GELU.
#[inline]
pub(crate) fn gelu<T: Real>(x: T) -> T {
    let k = T::c((2.0 / std::f64::consts::PI).sqrt());
    let u = k * (x + T::c(GELU_A) * x * x * x);
    T::c(0.5) * x * (T::one() + u.tanh())
}

#[inline]
pub(crate) fn gelu_grad<T: Real>(x: T) -> T {
    let k = T::c((2.0 / std::f64::consts::PI).sqrt());
    let u = k * (x + T::c(GELU_A) * x * x * x);
    let th = u.tanh();
    let du = k * (T::one() + T::c(3.0 * GELU_A) * x * x);
    T::c(0.5) * (T::one() + th) + T::c(0.5) * x * (T::one() - th * th) * du
}

/// Causal attention for query row `i` of one head. `keys`/`values` hold
/// rows `0..=i` with stride `stride`, the head's slice starting at `off`.
/// Writes the softmax weights for `j <= i` into `probs[..=i]` and the
/// weighted value sum into `out`.
#[inline]
pub(crate) fn attend_row<T: Real>(
    q: &[T],
    keys: &[T],
    values: &[T],
    stride: usize,
    off: usize,
    i: usize,
    scale: T,
    probs: &mut [T],
    out: &mut [T],
) {
    let dk = q.len();
    let mut max = T::neg_infinity();
    for j in 0..=i {
        let s = dot(q, &keys[j * stride + off..j * stride + off + dk]) * scale;
        probs[j] = s;
        if s > max {
            max = s;
        }
    }
    let mut sum = T::zero();
    for p in probs[..=i].iter_mut() {
        *p = (*p - max).exp();
        sum = sum + *p;
    }
    let inv = T::one() / sum;
    out.fill(T::zero());
    for j in 0..=i {
        probs[j] = probs[j] * inv;
        axpy(probs[j], &values[j * stride + off..j * stride + off + dk], out);
    }
}
