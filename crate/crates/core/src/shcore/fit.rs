use super::basis::{sh_basis_into, sh_count, sh_orders};
use super::scheme::GradientScheme;
use super::volume::Volume;
use rayon::prelude::*;

use crate::{Error, Real, Result};

/// Default Laplace-Beltrami regularisation weight.
pub const DEFAULT_LAMBDA: f64 = 0.006;

/// Regularised least-squares projector from b0-normalised signals to SH
/// coefficients. Minimises `|B c - s|^2 + lambda |L c|^2` with `L` the
/// diagonal `l(l+1)`; the solution operator is precomputed once per scheme.
#[derive(Clone, Debug)]
pub struct ShFitter<T> {
    l_max: usize,
    weighted: Vec<usize>,
    b0: Vec<usize>,
    n_signals: usize,
    /// `ncoef x nweighted`, row-major.
    projector: Vec<T>,
}

impl<T: Real> ShFitter<T> {
    pub fn new(scheme: &GradientScheme, l_max: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        let ncoef = sh_count(l_max);
        let weighted = scheme.weighted_indices();
        let nw = weighted.len();
        if lambda == 0.0 && nw < ncoef {
            return Err(Error::FitSingular(format!(
                "{nw} diffusion-weighted directions cannot determine {ncoef} coefficients"
            )));
        }
        if nw == 0 {
            return Err(Error::FitSingular("no diffusion-weighted directions".into()));
        }

        let mut basis = vec![T::zero(); nw * ncoef];
        for (r, &i) in weighted.iter().enumerate() {
            let d = scheme.directions()[i];
            let dir = [T::c(d[0]), T::c(d[1]), T::c(d[2])];
            sh_basis_into(l_max, &dir, &mut basis[r * ncoef..(r + 1) * ncoef])?;
        }

        // Normal matrix BtB + lambda L^2.
        let mut normal = vec![T::zero(); ncoef * ncoef];
        for r in 0..nw {
            let row = &basis[r * ncoef..(r + 1) * ncoef];
            for a in 0..ncoef {
                for b in 0..ncoef {
                    normal[a * ncoef + b] = normal[a * ncoef + b] + row[a] * row[b];
                }
            }
        }
        let lam = T::c(lambda);
        for (a, &l) in sh_orders(l_max).iter().enumerate() {
            let ll = T::c((l * (l + 1)) as f64);
            normal[a * ncoef + a] = normal[a * ncoef + a] + lam * ll * ll;
        }

        let chol = cholesky(&normal, ncoef)?;
        // projector = (BtB + lambda L^2)^-1 Bt, one column per measurement.
        let mut projector = vec![T::zero(); ncoef * nw];
        let mut rhs = vec![T::zero(); ncoef];
        for r in 0..nw {
            rhs.copy_from_slice(&basis[r * ncoef..(r + 1) * ncoef]);
            cholesky_solve(&chol, ncoef, &mut rhs);
            for a in 0..ncoef {
                projector[a * nw + r] = rhs[a];
            }
        }

        Ok(Self { l_max, weighted, b0: scheme.b0_indices(), n_signals: scheme.len(), projector })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn n_coefficients(&self) -> usize {
        sh_count(self.l_max)
    }

    /// Fits one voxel's raw signals (one per scheme entry).
    pub fn fit(&self, signals: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.n_coefficients()];
        self.fit_into(signals, &mut out)?;
        Ok(out)
    }

    pub fn fit_into(&self, signals: &[T], out: &mut [T]) -> Result<()> {
        if signals.len() != self.n_signals {
            return Err(Error::invalid(format!(
                "expected {} signals, got {}",
                self.n_signals,
                signals.len()
            )));
        }
        let b0_mean = self.b0.iter().map(|&i| signals[i]).sum::<T>() / T::c(self.b0.len() as f64);
        if !(b0_mean > T::zero()) {
            return Err(Error::invalid(format!("mean b0 signal must be positive, got {b0_mean}")));
        }
        let inv = T::one() / b0_mean;
        let nw = self.weighted.len();
        for (a, o) in out.iter_mut().enumerate() {
            let row = &self.projector[a * nw..(a + 1) * nw];
            *o = row
                .iter()
                .zip(&self.weighted)
                .fold(T::zero(), |acc, (&p, &i)| acc + p * signals[i] * inv);
        }
        Ok(())
    }
}

impl<T: Real> ShFitter<T> {
    /// Fits every voxel of a DWI volume. Voxels without a positive b0
    /// (outside the acquisition) get all-zero coefficients.
    pub fn fit_volume(&self, dwi: &Volume<T>) -> Result<Volume<T>> {
        if dwi.channels() != self.n_signals {
            return Err(Error::invalid(format!(
                "volume has {} channels, scheme has {} entries",
                dwi.channels(),
                self.n_signals
            )));
        }
        let ncoef = self.n_coefficients();
        let mut out = dwi.zeros_like(ncoef);
        out.data_mut()
            .par_chunks_mut(ncoef)
            .zip(dwi.data().par_chunks(self.n_signals))
            .for_each(|(o, s)| {
                let b0_positive = self.b0.iter().map(|&i| s[i]).sum::<T>() > T::zero();
                if b0_positive {
                    self.fit_into(s, o).expect("signal length checked");
                }
            });
        Ok(out)
    }
}

/// Single-voxel convenience wrapper around [`ShFitter`].
pub fn fit_sh<T: Real>(
    signals: &[T],
    scheme: &GradientScheme,
    l_max: usize,
    lambda: f64,
) -> Result<Vec<T>> {
    ShFitter::new(scheme, l_max, lambda)?.fit(signals)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
fn cholesky<T: Real>(a: &[T], n: usize) -> Result<Vec<T>> {
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max);
    let tol = T::epsilon().sqrt() * max_diag;
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > tol) {
            return Err(Error::FitSingular(format!("pivot {j} is {d} (tolerance {tol})")));
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}
