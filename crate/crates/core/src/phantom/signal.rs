use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::curve::perpendicular;
use crate::shcore::GradientScheme;
use crate::{cross3, dot3, Vec3};

/// `g^T D g` for a tensor with eigenvalues `lambda` whose principal axis is
/// `e1` (unit); the minor axes come from a fixed perpendicular frame.
pub fn tensor_quadratic(lambda: [f64; 3], e1: &Vec3<f64>, g: &Vec3<f64>) -> f64 {
    let e2 = perpendicular(e1);
    let e3 = cross3(e1, &e2);
    lambda[0] * dot3(g, e1).powi(2) + lambda[1] * dot3(g, &e2).powi(2) + lambda[2] * dot3(g, &e3).powi(2)
}

/// Noiseless multi-tensor signal with equal fractions over `directions`;
/// an empty slice means isotropic diffusion at the mean diffusivity.
pub fn multi_tensor_signal(
    scheme: &GradientScheme,
    s0: f64,
    lambda: [f64; 3],
    directions: &[Vec3<f64>],
    out: &mut [f64],
) {
    let md = (lambda[0] + lambda[1] + lambda[2]) / 3.0;
    for (i, o) in out.iter_mut().enumerate() {
        let b = scheme.bvalues()[i];
        let g = scheme.directions()[i];
        *o = if b == 0.0 {
            s0
        } else if directions.is_empty() {
            s0 * (-b * md).exp()
        } else {
            let f = 1.0 / directions.len() as f64;
            s0 * directions.iter().map(|d| f * (-b * tensor_quadratic(lambda, d, &g)).exp()).sum::<f64>()
        };
    }
}

/// Magnitude of the signal plus complex Gaussian noise of std `sigma`.
pub fn add_rician(signal: &mut [f64], sigma: f64, rng: &mut impl Rng) {
    for s in signal.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *s = (*s + sigma * re).hypot(sigma * im);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> GradientScheme {
        GradientScheme::new(
            vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![0.0, 1000.0, 1000.0, 1000.0],
        )
        .unwrap()
    }

    const LAMBDA: [f64; 3] = [1.7e-3, 0.3e-3, 0.3e-3];

    #[test]
    fn single_population_along_x() {
        let mut out = [0.0; 4];
        multi_tensor_signal(&scheme(), 100.0, LAMBDA, &[[1.0, 0.0, 0.0]], &mut out);
        assert_eq!(out[0], 100.0);
        assert!((out[1] - 100.0 * (-1.7f64).exp()).abs() < 1e-12);
        assert!((out[1] / 100.0 - 0.1827).abs() < 1e-4);
        assert!((out[2] - 100.0 * (-0.3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_mixture() {
        let mut out = [0.0; 4];
        multi_tensor_signal(&scheme(), 1.0, LAMBDA, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], &mut out);
        let want = 0.5 * ((-1.7f64).exp() + (-0.3f64).exp());
        assert!((out[1] - want).abs() < 1e-12);
        assert!((out[2] - want).abs() < 1e-12);
        assert!((out[3] - (-0.3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn isotropic_background() {
        let mut out = [0.0; 4];
        multi_tensor_signal(&scheme(), 2.0, LAMBDA, &[], &mut out);
        let want = 2.0 * (-1000.0 * 2.3e-3 / 3.0f64).exp();
        assert!(out[1..].iter().all(|&s| (s - want).abs() < 1e-12));
    }
}
