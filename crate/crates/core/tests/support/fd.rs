// Central finite-difference oracle over a flat parameter vector.
#![allow(dead_code)]

/// Worst relative disagreement between `analytic` and central differences
/// of `f` at `x`. Entries where both magnitudes are below `floor` are
/// compared absolutely against `floor`.
pub fn max_relative_error(
    x: &mut [f64],
    analytic: &[f64],
    eps: f64,
    floor: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let up = f(x);
        x[i] = orig - eps;
        let down = f(x);
        x[i] = orig;
        let fd = (up - down) / (2.0 * eps);
        let scale = analytic[i].abs().max(fd.abs()).max(floor);
        let rel = (analytic[i] - fd).abs() / scale;
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    worst
}
