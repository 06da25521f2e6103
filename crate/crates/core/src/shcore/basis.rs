use crate::{normalize3, Error, Real, Result, Vec3};

/// Number of coefficients of the symmetric basis up to order `l_max`.
pub fn sh_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 2) / 2
}

/// The order `l` of every coefficient, in storage order.
pub fn sh_orders(l_max: usize) -> Vec<usize> {
    (0..=l_max)
        .step_by(2)
        .flat_map(|l| std::iter::repeat_n(l, 2 * l + 1))
        .collect()
}

fn check_order(l_max: usize) -> Result<()> {
    if !l_max.is_multiple_of(2) {
        return Err(Error::invalid(format!("l_max must be even, got {l_max}")));
    }
    if l_max > 8 {
        return Err(Error::invalid(format!("l_max must be at most 8, got {l_max}")));
    }
    Ok(())
}

/// Real symmetric SH basis evaluated at `direction`.
///
/// Index of `(l, m)` is `l(l-1)/2 + l + m`. For `m < 0` the function is
/// `sqrt(2) K P_l^|m| cos(|m| phi)`, for `m > 0` it is
/// `sqrt(2) K P_l^m sin(m phi)`, and `K P_l^0` for `m = 0`.
pub fn sh_basis<T: Real>(l_max: usize, direction: &Vec3<T>) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); sh_count(l_max)];
    sh_basis_into(l_max, direction, &mut out)?;
    Ok(out)
}

pub fn sh_basis_into<T: Real>(l_max: usize, direction: &Vec3<T>, out: &mut [T]) -> Result<()> {
    check_order(l_max)?;
    if out.len() != sh_count(l_max) {
        return Err(Error::invalid(format!(
            "basis row needs {} slots, got {}",
            sh_count(l_max),
            out.len()
        )));
    }
    let d = normalize3(direction).ok_or_else(|| Error::invalid("zero-norm direction"))?;
    // Evaluate in f64; the recurrences lose digits quickly in f32.
    let x = d[2].to_f64().unwrap().clamp(-1.0, 1.0);
    let phi = d[1].to_f64().unwrap().atan2(d[0].to_f64().unwrap());
    let legendre = associated_legendre(l_max, x);
    let sqrt2 = std::f64::consts::SQRT_2;
    for l in (0..=l_max).step_by(2) {
        let offset = if l == 0 { 0 } else { l * (l - 1) / 2 };
        for m in -(l as i64)..=(l as i64) {
            let am = m.unsigned_abs() as usize;
            let k = normalisation(l, am);
            let p = legendre[l][am];
            let v = if m < 0 {
                sqrt2 * k * p * (am as f64 * phi).cos()
            } else if m == 0 {
                k * p
            } else {
                sqrt2 * k * p * (am as f64 * phi).sin()
            };
            out[offset + (m + l as i64) as usize] = T::c(v);
        }
    }
    Ok(())
}

/// `P_l^m(x)` with the Condon-Shortley phase, for `0 <= m <= l <= l_max`.
fn associated_legendre(l_max: usize, x: f64) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; l_max + 1]; l_max + 1];
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for m in 0..=l_max {
        if m > 0 {
            pmm *= -((2 * m - 1) as f64) * s;
        }
        p[m][m] = pmm;
        if m < l_max {
            p[m + 1][m] = x * (2 * m + 1) as f64 * pmm;
        }
        for l in (m + 2)..=l_max {
            p[l][m] = ((2 * l - 1) as f64 * x * p[l - 1][m] - (l + m - 1) as f64 * p[l - 2][m])
                / (l - m) as f64;
        }
    }
    p
}

fn normalisation(l: usize, m: usize) -> f64 {
    // (l - m)! / (l + m)!
    let ratio: f64 = ((l - m + 1)..=(l + m)).map(|k| 1.0 / k as f64).product();
    ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * ratio).sqrt()
}
