use std::fmt;
use std::str::FromStr;

use crate::{Error, Real, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightingMode {
    Uniform,
    /// Softmax over bundle fractions `N_j / sum N`.
    SoftmaxFraction,
    /// Proportional to `sum N / N_j`.
    InverseFrequency,
}

impl WeightingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightingMode::Uniform => "uniform",
            WeightingMode::SoftmaxFraction => "softmax",
            WeightingMode::InverseFrequency => "invfreq",
        }
    }
}

impl fmt::Display for WeightingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightingMode::Uniform),
            "softmax" | "softmax_fraction" => Ok(WeightingMode::SoftmaxFraction),
            "invfreq" | "inverse_frequency" => Ok(WeightingMode::InverseFrequency),
            _ => Err(Error::InvalidConfig(format!("unknown weighting `{s}`"))),
        }
    }
}

/// Per-bundle loss weights, indexed by bundle label; they sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleWeights {
    beta: Vec<f64>,
}

impl BundleWeights {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() || beta.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::invalid("bundle weights must be positive and finite"));
        }
        let s: f64 = beta.iter().sum();
        Ok(Self { beta: beta.into_iter().map(|b| b / s).collect() })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn get(&self, label: u32) -> Result<f64> {
        self.beta
            .get(label as usize)
            .copied()
            .ok_or_else(|| Error::invalid(format!("label {label} has no weight ({} bundles)", self.beta.len())))
    }
}

pub fn bundle_weights(counts: &[usize], mode: WeightingMode) -> Result<BundleWeights> {
    let total: usize = counts.iter().sum();
    if counts.is_empty() || total == 0 {
        return Err(Error::invalid("bundle counts are all zero"));
    }
    let total = total as f64;
    let beta = match mode {
        WeightingMode::Uniform => vec![1.0; counts.len()],
        WeightingMode::SoftmaxFraction => counts.iter().map(|&n| (n as f64 / total).exp()).collect(),
        WeightingMode::InverseFrequency => {
            if let Some(j) = counts.iter().position(|&n| n == 0) {
                return Err(Error::invalid(format!("bundle {j} has no streamlines; inverse frequency undefined")));
            }
            counts.iter().map(|&n| total / n as f64).collect()
        }
    };
    BundleWeights::new(beta)
}

/// One sequence's contribution to the loss: predictions and targets over
/// its valid prefix.
pub struct LossItem<'a, T> {
    pub predictions: &'a [T],
    pub targets: &'a [Vec3<T>],
    pub label: u32,
}

/// One sequence's loss term `beta / (n T) sum_t e_t` and its gradient,
/// where `e_t` is the squared (or plain) error norm at step `t`.
pub(crate) fn item_loss<T: Real>(
    predictions: &[T],
    targets: &[Vec3<T>],
    beta: T,
    n: usize,
    squared: bool,
) -> Result<(T, Vec<T>)> {
    let tv = targets.len();
    if predictions.len() != 3 * tv {
        return Err(Error::invalid(format!("{} predictions for {tv} targets", predictions.len() / 3)));
    }
    let mut g = vec![T::zero(); 3 * tv];
    if tv == 0 {
        return Ok((T::zero(), g));
    }
    let k = beta / (T::c(n as f64) * T::c(tv as f64));
    let mut sum = T::zero();
    for (t, y) in targets.iter().enumerate() {
        let p = &predictions[3 * t..3 * t + 3];
        let e = [p[0] - y[0], p[1] - y[1], p[2] - y[2]];
        let sq = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
        if squared {
            sum = sum + sq;
            for a in 0..3 {
                g[3 * t + a] = T::c(2.0) * k * e[a];
            }
        } else {
            let norm = sq.sqrt();
            sum = sum + norm;
            if norm > T::zero() {
                for a in 0..3 {
                    g[3 * t + a] = k * e[a] / norm;
                }
            }
        }
    }
    Ok((k * sum, g))
}

/// `(1/N) sum_i beta_i (1/T_i) sum_t |p - y|^2` (or the unsquared norm).
/// Returns the loss and `d loss / d predictions` per item.
pub fn weighted_loss<T: Real>(items: &[LossItem<'_, T>], weights: &BundleWeights, squared: bool) -> Result<(T, Vec<Vec<T>>)> {
    if items.is_empty() {
        return Err(Error::invalid("loss over an empty batch"));
    }
    let mut total = T::zero();
    let mut grads = Vec::with_capacity(items.len());
    for it in items {
        let beta = T::c(weights.get(it.label)?);
        let (l, g) = item_loss(it.predictions, it.targets, beta, items.len(), squared)?;
        total = total + l;
        grads.push(g);
    }
    Ok((total, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        assert_eq!(bundle_weights(&[10, 10], WeightingMode::SoftmaxFraction).unwrap().as_slice(), &[0.5, 0.5]);
        let w = bundle_weights(&[1, 2], WeightingMode::SoftmaxFraction).unwrap();
        let z = (1.0f64 / 3.0).exp() + (2.0f64 / 3.0).exp();
        assert!((w.as_slice()[0] - (1.0f64 / 3.0).exp() / z).abs() < 1e-15);
        assert!((w.as_slice()[0] - 0.4175).abs() < 1e-4);
        let w = bundle_weights(&[100, 300], WeightingMode::InverseFrequency).unwrap();
        assert!((w.as_slice()[0] - 0.75).abs() < 1e-15 && (w.as_slice()[1] - 0.25).abs() < 1e-15);
        assert_eq!(bundle_weights(&[3, 9, 1], WeightingMode::Uniform).unwrap().as_slice(), &[1.0 / 3.0; 3]);
        assert!(bundle_weights(&[0, 0], WeightingMode::Uniform).is_err());
        assert!(bundle_weights(&[0, 5], WeightingMode::InverseFrequency).is_err());
        assert!(bundle_weights(&[0, 5], WeightingMode::SoftmaxFraction).is_ok());
    }

    #[test]
    fn weights_are_scale_invariant() {
        let a = BundleWeights::new(vec![1.0, 2.0, 5.0]).unwrap();
        let b = BundleWeights::new(vec![3.0, 6.0, 15.0]).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn single_step_example() {
        let w = BundleWeights::new(vec![1.0]).unwrap();
        let item = LossItem { predictions: &[1.0f64, 0.0, 0.0], targets: &[[0.0, 0.0, 0.0]], label: 0 };
        let (l, g) = weighted_loss(&[item], &w, true).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g[0], vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn perfect_fit_and_bad_label() {
        let w = BundleWeights::new(vec![1.0, 1.0]).unwrap();
        let y = [[0.0f64, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let p = [0.0, 1.0, 0.0, 1.0, 0.0, 0.0];
        let (l, g) = weighted_loss(&[LossItem { predictions: &p, targets: &y, label: 1 }], &w, true).unwrap();
        assert_eq!(l, 0.0);
        assert!(g[0].iter().all(|&v| v == 0.0));
        assert!(weighted_loss(&[LossItem { predictions: &p, targets: &y, label: 2 }], &w, true).is_err());
    }
}
