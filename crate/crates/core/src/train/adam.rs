use crate::model::ModelParams;
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }
}

/// One bias-corrected Adam update. Non-finite gradients leave everything
/// untouched and name the first offending tensor.
pub fn adam_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::TrainingDiverged { tensor: name.to_string() });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::c(cfg.beta1), T::c(cfg.beta2));
    let c1 = T::one() - T::c(cfg.beta1.powi(t));
    let c2 = T::one() - T::c(cfg.beta2.powi(t));
    let lr = T::c(cfg.learning_rate);
    let eps = T::c(cfg.eps);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (((p, &g), m), v) in params.data_mut().iter_mut().zip(grads.data()).zip(m).zip(v) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let mh = *m / c1;
        let vh = *v / c2;
        *p = *p - lr * mh / (vh.sqrt() + eps);
    }
    Ok(())
}
