use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{bundle_weights, item_loss, BundleWeights, WeightingMode};
use crate::config::KeyValues;
use crate::model::{backward_into, forward_features, ModelParams};
use crate::shcore::Volume;
use crate::streamlines::{make_train_sequence, resample, Tractogram, TrainSequence};
use crate::{Error, Real, Result};

/// Sequences per parallel work unit. Fixed so gradient sums do not depend
/// on the thread count.
const CHUNK: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimiser steps even mid-epoch.
    pub max_steps: Option<usize>,
    pub adam: AdamConfig,
    /// `None` trains on the plain (unweighted) mean squared error.
    pub weighting: Option<WeightingMode>,
    /// Squared error per step; `false` uses the Euclidean norm.
    pub squared: bool,
    pub seed: u64,
    /// Streamline step size, mm.
    pub step_size: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            epochs: 10,
            max_steps: None,
            adam: AdamConfig::default(),
            weighting: Some(WeightingMode::InverseFrequency),
            squared: true,
            seed: 0,
            step_size: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) || !(self.adam.eps > 0.0) {
            return Err(Error::InvalidConfig("adam betas must lie in [0, 1) and eps be positive".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidConfig("step_size must be positive".into()));
        }
        Ok(())
    }

    /// Reads `train.*` keys over `base`.
    pub fn from_kv(kv: &KeyValues, base: TrainConfig) -> Result<Self> {
        let weighting = match kv.raw("train.weighting") {
            None => base.weighting,
            Some("none") => None,
            Some(_) => Some(kv.require::<WeightingMode>("train.weighting")?),
        };
        let max_steps = match kv.get::<usize>("train.max_steps")? {
            Some(0) => None,
            Some(n) => Some(n),
            None => base.max_steps,
        };
        let c = Self {
            batch_size: kv.get_or("train.batch_size", base.batch_size)?,
            epochs: kv.get_or("train.epochs", base.epochs)?,
            max_steps,
            adam: AdamConfig {
                learning_rate: kv.get_or("train.learning_rate", base.adam.learning_rate)?,
                beta1: kv.get_or("train.beta1", base.adam.beta1)?,
                beta2: kv.get_or("train.beta2", base.adam.beta2)?,
                eps: kv.get_or("train.eps", base.adam.eps)?,
            },
            weighting,
            squared: kv.get_or("train.squared", base.squared)?,
            seed: kv.get_or("train.seed", base.seed)?,
            step_size: kv.get_or("train.step_size", base.step_size)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.insert("train.batch_size", self.batch_size);
        kv.insert("train.epochs", self.epochs);
        kv.insert("train.max_steps", self.max_steps.unwrap_or(0));
        kv.insert("train.learning_rate", self.adam.learning_rate);
        kv.insert("train.beta1", self.adam.beta1);
        kv.insert("train.beta2", self.adam.beta2);
        kv.insert("train.eps", self.adam.eps);
        kv.insert("train.weighting", self.weighting.map_or("none", WeightingMode::as_str));
        kv.insert("train.squared", self.squared);
        kv.insert("train.seed", self.seed);
        kv.insert("train.step_size", self.step_size);
    }
}

/// Resamples each streamline at `step` and cuts its training sequence;
/// streamlines whose patches leave the volume are skipped and counted.
pub fn build_dataset<T: Real>(
    tractogram: &Tractogram,
    sh: &Volume<T>,
    seq_len: usize,
    step: f64,
) -> Result<(Vec<TrainSequence<T>>, usize)> {
    let results: Vec<Result<Option<TrainSequence<T>>>> = tractogram
        .streamlines
        .par_iter()
        .map(|s| {
            let r = resample(s, step)?;
            match make_train_sequence(&r, sh, seq_len, step) {
                Ok(seq) => Ok(Some(seq)),
                Err(Error::OutOfBounds { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(seq) => out.push(seq),
            None => skipped += 1,
        }
    }
    Ok((out, skipped))
}

/// Streamline count per label `0..=max label`.
pub fn label_counts<T>(dataset: &[TrainSequence<T>]) -> Vec<usize> {
    let n = dataset.iter().map(|s| s.bundle_label as usize + 1).max().unwrap_or(0);
    let mut counts = vec![0; n];
    dataset.iter().for_each(|s| counts[s.bundle_label as usize] += 1);
    counts
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: f64,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct FitResult<T> {
    pub params: ModelParams<T>,
    pub best_params: ModelParams<T>,
    pub best_epoch: usize,
    pub weights: Option<BundleWeights>,
    pub curve: Vec<EpochReport>,
}

impl<T> FitResult<T> {
    /// `epoch,loss` lines with a header.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for r in &self.curve {
            s.push_str(&format!("{},{:.9e}\n", r.epoch, r.loss));
        }
        s
    }
}

/// Loss and summed gradient of a batch.
pub fn batch_gradient<T: Real>(
    params: &ModelParams<T>,
    batch: &[&TrainSequence<T>],
    weights: Option<&BundleWeights>,
    squared: bool,
) -> Result<(T, ModelParams<T>)> {
    let n = batch.len();
    let block = params.config().block_size;
    let partial: Vec<Result<(T, ModelParams<T>)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = params.zeros_like();
            let mut loss = T::zero();
            for seq in chunk {
                let len = seq.n_valid().min(block);
                if len == 0 {
                    continue;
                }
                let w = seq.row_width();
                let trace = forward_features(params, &seq.valid_features()[..len * w], len)?;
                let beta = match weights {
                    Some(w) => w.get(seq.bundle_label)?,
                    None => 1.0,
                };
                let (l, dp) = item_loss(trace.predictions(), &seq.valid_targets()[..len], T::c(beta), n, squared)?;
                loss = loss + l;
                backward_into(&trace, &dp, params, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect();
    let mut total = T::zero();
    let mut grads = params.zeros_like();
    for p in partial {
        let (l, g) = p?;
        total = total + l;
        grads.add_assign(&g);
    }
    Ok((total, grads))
}

/// Shuffled mini-batch Adam training starting from `params`.
pub fn fit<T: Real>(
    dataset: &[TrainSequence<T>],
    mut params: ModelParams<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<FitResult<T>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let expected = params.config().patch_width();
    if let Some(s) = dataset.iter().find(|s| s.row_width() != expected) {
        return Err(Error::invalid(format!("sequence rows have width {}, model expects {expected}", s.row_width())));
    }
    let weights = cfg.weighting.map(|m| bundle_weights(&label_counts(dataset), m)).transpose()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut state = AdamState::new(&params);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    let mut steps = 0usize;
    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut seen = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
            let batch: Vec<&TrainSequence<T>> = idx.iter().map(|&i| &dataset[i]).collect();
            let (loss, grads) = batch_gradient(&params, &batch, weights.as_ref(), cfg.squared)?;
            adam_step(&mut params, &grads, &mut state, &cfg.adam)?;
            steps += 1;
            sum += loss.to_f64().unwrap() * batch.len() as f64;
            seen += batch.len();
        }
        if seen == 0 {
            break 'epochs;
        }
        let report = EpochReport { epoch, loss: sum / seen as f64, steps };
        on_epoch(&report);
        curve.push(report);
        if best.as_ref().is_none_or(|b| report.loss < b.0) {
            best = Some((report.loss, epoch, params.clone()));
        }
    }
    let (best_epoch, best_params) = match best {
        Some((_, e, p)) => (e, p),
        None => (0, params.clone()),
    };
    Ok(FitResult { params, best_params, best_epoch, weights, curve })
}
