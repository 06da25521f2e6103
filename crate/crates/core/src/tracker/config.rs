use std::fmt;
use std::str::FromStr;

use crate::config::KeyValues;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackConfig {
    /// Step length α in mm.
    pub step_size: f64,
    pub seeds_per_voxel: usize,
    pub min_length: f64,
    pub max_length: f64,
    /// Raw predictions shorter than this stop the streamline.
    pub stop_norm_tau: f64,
    pub bidirectional: bool,
    pub seed: u64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            seeds_per_voxel: 5,
            min_length: 20.0,
            max_length: 200.0,
            stop_norm_tau: 0.1,
            bidirectional: true,
            seed: 0,
        }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(self.min_length > 0.0 && self.min_length < self.max_length && self.max_length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < min_length < max_length, got {} and {}",
                self.min_length, self.max_length
            )));
        }
        if !(0.0..1.0).contains(&self.stop_norm_tau) {
            return Err(Error::InvalidConfig(format!("stop_norm_tau must lie in [0, 1), got {}", self.stop_norm_tau)));
        }
        Ok(())
    }

    /// Reads `track.*` keys, falling back to `base`.
    pub fn from_kv(kv: &KeyValues, base: TrackConfig) -> Result<Self> {
        let c = Self {
            step_size: kv.get_or("track.step_size", base.step_size)?,
            seeds_per_voxel: kv.get_or("track.seeds_per_voxel", base.seeds_per_voxel)?,
            min_length: kv.get_or("track.min_length", base.min_length)?,
            max_length: kv.get_or("track.max_length", base.max_length)?,
            stop_norm_tau: kv.get_or("track.stop_norm_tau", base.stop_norm_tau)?,
            bidirectional: kv.get_or("track.bidirectional", base.bidirectional)?,
            seed: kv.get_or("track.seed", base.seed)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.insert("track.step_size", self.step_size);
        kv.insert("track.seeds_per_voxel", self.seeds_per_voxel);
        kv.insert("track.min_length", self.min_length);
        kv.insert("track.max_length", self.max_length);
        kv.insert("track.stop_norm_tau", self.stop_norm_tau);
        kv.insert("track.bidirectional", self.bidirectional);
        kv.insert("track.seed", self.seed);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StopReason {
    LeftMask,
    OutOfBounds,
    LowNorm,
    MaxLength,
}

impl StopReason {
    pub const ALL: [StopReason; 4] = [Self::LeftMask, Self::OutOfBounds, Self::LowNorm, Self::MaxLength];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::LeftMask => "left_mask",
            Self::OutOfBounds => "out_of_bounds",
            Self::LowNorm => "low_norm",
            Self::MaxLength => "max_length",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StopReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown stop reason `{s}`")))
    }
}

/// Stop-reason counts over every propagated seed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StopHistogram {
    counts: [usize; 4],
}

impl StopHistogram {
    pub fn add(&mut self, r: StopReason) {
        self.counts[r.index()] += 1;
    }

    pub fn get(&self, r: StopReason) -> usize {
        self.counts[r.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// One `reason count` line per reason.
    pub fn to_text(&self) -> String {
        StopReason::ALL.iter().map(|r| format!("{} {}\n", r, self.get(*r))).collect()
    }
}
