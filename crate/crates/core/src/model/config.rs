use std::fmt;
use std::str::FromStr;

use crate::config::KeyValues;
use crate::shcore::{PATCH_CELLS, SH_CHANNELS};
use crate::{Error, Result};

/// Architecture ladder used in the ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Per-vertex MLP on the centre voxel's coefficients: no attention, no
    /// positional table.
    BaselineMlp,
    /// Causal decoder over centre-voxel coefficients.
    ContextOnly,
    /// Causal decoder over the convolutional neighbourhood embedding.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::BaselineMlp, Variant::ContextOnly, Variant::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::BaselineMlp => "baseline_mlp",
            Variant::ContextOnly => "context_only",
            Variant::Full => "full",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Variant::BaselineMlp => 0,
            Variant::ContextOnly => 1,
            Variant::Full => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.code() == c)
    }

    pub fn uses_patch(self) -> bool {
        self == Variant::Full
    }

    pub fn uses_attention(self) -> bool {
        self != Variant::BaselineMlp
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline_mlp" | "baseline" => Ok(Variant::BaselineMlp),
            "context_only" | "context" => Ok(Variant::ContextOnly),
            "full" => Ok(Variant::Full),
            _ => Err(Error::InvalidConfig(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub block_size: usize,
    pub in_channels: usize,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { n_layers: 6, n_heads: 6, d_model: 192, block_size: 96, in_channels: SH_CHANNELS, variant: Variant::Full }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.d_model == 0 || self.n_heads == 0 || self.in_channels == 0 {
            return bad("d_model, n_heads and in_channels must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!("d_model {} is not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.block_size == 0 {
            return bad("block_size must be at least 1".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn d_ff(&self) -> usize {
        4 * self.d_model
    }

    /// Width of one feature row (a full patch, centre cell or not).
    pub fn patch_width(&self) -> usize {
        PATCH_CELLS * self.in_channels
    }

    /// Input width of the embedding map.
    pub fn embed_width(&self) -> usize {
        if self.variant.uses_patch() {
            self.patch_width()
        } else {
            self.in_channels
        }
    }

    /// Reads `model.*` keys, falling back to `base` for missing ones.
    pub fn from_kv(kv: &KeyValues, base: ModelConfig) -> Result<Self> {
        let c = Self {
            n_layers: kv.get_or("model.n_layers", base.n_layers)?,
            n_heads: kv.get_or("model.n_heads", base.n_heads)?,
            d_model: kv.get_or("model.d_model", base.d_model)?,
            block_size: kv.get_or("model.block_size", base.block_size)?,
            in_channels: kv.get_or("model.in_channels", base.in_channels)?,
            variant: kv.get_or("model.variant", base.variant)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.insert("model.n_layers", self.n_layers);
        kv.insert("model.n_heads", self.n_heads);
        kv.insert("model.d_model", self.d_model);
        kv.insert("model.block_size", self.block_size);
        kv.insert("model.in_channels", self.in_channels);
        kv.insert("model.variant", self.variant);
    }
}
