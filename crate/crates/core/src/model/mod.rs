//! Causal decoder that maps a streamline's neighbourhood patches to
//! propagation directions.
//!
//! Each vertex's 3x3x3 patch of SH coefficients is embedded by one linear
//! map (a 3x3x3 convolution evaluated at a single location), learned
//! positions are added, and pre-norm decoder blocks with exclusion-masked
//! multi-head attention and a GELU feed-forward produce a 3-vector per
//! position. Gradients are computed by an explicit reverse pass over a
//! cached [`ForwardTrace`].

mod checkpoint;
mod config;
mod decoder;
mod forward;
mod ops;
mod params;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_as, read_checkpoint_from, save_checkpoint, write_checkpoint_to, CKP1_MAGIC,
};
pub use config::{ModelConfig, Variant};
pub use decoder::Decoder;
pub use forward::{backward, backward_into, dump_attention, embed, forward, forward_features, ForwardTrace};
pub use params::{AttnSlots, Init, LayerSlots, Layout, ModelParams, Slot, TensorInfo, INIT_STD};
