use std::path::Path;

use super::config::{ModelConfig, Variant};
use super::params::ModelParams;
use crate::binio::{put_f32s, put_u16, put_u32, ByteReader};
use crate::{Error, Real, Result};

pub const CKP1_MAGIC: &[u8; 4] = b"CKP1";
const VERSION: u32 = 1;
const HEADER: &str = "<header>";

fn ckp_err(tensor: &str, message: impl Into<String>) -> Error {
    Error::Checkpoint { tensor: tensor.to_string(), message: message.into() }
}

pub fn write_checkpoint_to<T: Real>(params: &ModelParams<T>) -> Vec<u8> {
    let c = params.config();
    let mut out = Vec::with_capacity(64 + 4 * params.len());
    out.extend_from_slice(CKP1_MAGIC);
    put_u32(&mut out, VERSION);
    for v in [c.n_layers, c.n_heads, c.d_model, c.block_size, c.in_channels, c.d_ff()] {
        put_u32(&mut out, v as u32);
    }
    out.push(c.variant.code());
    put_u32(&mut out, params.layout().tensors.len() as u32);
    for (name, shape, values) in params.tensors() {
        put_u16(&mut out, name.len() as u16);
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for &d in shape {
            put_u32(&mut out, d as u32);
        }
        put_f32s(&mut out, values.iter().map(|v| v.as_f32()));
    }
    out
}

pub fn save_checkpoint<T: Real>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_checkpoint_to(params))?;
    Ok(())
}

fn header(r: &mut ByteReader<'_>) -> Result<ModelConfig> {
    r.magic(CKP1_MAGIC).map_err(|e| ckp_err(HEADER, e.to_string()))?;
    let h = |e: Error| ckp_err(HEADER, e.to_string());
    let version = r.u32("version").map_err(h)?;
    if version != VERSION {
        return Err(ckp_err(HEADER, format!("unsupported version {version}")));
    }
    let mut f = [0usize; 6];
    for v in f.iter_mut() {
        *v = r.u32("config").map_err(h)? as usize;
    }
    let code = r.u8("variant").map_err(h)?;
    let variant = Variant::from_code(code).ok_or_else(|| ckp_err(HEADER, format!("unknown variant code {code}")))?;
    let c = ModelConfig { n_layers: f[0], n_heads: f[1], d_model: f[2], block_size: f[3], in_channels: f[4], variant };
    c.validate().map_err(h)?;
    if f[5] != c.d_ff() {
        return Err(ckp_err(HEADER, format!("feed-forward width {} does not match d_model {}", f[5], c.d_model)));
    }
    Ok(c)
}

pub fn read_checkpoint_from<T: Real>(bytes: &[u8]) -> Result<ModelParams<T>> {
    let mut r = ByteReader::new(bytes);
    let config = header(&mut r)?;
    let mut params = ModelParams::<T>::zeros(&config)?;
    let layout = params.layout().clone();
    let count = r.u32("tensor count").map_err(|e| ckp_err(HEADER, e.to_string()))? as usize;
    if count != layout.tensors.len() {
        return Err(ckp_err(HEADER, format!("{count} tensors, config implies {}", layout.tensors.len())));
    }
    let data = params.data_mut();
    for info in &layout.tensors {
        let e = |err: Error| ckp_err(&info.name, err.to_string());
        let n = r.u16("name length").map_err(e)? as usize;
        let name = r.take(n, "name").map_err(e)?;
        if name != info.name.as_bytes() {
            return Err(ckp_err(
                &info.name,
                format!("found tensor `{}` in its place", String::from_utf8_lossy(name)),
            ));
        }
        let rank = r.u8("rank").map_err(e)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dims").map_err(e)? as usize);
        }
        if shape != info.shape {
            return Err(ckp_err(&info.name, format!("shape {shape:?}, expected {:?}", info.shape)));
        }
        let values = r.f32_vec(info.slot.len, "payload").map_err(e)?;
        for (d, v) in data[info.slot.range()].iter_mut().zip(values) {
            *d = T::of_f32(v);
        }
    }
    if r.remaining() != 0 {
        return Err(ckp_err(HEADER, format!("{} trailing bytes", r.remaining())));
    }
    Ok(params)
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<ModelParams<T>> {
    read_checkpoint_from(&std::fs::read(path)?)
}

/// Loads a checkpoint and checks it was trained as `variant`.
pub fn load_checkpoint_as<T: Real>(path: impl AsRef<Path>, variant: Variant) -> Result<ModelParams<T>> {
    let p = load_checkpoint(path)?;
    if p.config().variant != variant {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint holds variant {}, requested {variant}",
            p.config().variant
        )));
    }
    Ok(p)
}
