//! `VOL1` volume files: magic, version, dims, channel count, voxel size,
//! row-major affine, then channel-fastest f32 data. Little-endian.

use std::path::Path;

use super::volume::Volume;
use crate::binio::{put_f32s, put_u32, ByteReader};
use crate::{Error, Real, Result};

pub const VOL1_MAGIC: &[u8; 4] = b"VOL1";
const VERSION: u32 = 1;

pub fn write_volume_to<T: Real>(vol: &Volume<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(96 + vol.data().len() * 4);
    out.extend_from_slice(VOL1_MAGIC);
    put_u32(&mut out, VERSION);
    for d in vol.dims() {
        put_u32(&mut out, d as u32);
    }
    put_u32(&mut out, vol.channels() as u32);
    put_f32s(&mut out, vol.voxel_size().iter().map(|v| v.as_f32()));
    put_f32s(&mut out, vol.affine().iter().flatten().map(|v| v.as_f32()));
    put_f32s(&mut out, vol.data().iter().map(|v| v.as_f32()));
    out
}

pub fn write_volume<T: Real>(path: impl AsRef<Path>, vol: &Volume<T>) -> Result<()> {
    std::fs::write(path, write_volume_to(vol))?;
    Ok(())
}

pub fn read_volume_from<T: Real>(bytes: &[u8]) -> Result<Volume<T>> {
    let mut r = ByteReader::new(bytes);
    r.magic(VOL1_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(at, format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        *d = r.u32("dimension")? as usize;
    }
    let at = r.offset();
    let channels = r.u32("channel count")? as usize;
    if channels == 0 || dims.contains(&0) {
        return Err(Error::format(at, format!("empty volume {dims:?} x {channels}")));
    }
    let vs = r.f32_vec(3, "voxel size")?;
    let aff = r.f32_vec(16, "affine")?;
    let n = dims[0]
        .checked_mul(dims[1])
        .and_then(|x| x.checked_mul(dims[2]))
        .and_then(|x| x.checked_mul(channels))
        .ok_or_else(|| Error::format(at, "volume size overflows"))?;
    let data_at = r.offset();
    let data = r.f32_vec(n, "voxel data")?;
    if r.remaining() != 0 {
        return Err(Error::format(r.offset(), format!("{} trailing bytes", r.remaining())));
    }
    let mut affine = [[T::zero(); 4]; 4];
    for (i, v) in aff.iter().enumerate() {
        affine[i / 4][i % 4] = T::of_f32(*v);
    }
    Volume::new(
        dims,
        channels,
        [T::of_f32(vs[0]), T::of_f32(vs[1]), T::of_f32(vs[2])],
        affine,
        data.into_iter().map(T::of_f32).collect(),
    )
    .map_err(|e| Error::format(data_at, e.to_string()))
}

pub fn read_volume<T: Real>(path: impl AsRef<Path>) -> Result<Volume<T>> {
    read_volume_from(&std::fs::read(path)?)
}
