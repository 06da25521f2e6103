//! `TRX1` tract files: magic, u32 version, u64 count, then per streamline
//! a u32 label (`0xFFFFFFFF` for none), u32 vertex count and packed f32
//! xyz coordinates. Little-endian.

use std::path::Path;

use super::{Streamline, Tractogram};
use crate::binio::{put_f32s, put_u32, put_u64, ByteReader};
use crate::{Error, Result};

pub const TRX1_MAGIC: &[u8; 4] = b"TRX1";
pub const UNLABELED: u32 = u32::MAX;
const VERSION: u32 = 1;

pub fn write_tracts_to(tracts: &Tractogram) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(TRX1_MAGIC);
    put_u32(&mut out, VERSION);
    put_u64(&mut out, tracts.len() as u64);
    for s in tracts.iter() {
        put_u32(&mut out, s.label.unwrap_or(UNLABELED));
        put_u32(&mut out, s.len() as u32);
        put_f32s(&mut out, s.vertices.iter().flat_map(|v| v.iter().map(|&c| c as f32)));
    }
    out
}

pub fn write_tracts(path: impl AsRef<Path>, tracts: &Tractogram) -> Result<()> {
    std::fs::write(path, write_tracts_to(tracts))?;
    Ok(())
}

pub fn read_tracts_from(bytes: &[u8]) -> Result<Tractogram> {
    let mut r = ByteReader::new(bytes);
    r.magic(TRX1_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(at, format!("unsupported version {version}")));
    }
    let count = r.u64("streamline count")?;
    let mut streamlines = Vec::new();
    for i in 0..count {
        let label = r.u32("label")?;
        let at = r.offset();
        let n = r.u32("vertex count")? as usize;
        if n.saturating_mul(12) > r.remaining() {
            return Err(Error::format(
                at,
                format!("streamline {i} claims {n} vertices but only {} bytes remain", r.remaining()),
            ));
        }
        let coords = r.f32_vec(3 * n, "coordinates")?;
        let vertices = coords.chunks(3).map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]).collect();
        streamlines.push(Streamline::new(vertices, (label != UNLABELED).then_some(label)));
    }
    if r.remaining() != 0 {
        return Err(Error::format(
            r.offset(),
            format!("{} trailing bytes after {count} streamlines", r.remaining()),
        ));
    }
    Ok(Tractogram::new(streamlines))
}

pub fn read_tracts(path: impl AsRef<Path>) -> Result<Tractogram> {
    read_tracts_from(&std::fs::read(path)?)
}
