use std::fs;
use std::path::{Path, PathBuf};

use super::Phantom;
use crate::metrics::{GroundTruth, RoiSet, VoxelMask};
use crate::shcore::{read_volume, write_volume, Volume};
use crate::streamlines::write_tracts;
use crate::{Error, Result};

pub const DWI_FILE: &str = "dwi.vol";
pub const SH_FILE: &str = "sh.vol";
pub const WM_MASK_FILE: &str = "wm_mask.vol";
pub const TRACTS_FILE: &str = "gt.trx";
pub const SCHEME_FILE: &str = "scheme.txt";
pub const CONFIG_FILE: &str = "phantom.cfg";
pub const BUNDLES_FILE: &str = "bundles.txt";

fn bundle_file(j: usize) -> String {
    format!("bundle_{j}.vol")
}

fn roi_file(j: usize, end: char) -> String {
    format!("roi_{j}_{end}.vol")
}

/// Paths written by [`write_phantom`], in write order.
#[derive(Clone, Debug, Default)]
pub struct PhantomFiles {
    pub paths: Vec<PathBuf>,
}

/// Writes every phantom artifact into `dir` (created if missing). `sh` is
/// the fitted coefficient volume, stored alongside for training.
pub fn write_phantom(phantom: &Phantom, sh: Option<&Volume<f32>>, dir: impl AsRef<Path>) -> Result<PhantomFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files = PhantomFiles::default();
    let mut path = |name: &str| {
        let p = dir.join(name);
        files.paths.push(p.clone());
        p
    };
    phantom.config.scheme.write(path(SCHEME_FILE))?;
    fs::write(path(CONFIG_FILE), phantom.config.to_text(SCHEME_FILE))?;
    let bundles: String = phantom
        .config
        .bundles
        .iter()
        .enumerate()
        .map(|(j, b)| format!("{j} {} {}\n", b.label, b.name))
        .collect();
    fs::write(path(BUNDLES_FILE), bundles)?;
    write_volume(path(DWI_FILE), &phantom.dwi)?;
    if let Some(sh) = sh {
        write_volume(path(SH_FILE), sh)?;
    }
    write_volume(path(WM_MASK_FILE), &phantom.wm_mask.to_volume::<f32>())?;
    for (j, m) in phantom.bundle_masks.iter().enumerate() {
        write_volume(path(&bundle_file(j)), &m.to_volume::<f32>())?;
    }
    for (j, &(a, b)) in phantom.rois.pairs.iter().enumerate() {
        write_volume(path(&roi_file(j, 'a')), &phantom.rois.rois[a].to_volume::<f32>())?;
        write_volume(path(&roi_file(j, 'b')), &phantom.rois.rois[b].to_volume::<f32>())?;
    }
    write_tracts(path(TRACTS_FILE), &phantom.tractogram)?;
    Ok(files)
}

fn read_mask(path: &Path) -> Result<VoxelMask> {
    Ok(VoxelMask::from_volume(&read_volume::<f64>(path)?))
}

/// Loads bundle masks and endpoint ROIs from a phantom directory.
pub fn read_ground_truth(dir: impl AsRef<Path>) -> Result<GroundTruth> {
    let dir = dir.as_ref();
    let listing = fs::read_to_string(dir.join(BUNDLES_FILE))?;
    let mut names = Vec::new();
    for (i, line) in listing.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != i.to_string() {
            return Err(Error::InvalidConfig(format!("{BUNDLES_FILE} line {}: expected `index label name`", i + 1)));
        }
        names.push(parts[2].to_string());
    }
    if names.is_empty() {
        return Err(Error::InvalidConfig(format!("{BUNDLES_FILE} lists no bundles")));
    }
    let mut bundle_masks = Vec::new();
    let mut rois = Vec::new();
    let mut pairs = Vec::new();
    for j in 0..names.len() {
        bundle_masks.push(read_mask(&dir.join(bundle_file(j)))?);
        pairs.push((rois.len(), rois.len() + 1));
        rois.push(read_mask(&dir.join(roi_file(j, 'a')))?);
        rois.push(read_mask(&dir.join(roi_file(j, 'b')))?);
    }
    let grid = bundle_masks[0].grid().clone();
    if bundle_masks.iter().chain(&rois).any(|m| m.grid() != &grid) {
        return Err(Error::InvalidConfig("ground-truth masks do not share a grid".into()));
    }
    Ok(GroundTruth { grid, bundle_names: names, bundle_masks, rois: RoiSet { rois, pairs } })
}
