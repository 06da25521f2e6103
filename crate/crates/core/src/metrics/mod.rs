//! Tractometer-style scoring against phantom ground truth.

mod mask;
mod voxelize;

pub use mask::VoxelMask;
pub use voxelize::{sample_points, voxelize, voxelize_streamline, voxelize_tractogram};

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::shcore::Grid;
use crate::streamlines::{Streamline, Tractogram};
use crate::{Error, Result};

/// Dice, overlap and overreach, all in percent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coverage {
    pub dice: f64,
    pub overlap: f64,
    pub overreach: f64,
}

pub fn coverage_scores(rec: &VoxelMask, gt: &VoxelMask) -> Result<Coverage> {
    let g = gt.count();
    if g == 0 {
        return Err(Error::invalid("ground-truth mask is empty"));
    }
    let inter = rec.intersection_count(gt)?;
    let extra = rec.difference_count(gt)?;
    let r = rec.count();
    Ok(Coverage {
        dice: 200.0 * inter as f64 / (r + g) as f64,
        overlap: 100.0 * inter as f64 / g as f64,
        overreach: 100.0 * extra as f64 / g as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Connection {
    /// Joins the two ROIs of this bundle.
    Valid(usize),
    /// Joins two ROIs (indices, ascending) that are not a bundle's pair.
    Invalid(usize, usize),
    None,
}

/// Endpoint regions; bundle `j` connects `rois[pairs[j].0]` and `rois[pairs[j].1]`.
#[derive(Clone, Debug)]
pub struct RoiSet {
    pub rois: Vec<VoxelMask>,
    pub pairs: Vec<(usize, usize)>,
}

impl RoiSet {
    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::invalid("at least one bundle is required"));
        }
        for &(a, b) in &self.pairs {
            if a >= self.rois.len() || b >= self.rois.len() || a == b {
                return Err(Error::invalid(format!("bad ROI pair ({a}, {b}) for {} ROIs", self.rois.len())));
            }
        }
        Ok(())
    }

    fn rois_at(&self, p: &crate::Vec3<f64>) -> Vec<usize> {
        (0..self.rois.len()).filter(|&r| self.rois[r].contains_point(p)).collect()
    }

    /// Endpoint-ROI classification. When endpoints hit several ROIs the
    /// lowest-indexed bundle pair wins, then the lowest ROI pair.
    pub fn classify(&self, s: &Streamline) -> Connection {
        let (Some(a), Some(b)) = (s.first(), s.last()) else {
            return Connection::None;
        };
        if s.len() < 2 {
            return Connection::None;
        }
        let ra = self.rois_at(a);
        let rb = self.rois_at(b);
        let hit = |x: usize, y: usize| (ra.contains(&x) && rb.contains(&y)) || (ra.contains(&y) && rb.contains(&x));
        let valid: Vec<usize> = (0..self.pairs.len()).filter(|&j| hit(self.pairs[j].0, self.pairs[j].1)).collect();
        if let Some(&j) = valid.first() {
            if valid.len() > 1 {
                log::debug!("streamline endpoints match bundles {valid:?}; assigning {j}");
            }
            return Connection::Valid(j);
        }
        let mut best: Option<(usize, usize)> = None;
        for &x in &ra {
            for &y in &rb {
                if x != y {
                    let p = (x.min(y), x.max(y));
                    best = Some(best.map_or(p, |q| q.min(p)));
                }
            }
        }
        match best {
            Some((x, y)) => Connection::Invalid(x, y),
            None => Connection::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionSummary {
    pub vc: f64,
    pub ic: f64,
    pub nc: f64,
    pub vb: usize,
    pub ib: usize,
    pub assignment: Vec<Connection>,
}

pub fn classify_connections(tractogram: &Tractogram, rois: &RoiSet) -> Result<ConnectionSummary> {
    rois.validate()?;
    let assignment: Vec<Connection> = tractogram.iter().map(|s| rois.classify(s)).collect();
    let n = assignment.len();
    let mut counts = [0usize; 3];
    let mut valid_bundles = BTreeSet::new();
    let mut invalid_pairs = BTreeSet::new();
    for c in &assignment {
        match *c {
            Connection::Valid(j) => {
                counts[0] += 1;
                valid_bundles.insert(j);
            }
            Connection::Invalid(a, b) => {
                counts[1] += 1;
                invalid_pairs.insert((a, b));
            }
            Connection::None => counts[2] += 1,
        }
    }
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    Ok(ConnectionSummary {
        vc: pct(counts[0]),
        ic: pct(counts[1]),
        // Empty tractograms count as entirely unconnected.
        nc: if n == 0 { 100.0 } else { pct(counts[2]) },
        vb: valid_bundles.len(),
        ib: invalid_pairs.len(),
        assignment,
    })
}

/// Everything needed to score a reconstruction.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub grid: Grid<f64>,
    pub bundle_names: Vec<String>,
    pub bundle_masks: Vec<VoxelMask>,
    pub rois: RoiSet,
}

impl GroundTruth {
    pub fn n_bundles(&self) -> usize {
        self.bundle_masks.len()
    }

    pub fn union_mask(&self) -> VoxelMask {
        let mut m = VoxelMask::new(self.grid.clone());
        for b in &self.bundle_masks {
            m.union_with(b).expect("bundle masks share the grid");
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleScore {
    pub name: String,
    pub streamlines: usize,
    pub coverage: Coverage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub n_streamlines: usize,
    pub dice: f64,
    pub overlap: f64,
    pub overreach: f64,
    pub vc: f64,
    pub ic: f64,
    pub nc: f64,
    pub vb: usize,
    pub ib: usize,
    pub bundles: Vec<BundleScore>,
}

/// Coverage counts only validly connected streamlines: per bundle against
/// that bundle's mask, and all of them together against the union of
/// bundle masks.
pub fn score(rec: &Tractogram, gt: &GroundTruth, step: f64) -> Result<ScoreReport> {
    if gt.bundle_masks.len() != gt.rois.pairs.len() || gt.bundle_names.len() != gt.bundle_masks.len() {
        return Err(Error::invalid("ground truth bundle count mismatch"));
    }
    let conn = classify_connections(rec, &gt.rois)?;
    let mut per = vec![VoxelMask::new(gt.grid.clone()); gt.n_bundles()];
    let mut counts = vec![0usize; gt.n_bundles()];
    for (s, c) in rec.iter().zip(&conn.assignment) {
        if let Connection::Valid(j) = *c {
            voxelize_streamline(&mut per[j], s, step);
            counts[j] += 1;
        }
    }
    let bundles = (0..gt.n_bundles())
        .map(|j| {
            Ok(BundleScore {
                name: gt.bundle_names[j].clone(),
                streamlines: counts[j],
                coverage: coverage_scores(&per[j], &gt.bundle_masks[j])?,
            })
        })
        .collect::<Result<_>>()?;
    let mut valid = VoxelMask::new(gt.grid.clone());
    for m in &per {
        valid.union_with(m)?;
    }
    let whole = coverage_scores(&valid, &gt.union_mask())?;
    Ok(ScoreReport {
        n_streamlines: rec.len(),
        dice: whole.dice,
        overlap: whole.overlap,
        overreach: whole.overreach,
        vc: conn.vc,
        ic: conn.ic,
        nc: conn.nc,
        vb: conn.vb,
        ib: conn.ib,
        bundles,
    })
}

impl ScoreReport {
    pub const CSV_HEADER: &'static str = "scope,streamlines,dice,overlap,overreach,vc,ic,nc,vb,ib";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let _ = writeln!(
            out,
            "all,{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{}",
            self.n_streamlines, self.dice, self.overlap, self.overreach, self.vc, self.ic, self.nc, self.vb, self.ib
        );
        for b in &self.bundles {
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4},,,,,",
                b.name, b.streamlines, b.coverage.dice, b.coverage.overlap, b.coverage.overreach
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "streamlines  {}", self.n_streamlines);
        let _ = writeln!(out, "VC {:6.2}%  IC {:6.2}%  NC {:6.2}%", self.vc, self.ic, self.nc);
        let _ = writeln!(out, "VB {}  IB {}", self.vb, self.ib);
        let _ = writeln!(out, "{:<16}{:>8}{:>9}{:>9}{:>10}", "bundle", "count", "dice", "OL", "OR");
        let _ = writeln!(
            out,
            "{:<16}{:>8}{:>9.2}{:>9.2}{:>10.2}",
            "(all)", self.n_streamlines, self.dice, self.overlap, self.overreach
        );
        for b in &self.bundles {
            let _ = writeln!(
                out,
                "{:<16}{:>8}{:>9.2}{:>9.2}{:>10.2}",
                b.name, b.streamlines, b.coverage.dice, b.coverage.overlap, b.coverage.overreach
            );
        }
        out
    }
}
