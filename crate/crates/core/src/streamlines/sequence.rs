use super::Streamline;
use crate::shcore::{Volume, PATCH_CELLS};
use crate::{norm3, Error, Real, Result, Vec3};

/// Context length used for training sequences.
pub const DEFAULT_SEQUENCE_LEN: usize = 96;

/// One fixed-length training example.
///
/// Only the valid prefix is stored; rows past it are defined to be zero.
/// Valid positions are always a prefix because every vertex but the last
/// has a successor.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSequence<T> {
    len: usize,
    row_width: usize,
    /// `n_valid x row_width` patches.
    features: Vec<T>,
    /// Unit direction from each valid vertex to its successor.
    targets: Vec<Vec3<T>>,
    pub bundle_label: u32,
}

impl<T: Real> TrainSequence<T> {
    pub fn new(len: usize, row_width: usize, features: Vec<T>, targets: Vec<Vec3<T>>, bundle_label: u32) -> Result<Self> {
        if targets.len() > len {
            return Err(Error::invalid(format!("{} targets exceed sequence length {len}", targets.len())));
        }
        if features.len() != targets.len() * row_width {
            return Err(Error::invalid("feature rows do not match target count"));
        }
        Ok(Self { len, row_width, features, targets, bundle_label })
    }

    /// Fixed sequence length `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_valid(&self) -> usize {
        self.targets.len()
    }

    pub fn row_width(&self) -> usize {
        self.row_width
    }

    /// Features of the valid prefix, row-major.
    pub fn valid_features(&self) -> &[T] {
        &self.features
    }

    pub fn valid_targets(&self) -> &[Vec3<T>] {
        &self.targets
    }

    pub fn valid_mask(&self) -> Vec<bool> {
        (0..self.len).map(|t| t < self.n_valid()).collect()
    }

    /// Zero-padded `T x row_width` feature matrix.
    pub fn padded_features(&self) -> Vec<T> {
        let mut out = self.features.clone();
        out.resize(self.len * self.row_width, T::zero());
        out
    }

    /// Zero-padded `T` targets.
    pub fn padded_targets(&self) -> Vec<Vec3<T>> {
        let mut out = self.targets.clone();
        out.resize(self.len, [T::zero(); 3]);
        out
    }

    /// Same positions with the neighbourhood reduced to its centre cell.
    pub fn center_only(&self, channels: usize) -> Self {
        assert_eq!(self.row_width, PATCH_CELLS * channels, "not a full patch sequence");
        let centre = PATCH_CELLS / 2;
        let features = self
            .features
            .chunks(self.row_width)
            .flat_map(|row| row[centre * channels..(centre + 1) * channels].iter().copied())
            .collect();
        Self { len: self.len, row_width: channels, features, targets: self.targets.clone(), bundle_label: self.bundle_label }
    }
}

/// Builds a training sequence from a streamline resampled at `alpha`.
///
/// Position `t` holds the 3x3x3 patch at vertex `t` and the unit direction
/// to vertex `t + 1`. The last vertex has no successor and contributes no
/// position. Streamlines longer than `seq_len + 1` vertices are truncated.
/// Any vertex whose patch leaves the grid yields `OutOfBounds`, which
/// callers use to skip the streamline.
pub fn make_train_sequence<T: Real>(
    s: &Streamline,
    volume: &Volume<T>,
    seq_len: usize,
    alpha: f64,
) -> Result<TrainSequence<T>> {
    if seq_len == 0 {
        return Err(Error::invalid("sequence length must be positive"));
    }
    if s.len() < 2 {
        return Err(Error::invalid("streamline needs at least two vertices"));
    }
    let n_valid = (s.len() - 1).min(seq_len);
    let width = PATCH_CELLS * volume.channels();
    let mut features = vec![T::zero(); n_valid * width];
    let mut targets = Vec::with_capacity(n_valid);
    for t in 0..n_valid {
        let p = s.vertices[t];
        let q = s.vertices[t + 1];
        let pt = [T::c(p[0]), T::c(p[1]), T::c(p[2])];
        volume.extract_neighborhood_into(&pt, &mut features[t * width..(t + 1) * width])?;
        let d = [(q[0] - p[0]) / alpha, (q[1] - p[1]) / alpha, (q[2] - p[2]) / alpha];
        let n = norm3(&d);
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("step {t} has length {} but alpha is {alpha}", n * alpha)));
        }
        // Renormalise so the unit law survives rounding to T.
        targets.push([T::c(d[0] / n), T::c(d[1] / n), T::c(d[2] / n)]);
    }
    TrainSequence::new(seq_len, width, features, targets, s.label.unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn volume() -> Volume<f32> {
        let mut v = Volume::<f32>::axis_aligned([240, 5, 5], 2, [1.0; 3], [-1.0, -2.0, -2.0]).unwrap();
        for idx in 0..v.n_voxels() {
            let ijk = v.voxel_of_index(idx);
            let x = ijk[0] as f32;
            v.voxel_mut(ijk).copy_from_slice(&[x, 1.0]);
        }
        v
    }

    fn straight(n: usize) -> Streamline {
        Streamline::new((0..n).map(|i| [i as f64, 0.0, 0.0]).collect(), Some(2))
    }

    #[test]
    fn exact_fit_has_no_padding() {
        let seq = make_train_sequence(&straight(97), &volume(), 96, 1.0).unwrap();
        assert_eq!(seq.n_valid(), 96);
        assert!(seq.valid_mask().iter().all(|&m| m));
        assert_eq!(seq.bundle_label, 2);
    }

    #[test]
    fn short_streamline_is_padded() {
        let seq = make_train_sequence(&straight(41), &volume(), 96, 1.0).unwrap();
        assert_eq!(seq.n_valid(), 40);
        let mask = seq.valid_mask();
        assert_eq!(mask.iter().filter(|&&m| !m).count(), 56);
        let feats = seq.padded_features();
        let targets = seq.padded_targets();
        for t in 40..96 {
            assert!(feats[t * seq.row_width()..(t + 1) * seq.row_width()].iter().all(|&x| x == 0.0));
            assert_eq!(targets[t], [0.0; 3]);
        }
    }

    #[test]
    fn long_streamline_is_truncated() {
        let seq = make_train_sequence(&straight(200), &volume(), 96, 1.0).unwrap();
        assert_eq!(seq.n_valid(), 96);
        assert_eq!(seq.padded_features().len(), 96 * 27 * 2);
    }

    #[test]
    fn targets_and_features() {
        let seq = make_train_sequence(&straight(10), &volume(), 96, 1.0).unwrap();
        for t in seq.valid_targets() {
            assert_eq!(*t, [1.0, 0.0, 0.0]);
        }
        // centre cell of vertex 3 samples x voxel 4 (origin at -1)
        let row = &seq.valid_features()[3 * 54..4 * 54];
        assert_eq!(&row[13 * 2..14 * 2], &[4.0, 1.0]);
        let centre = seq.center_only(2);
        assert_eq!(centre.row_width(), 2);
        assert_eq!(&centre.valid_features()[6..8], &[4.0, 1.0]);
    }

    #[test]
    fn out_of_bounds_vertex() {
        let s = Streamline::new(vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 3.0, 0.0]], None);
        assert!(matches!(make_train_sequence(&s, &volume(), 96, 1.0), Err(Error::OutOfBounds { .. })));
    }

    proptest::proptest! {
        #[test]
        fn target_norm_and_padding_laws(
            pts in proptest::collection::vec((0.0f64..150.0, -0.8f64..0.8, -0.8f64..0.8), 2..8),
            seq_len in 4usize..40,
        ) {
            let s = Streamline::new(pts.iter().map(|&(x, y, z)| [x, y, z]).collect(), Some(1));
            proptest::prop_assume!(s.arc_length() > 1.5);
            let r = super::super::resample(&s, 1.0).unwrap();
            proptest::prop_assume!(r.len() >= 2);
            let seq = make_train_sequence(&r, &volume(), seq_len, 1.0).unwrap();
            for t in seq.valid_targets() {
                let n = (t[0] as f64).hypot(t[1] as f64).hypot(t[2] as f64);
                proptest::prop_assert!((n - 1.0).abs() < 1e-6);
            }
            let mask = seq.valid_mask();
            let feats = seq.padded_features();
            let targets = seq.padded_targets();
            for t in 0..seq_len {
                if !mask[t] {
                    proptest::prop_assert!(feats[t * seq.row_width()..(t + 1) * seq.row_width()].iter().all(|&x| x == 0.0));
                    proptest::prop_assert_eq!(targets[t], [0.0f32; 3]);
                }
            }
        }
    }
}
