//! Streamline geometry, training sequences and the `TRX1` tract format.
//!
//! Geometry is kept in `f64` world millimetres regardless of the precision
//! the network runs at.

mod sequence;
mod trx;

pub use sequence::{make_train_sequence, TrainSequence, DEFAULT_SEQUENCE_LEN};
pub use trx::{read_tracts, read_tracts_from, write_tracts, write_tracts_to, TRX1_MAGIC, UNLABELED};

use crate::{norm3, sub3, Error, Result, Vec3};

/// One fibre trajectory in world millimetres.
#[derive(Clone, Debug, PartialEq)]
pub struct Streamline {
    pub vertices: Vec<Vec3<f64>>,
    pub label: Option<u32>,
}

impl Streamline {
    pub fn new(vertices: Vec<Vec3<f64>>, label: Option<u32>) -> Self {
        Self { vertices, label }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn arc_length(&self) -> f64 {
        self.vertices.windows(2).map(|w| norm3(&sub3(&w[1], &w[0]))).sum()
    }

    pub fn first(&self) -> Option<&Vec3<f64>> {
        self.vertices.first()
    }

    pub fn last(&self) -> Option<&Vec3<f64>> {
        self.vertices.last()
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self { vertices: v, label: self.label }
    }
}

/// A set of streamlines sharing one world space.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tractogram {
    pub streamlines: Vec<Streamline>,
}

impl Tractogram {
    pub fn new(streamlines: Vec<Streamline>) -> Self {
        Self { streamlines }
    }

    pub fn len(&self) -> usize {
        self.streamlines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streamlines.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Streamline> {
        self.streamlines.iter()
    }
}

impl FromIterator<Streamline> for Tractogram {
    fn from_iter<I: IntoIterator<Item = Streamline>>(iter: I) -> Self {
        Self { streamlines: iter.into_iter().collect() }
    }
}

/// Resamples a polyline so consecutive vertices are exactly `alpha` apart
/// (Euclidean), walking along the original curve. The first vertex is kept;
/// the walk stops when no further point at distance `alpha` exists, so the
/// tail shorter than one step is dropped.
pub fn resample(s: &Streamline, alpha: f64) -> Result<Streamline> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("step size must be positive, got {alpha}")));
    }
    if s.len() < 2 {
        return Err(Error::invalid("resampling needs at least two vertices"));
    }
    if s.arc_length() == 0.0 {
        return Err(Error::invalid("streamline has zero length"));
    }
    let v = &s.vertices;
    let mut out = vec![v[0]];
    let mut cur = v[0];
    // Position along the polyline: segment index and parameter.
    let mut seg = 0usize;
    let mut t0 = 0.0f64;
    let a2 = alpha * alpha;
    'walk: loop {
        while seg + 1 < v.len() {
            let a = v[seg];
            let d = sub3(&v[seg + 1], &a);
            let dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if dd == 0.0 {
                seg += 1;
                t0 = 0.0;
                continue;
            }
            // |a + t d - cur|^2 = alpha^2, take the exit root.
            let w = sub3(&a, &cur);
            let b = 2.0 * (d[0] * w[0] + d[1] * w[1] + d[2] * w[2]);
            let c = w[0] * w[0] + w[1] * w[1] + w[2] * w[2] - a2;
            let disc = b * b - 4.0 * dd * c;
            if disc >= 0.0 {
                let t = (-b + disc.sqrt()) / (2.0 * dd);
                // Allow round-off past the final vertex so an exact multiple of
                // alpha keeps its endpoint.
                let t_max = if seg + 2 == v.len() { 1.0 + 1e-9 } else { 1.0 };
                if t >= t0 && t <= t_max {
                    let mut p = [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]];
                    // Pin the chord length to alpha to remove root round-off.
                    let step = sub3(&p, &cur);
                    let n = norm3(&step);
                    if n > 0.0 {
                        let k = alpha / n;
                        p = [cur[0] + step[0] * k, cur[1] + step[1] * k, cur[2] + step[2] * k];
                    }
                    out.push(p);
                    cur = p;
                    t0 = t;
                    continue 'walk;
                }
            }
            seg += 1;
            t0 = 0.0;
        }
        break;
    }
    Ok(Streamline { vertices: out, label: s.label })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, spacing: f64) -> Streamline {
        Streamline::new((0..n).map(|i| [i as f64 * spacing, 0.0, 0.0]).collect(), None)
    }

    fn quarter_circle(r: f64, samples: usize) -> Streamline {
        let pts = (0..=samples)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / samples as f64;
                [r * a.cos(), r * a.sin(), 0.0]
            })
            .collect();
        Streamline::new(pts, Some(3))
    }

    #[test]
    fn straight_segment() {
        let s = Streamline::new(vec![[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]], None);
        let r = resample(&s, 1.0).unwrap();
        assert_eq!(r.len(), 11);
        assert!((r.vertices[10][0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn already_spaced_is_unchanged() {
        let s = line(25, 1.0);
        let r = resample(&s, 1.0).unwrap();
        assert_eq!(r.len(), s.len());
        for (a, b) in r.vertices.iter().zip(&s.vertices) {
            assert!(norm3(&sub3(a, b)) < 1e-9);
        }
    }

    #[test]
    fn quarter_circle_count() {
        let r = resample(&quarter_circle(10.0, 2000), 1.0).unwrap();
        assert_eq!(r.len(), 16);
        assert_eq!(r.label, Some(3));
        for w in r.vertices.windows(2) {
            assert!((norm3(&sub3(&w[1], &w[0])) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let s = Streamline::new(vec![[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]], None);
        assert!(resample(&s, 1.0).is_err());
        assert!(resample(&line(1, 1.0), 1.0).is_err());
        assert!(resample(&line(5, 1.0), 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn resample_laws(
            pts in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0, -20.0f64..20.0), 2..12),
            alpha in 0.2f64..3.0,
        ) {
            let s = Streamline::new(pts.iter().map(|&(x, y, z)| [x, y, z]).collect(), None);
            proptest::prop_assume!(s.arc_length() > 1e-3);
            let r = resample(&s, alpha).unwrap();
            proptest::prop_assert_eq!(r.vertices[0], s.vertices[0]);
            for w in r.vertices.windows(2) {
                proptest::prop_assert!((norm3(&sub3(&w[1], &w[0])) - alpha).abs() < 1e-6);
            }
            // chords never exceed the arc they cut
            proptest::prop_assert!(r.arc_length() <= s.arc_length() + 1e-9);
        }

        #[test]
        fn resample_length_law_on_smooth_curves(
            r in 5.0f64..40.0,
            sweep in 0.5f64..3.0,
            alpha in 0.5f64..2.0,
        ) {
            let pts = (0..=400)
                .map(|i| {
                    let a = sweep * i as f64 / 400.0;
                    [r * a.cos(), r * a.sin(), 0.1 * a]
                })
                .collect();
            let s = Streamline::new(pts, None);
            let rs = resample(&s, alpha).unwrap();
            // Each chord cuts off slightly more arc than alpha; bound the
            // accumulated chord-vs-arc deficit analytically for the circle.
            let arc_per_step = 2.0 * r * (alpha / (2.0 * r)).asin();
            let deficit = (rs.len() - 1) as f64 * (arc_per_step - alpha);
            let gap = s.arc_length() - rs.arc_length();
            proptest::prop_assert!(gap >= 0.0);
            proptest::prop_assert!(gap <= alpha + deficit + 1e-3, "gap {} alpha {} deficit {}", gap, alpha, deficit);
        }
    }
}
