use rand::Rng;

use crate::streamlines::{resample, Streamline};
use crate::{add3, cross3, dot3, norm3, normalize3, scale3, sub3, Error, Result, Vec3};

/// Shortest and longest admissible streamline, mm.
pub const MIN_LENGTH: f64 = 20.0;
pub const MAX_LENGTH: f64 = 200.0;

/// Spacing of the dense centerline polyline used for offsetting, mm.
const DENSE_STEP: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub enum Centerline {
    Straight { start: Vec3<f64>, end: Vec3<f64> },
    /// Circular arc around `center` starting at `start`, turning
    /// right-handedly about `normal` by `angle` radians.
    Arc { center: Vec3<f64>, start: Vec3<f64>, normal: Vec3<f64>, angle: f64 },
    /// Helix whose axis starts at `center` and runs along `axis`; `pitch` is
    /// the axial advance per turn.
    Helix { center: Vec3<f64>, axis: Vec3<f64>, radius: f64, turns: f64, pitch: f64 },
}

/// A unit vector perpendicular to `v`, chosen deterministically.
pub(crate) fn perpendicular(v: &Vec3<f64>) -> Vec3<f64> {
    let a = v.map(f64::abs);
    let helper = if a[0] <= a[1] && a[0] <= a[2] {
        [1.0, 0.0, 0.0]
    } else if a[1] <= a[2] {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    normalize3(&cross3(v, &helper)).expect("nonzero vector")
}

fn unit(v: &Vec3<f64>, what: &str) -> Result<Vec3<f64>> {
    normalize3(v).ok_or_else(|| Error::InvalidSpec(format!("{what} must be nonzero")))
}

impl Centerline {
    pub fn length(&self) -> f64 {
        match self {
            Centerline::Straight { start, end } => norm3(&sub3(end, start)),
            Centerline::Arc { center, start, angle, .. } => norm3(&sub3(start, center)) * angle.abs(),
            Centerline::Helix { radius, turns, pitch, .. } => {
                turns.abs() * (2.0 * std::f64::consts::PI * radius).hypot(*pitch)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Centerline::Straight { .. } => Ok(()),
            Centerline::Arc { center, start, normal, angle } => {
                let n = unit(normal, "arc normal")?;
                let r = sub3(start, center);
                if norm3(&r) == 0.0 {
                    return Err(Error::InvalidSpec("arc start coincides with its center".into()));
                }
                if dot3(&r, &n).abs() > 1e-9 * norm3(&r) {
                    return Err(Error::InvalidSpec("arc normal must be perpendicular to start - center".into()));
                }
                if !angle.is_finite() {
                    return Err(Error::InvalidSpec("arc angle must be finite".into()));
                }
                Ok(())
            }
            Centerline::Helix { axis, radius, pitch, .. } => {
                unit(axis, "helix axis")?;
                if !(*radius > 0.0) || !pitch.is_finite() {
                    return Err(Error::InvalidSpec("helix radius must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Point at parameter `u` in `[0, 1]`.
    pub fn point(&self, u: f64) -> Vec3<f64> {
        match self {
            Centerline::Straight { start, end } => add3(start, &scale3(&sub3(end, start), u)),
            Centerline::Arc { center, start, normal, angle } => {
                let n = normalize3(normal).unwrap();
                let r = sub3(start, center);
                let (s, c) = (angle * u).sin_cos();
                // Rodrigues rotation; r is perpendicular to n.
                add3(center, &add3(&scale3(&r, c), &scale3(&cross3(&n, &r), s)))
            }
            Centerline::Helix { center, axis, radius, turns, pitch } => {
                let a = normalize3(axis).unwrap();
                let e1 = perpendicular(&a);
                let e2 = cross3(&a, &e1);
                let phi = 2.0 * std::f64::consts::PI * turns * u;
                let radial = add3(&scale3(&e1, radius * phi.cos()), &scale3(&e2, radius * phi.sin()));
                add3(center, &add3(&radial, &scale3(&a, pitch * turns * u)))
            }
        }
    }

    /// Densely sampled polyline of the centerline.
    pub fn dense(&self) -> Vec<Vec3<f64>> {
        let n = ((self.length() / DENSE_STEP).ceil() as usize).max(1);
        (0..=n).map(|i| self.point(i as f64 / n as f64)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleSpec {
    pub name: String,
    pub centerline: Centerline,
    pub tube_radius: f64,
    pub streamline_count: usize,
    pub label: u32,
}

impl BundleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(|c: char| c.is_whitespace() || c == ',') {
            return Err(Error::InvalidSpec(format!("bad bundle name `{}`", self.name)));
        }
        if !(self.tube_radius >= 0.0) || !self.tube_radius.is_finite() {
            return Err(Error::InvalidSpec(format!("bundle `{}`: tube radius must be >= 0", self.name)));
        }
        if self.streamline_count == 0 {
            return Err(Error::InvalidSpec(format!("bundle `{}`: needs at least one streamline", self.name)));
        }
        self.centerline.validate()?;
        let len = self.centerline.length();
        if !(MIN_LENGTH..=MAX_LENGTH).contains(&len) {
            return Err(Error::InvalidSpec(format!(
                "bundle `{}`: centerline length {len:.2} mm outside [{MIN_LENGTH}, {MAX_LENGTH}]",
                self.name
            )));
        }
        Ok(())
    }
}

/// Rotation-minimising frame (two normals per point) along a polyline.
fn transport_frame(points: &[Vec3<f64>]) -> Vec<(Vec3<f64>, Vec3<f64>)> {
    let n = points.len();
    let tangent = |i: usize| {
        let (a, b) = if i + 1 < n { (points[i], points[i + 1]) } else { (points[i - 1], points[i]) };
        normalize3(&sub3(&b, &a)).unwrap_or([1.0, 0.0, 0.0])
    };
    let mut out = Vec::with_capacity(n);
    let t0 = tangent(0);
    let mut e1 = perpendicular(&t0);
    for i in 0..n {
        let t = tangent(i);
        e1 = normalize3(&sub3(&e1, &scale3(&t, dot3(&e1, &t)))).unwrap_or_else(|| perpendicular(&t));
        out.push((e1, cross3(&t, &e1)));
    }
    out
}

/// Streamlines of one bundle: the centerline shifted by a constant offset
/// (uniform over the tube's disc cross-section, in a transported frame),
/// resampled to `step` mm.
pub fn generate_streamlines(spec: &BundleSpec, step: f64, rng: &mut impl Rng) -> Result<Vec<Streamline>> {
    spec.validate()?;
    let dense = spec.centerline.dense();
    let frame = transport_frame(&dense);
    let mut out = Vec::with_capacity(spec.streamline_count);
    for _ in 0..spec.streamline_count {
        let r = spec.tube_radius * rng.random::<f64>().sqrt();
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let (a, b) = (r * phi.cos(), r * phi.sin());
        let shifted: Vec<Vec3<f64>> = dense
            .iter()
            .zip(&frame)
            .map(|(p, (e1, e2))| add3(p, &add3(&scale3(e1, a), &scale3(e2, b))))
            .collect();
        let mut s = resample(&Streamline::new(shifted, Some(spec.label)), step)?;
        s.label = Some(spec.label);
        let len = s.arc_length();
        if !(MIN_LENGTH..=MAX_LENGTH).contains(&len) {
            return Err(Error::InvalidSpec(format!(
                "bundle `{}`: jittered streamline length {len:.2} mm outside [{MIN_LENGTH}, {MAX_LENGTH}]",
                spec.name
            )));
        }
        out.push(s);
    }
    Ok(out)
}
