use std::path::Path;

use super::curve::{BundleSpec, Centerline};
use crate::config::KeyValues;
use crate::shcore::{GradientScheme, Grid};
use crate::{Error, Result, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomConfig {
    pub dims: [usize; 3],
    pub voxel_size: Vec3<f64>,
    pub origin: Vec3<f64>,
    pub bundles: Vec<BundleSpec>,
    /// Tensor eigenvalues, mm^2/s, largest first.
    pub diffusivities: [f64; 3],
    pub s0: f64,
    /// `S0 / sigma`; `None` for noiseless signals.
    pub snr: Option<f64>,
    pub scheme: GradientScheme,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            dims: [40, 40, 40],
            voxel_size: [1.0; 3],
            origin: [0.0; 3],
            bundles: Vec::new(),
            diffusivities: [1.7e-3, 0.3e-3, 0.3e-3],
            s0: 100.0,
            snr: None,
            scheme: GradientScheme::single_shell(64, 1000.0).expect("valid default scheme"),
            seed: 0,
        }
    }
}

fn fmt3(v: &Vec3<f64>) -> String {
    format!("{}, {}, {}", v[0], v[1], v[2])
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bundles.is_empty() {
            return Err(Error::InvalidConfig("phantom needs at least one bundle".into()));
        }
        let [l1, l2, l3] = self.diffusivities;
        if !(l3 > 0.0 && l2 >= l3 && l1 >= l2) {
            return Err(Error::InvalidConfig(format!(
                "diffusivities must satisfy l1 >= l2 >= l3 > 0, got {:?}",
                self.diffusivities
            )));
        }
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            return Err(Error::InvalidConfig(format!("s0 must be positive, got {}", self.s0)));
        }
        if let Some(snr) = self.snr {
            if !(snr > 0.0) || !snr.is_finite() {
                return Err(Error::InvalidConfig(format!("snr must be positive, got {snr}")));
            }
        }
        for (i, b) in self.bundles.iter().enumerate() {
            b.validate()?;
            if self.bundles[..i].iter().any(|o| o.label == b.label || o.name == b.name) {
                return Err(Error::InvalidConfig(format!("bundle `{}` repeats a name or label", b.name)));
            }
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<Grid<f64>> {
        Grid::axis_aligned(self.dims, self.voxel_size, self.origin)
    }

    /// Point spacing used to rasterise streamlines into masks.
    pub fn sampling_step(&self) -> f64 {
        0.5 * self.voxel_size.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Reads a config file; a relative `scheme.file` resolves against the
    /// file's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let kv = KeyValues::read(path)?;
        Self::from_kv(&kv, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_kv(kv: &KeyValues, base_dir: &Path) -> Result<Self> {
        let d = Self::default();
        let dims = match kv.get_list::<usize>("grid.dims")? {
            None => d.dims,
            Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
            Some(_) => return Err(Error::InvalidConfig("grid.dims needs 3 values".into())),
        };
        let scheme = match kv.raw("scheme.file") {
            Some(f) => GradientScheme::read(base_dir.join(f))?,
            None => {
                let n = kv.get_or("scheme.directions", 64usize)?;
                let b = kv.get_or("scheme.bvalue", 1000.0f64)?;
                GradientScheme::single_shell(n, b)?
            }
        };
        let snr = match kv.raw("snr") {
            None | Some("none") => None,
            Some(_) => Some(kv.require::<f64>("snr")?),
        };
        let diffusivities = kv.get_vec3("diffusivities")?.unwrap_or(d.diffusivities);

        let mut indices: Vec<usize> = kv
            .keys_with_prefix("bundle.")
            .filter_map(|k| k.split('.').nth(1))
            .map(|i| i.parse().map_err(|_| Error::InvalidConfig(format!("bad bundle index `{i}`"))))
            .collect::<Result<_>>()?;
        indices.sort_unstable();
        indices.dedup();
        let bundles = indices.into_iter().map(|i| parse_bundle(kv, i)).collect::<Result<_>>()?;

        let cfg = Self {
            dims,
            voxel_size: kv.get_vec3("grid.voxel_size")?.unwrap_or(d.voxel_size),
            origin: kv.get_vec3("grid.origin")?.unwrap_or(d.origin),
            bundles,
            diffusivities,
            s0: kv.get_or("s0", d.s0)?,
            snr,
            scheme,
            seed: kv.get_or("seed", d.seed)?,
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolved config text; the scheme is referenced as `scheme_file`.
    pub fn to_text(&self, scheme_file: &str) -> String {
        let mut kv = KeyValues::default();
        kv.insert("grid.dims", format!("{}, {}, {}", self.dims[0], self.dims[1], self.dims[2]));
        kv.insert("grid.voxel_size", fmt3(&self.voxel_size));
        kv.insert("grid.origin", fmt3(&self.origin));
        kv.insert("diffusivities", fmt3(&self.diffusivities));
        kv.insert("s0", self.s0);
        kv.insert("snr", self.snr.map_or("none".to_string(), |s| s.to_string()));
        kv.insert("scheme.file", scheme_file);
        kv.insert("seed", self.seed);
        for (i, b) in self.bundles.iter().enumerate() {
            let k = |f: &str| format!("bundle.{i}.{f}");
            kv.insert(k("name"), &b.name);
            kv.insert(k("label"), b.label);
            kv.insert(k("tube_radius"), b.tube_radius);
            kv.insert(k("count"), b.streamline_count);
            match &b.centerline {
                Centerline::Straight { start, end } => {
                    kv.insert(k("curve"), "straight");
                    kv.insert(k("start"), fmt3(start));
                    kv.insert(k("end"), fmt3(end));
                }
                Centerline::Arc { center, start, normal, angle } => {
                    kv.insert(k("curve"), "arc");
                    kv.insert(k("center"), fmt3(center));
                    kv.insert(k("start"), fmt3(start));
                    kv.insert(k("normal"), fmt3(normal));
                    kv.insert(k("angle"), angle.to_degrees());
                }
                Centerline::Helix { center, axis, radius, turns, pitch } => {
                    kv.insert(k("curve"), "helix");
                    kv.insert(k("center"), fmt3(center));
                    kv.insert(k("axis"), fmt3(axis));
                    kv.insert(k("radius"), radius);
                    kv.insert(k("turns"), turns);
                    kv.insert(k("pitch"), pitch);
                }
            }
        }
        kv.to_text()
    }
}

fn parse_bundle(kv: &KeyValues, i: usize) -> Result<BundleSpec> {
    let k = |f: &str| format!("bundle.{i}.{f}");
    let curve: String = kv.require(&k("curve"))?;
    let centerline = match curve.as_str() {
        "straight" => Centerline::Straight { start: kv.require_vec3(&k("start"))?, end: kv.require_vec3(&k("end"))? },
        "arc" => Centerline::Arc {
            center: kv.require_vec3(&k("center"))?,
            start: kv.require_vec3(&k("start"))?,
            normal: kv.require_vec3(&k("normal"))?,
            angle: kv.require::<f64>(&k("angle"))?.to_radians(),
        },
        "helix" => Centerline::Helix {
            center: kv.require_vec3(&k("center"))?,
            axis: kv.require_vec3(&k("axis"))?,
            radius: kv.require(&k("radius"))?,
            turns: kv.require(&k("turns"))?,
            pitch: kv.require(&k("pitch"))?,
        },
        other => return Err(Error::InvalidConfig(format!("{}: unknown curve `{other}`", k("curve")))),
    };
    Ok(BundleSpec {
        name: kv.get_or(&k("name"), format!("bundle{i}"))?,
        centerline,
        tube_radius: kv.get_or(&k("tube_radius"), 2.0)?,
        streamline_count: kv.get_or(&k("count"), 100)?,
        label: kv.get_or(&k("label"), i as u32)?,
    })
}
