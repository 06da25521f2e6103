use crate::{Error, Real, Result, Vec3};

/// Cells in a 3x3x3 neighbourhood patch.
pub const PATCH_CELLS: usize = 27;

/// Voxel lattice geometry: dimensions, voxel size and the voxel-to-world
/// affine. Voxel `(i, j, k)` has its centre at `affine * (i, j, k, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    dims: [usize; 3],
    voxel_size: Vec3<T>,
    affine: [[T; 4]; 4],
    inverse: [[T; 4]; 4],
}

impl<T: Real> Grid<T> {
    pub fn new(dims: [usize; 3], voxel_size: Vec3<T>, affine: [[T; 4]; 4]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!("empty grid {dims:?}")));
        }
        if voxel_size.iter().any(|&v| !(v > T::zero())) {
            return Err(Error::invalid("voxel sizes must be positive"));
        }
        let inverse = invert_affine(&affine).ok_or_else(|| Error::invalid("affine is not invertible"))?;
        Ok(Self { dims, voxel_size, affine, inverse })
    }

    /// Axis-aligned grid whose voxel `(0,0,0)` sits at `origin`.
    pub fn axis_aligned(dims: [usize; 3], voxel_size: Vec3<T>, origin: Vec3<T>) -> Result<Self> {
        let z = T::zero();
        let affine = [
            [voxel_size[0], z, z, origin[0]],
            [z, voxel_size[1], z, origin[1]],
            [z, z, voxel_size[2], origin[2]],
            [z, z, z, T::one()],
        ];
        Self::new(dims, voxel_size, affine)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> Vec3<T> {
        self.voxel_size
    }

    pub fn affine(&self) -> &[[T; 4]; 4] {
        &self.affine
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn linear_index(&self, ijk: [usize; 3]) -> usize {
        (ijk[2] * self.dims[1] + ijk[1]) * self.dims[0] + ijk[0]
    }

    pub fn voxel_of_index(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let y = (idx / self.dims[0]) % self.dims[1];
        let z = idx / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// World-mm position of a continuous voxel coordinate.
    pub fn voxel_to_world(&self, v: &Vec3<T>) -> Vec3<T> {
        apply(&self.affine, v)
    }

    pub fn voxel_center(&self, ijk: [usize; 3]) -> Vec3<T> {
        self.voxel_to_world(&[T::c(ijk[0] as f64), T::c(ijk[1] as f64), T::c(ijk[2] as f64)])
    }

    /// Continuous voxel coordinate of a world point. Coordinates within a
    /// few ulps of an integer are snapped so voxel centres map exactly.
    pub fn world_to_voxel(&self, p: &Vec3<T>) -> Vec3<T> {
        let mut v = apply(&self.inverse, p);
        for c in v.iter_mut() {
            let r = c.round();
            if (*c - r).abs() <= T::epsilon() * T::c(64.0) * r.abs().max(T::one()) {
                *c = r;
            }
        }
        v
    }

    /// True when the point lies within the grid extent (voxel cubes
    /// included, so half a voxel beyond the outermost centres).
    pub fn contains(&self, p: &Vec3<T>) -> bool {
        let v = self.world_to_voxel(p);
        self.contains_voxel_coord(&v)
    }

    pub(crate) fn contains_voxel_coord(&self, v: &Vec3<T>) -> bool {
        let half = T::c(0.5);
        (0..3).all(|a| v[a] >= -half && v[a] <= T::c(self.dims[a] as f64) - half)
    }

    /// Index of the voxel whose cube contains the point.
    pub fn containing_voxel(&self, p: &Vec3<T>) -> Option<[usize; 3]> {
        self.voxel_of_coord(&self.world_to_voxel(p))
    }

    pub(crate) fn voxel_of_coord(&self, v: &Vec3<T>) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = (v[a] + T::c(0.5)).floor();
            if !(r >= T::zero()) || r >= T::c(self.dims[a] as f64) {
                return None;
            }
            out[a] = r.to_usize().unwrap();
        }
        Some(out)
    }

    pub fn cast<U: Real>(&self) -> Grid<U> {
        Grid {
            dims: self.dims,
            voxel_size: crate::cast3(&self.voxel_size),
            affine: cast_mat(&self.affine),
            inverse: cast_mat(&self.inverse),
        }
    }
}

fn cast_mat<T: Real, U: Real>(m: &[[T; 4]; 4]) -> [[U; 4]; 4] {
    let mut o = [[U::zero(); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            o[r][c] = U::c(m[r][c].to_f64().unwrap());
        }
    }
    o
}

/// Multi-channel voxel grid. Storage is channel-fastest, then x, then y,
/// then z.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    grid: Grid<T>,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Volume<T> {
    pub fn new(
        dims: [usize; 3],
        channels: usize,
        voxel_size: Vec3<T>,
        affine: [[T; 4]; 4],
        data: Vec<T>,
    ) -> Result<Self> {
        Self::from_grid(Grid::new(dims, voxel_size, affine)?, channels, data)
    }

    pub fn from_grid(grid: Grid<T>, channels: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("volume needs at least one channel"));
        }
        let expected = grid.n_voxels() * channels;
        if data.len() != expected {
            return Err(Error::invalid(format!("volume needs {expected} values, got {}", data.len())));
        }
        Ok(Self { grid, channels, data })
    }

    /// Zero-filled axis-aligned volume whose voxel `(0,0,0)` sits at `origin`.
    pub fn axis_aligned(dims: [usize; 3], channels: usize, voxel_size: Vec3<T>, origin: Vec3<T>) -> Result<Self> {
        let grid = Grid::axis_aligned(dims, voxel_size, origin)?;
        let n = grid.n_voxels() * channels;
        Self::from_grid(grid, channels, vec![T::zero(); n])
    }

    /// Empty volume with the same geometry and a different channel count.
    pub fn zeros_like(&self, channels: usize) -> Self {
        Self { grid: self.grid.clone(), channels, data: vec![T::zero(); self.n_voxels() * channels] }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn voxel_size(&self) -> Vec3<T> {
        self.grid.voxel_size
    }

    pub fn affine(&self) -> &[[T; 4]; 4] {
        &self.grid.affine
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn n_voxels(&self) -> usize {
        self.grid.n_voxels()
    }

    #[inline]
    pub fn linear_index(&self, ijk: [usize; 3]) -> usize {
        self.grid.linear_index(ijk)
    }

    pub fn voxel_of_index(&self, idx: usize) -> [usize; 3] {
        self.grid.voxel_of_index(idx)
    }

    #[inline]
    pub fn voxel(&self, ijk: [usize; 3]) -> &[T] {
        let o = self.linear_index(ijk) * self.channels;
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn voxel_mut(&mut self, ijk: [usize; 3]) -> &mut [T] {
        let o = self.linear_index(ijk) * self.channels;
        &mut self.data[o..o + self.channels]
    }

    pub fn voxel_to_world(&self, v: &Vec3<T>) -> Vec3<T> {
        self.grid.voxel_to_world(v)
    }

    pub fn voxel_center(&self, ijk: [usize; 3]) -> Vec3<T> {
        self.grid.voxel_center(ijk)
    }

    pub fn world_to_voxel(&self, p: &Vec3<T>) -> Vec3<T> {
        self.grid.world_to_voxel(p)
    }

    pub fn contains(&self, p: &Vec3<T>) -> bool {
        self.grid.contains(p)
    }

    pub fn containing_voxel(&self, p: &Vec3<T>) -> Option<[usize; 3]> {
        self.grid.containing_voxel(p)
    }

    /// Channel-wise trilinear interpolation at a world point.
    pub fn sample(&self, p: &Vec3<T>) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.channels];
        self.sample_into(p, &mut out)?;
        Ok(out)
    }

    pub fn sample_into(&self, p: &Vec3<T>, out: &mut [T]) -> Result<()> {
        let v = self.grid.world_to_voxel(p);
        if !self.grid.contains_voxel_coord(&v) {
            return Err(Error::out_of_bounds(p));
        }
        self.sample_voxel_coord(&v, out);
        Ok(())
    }

    fn sample_voxel_coord(&self, v: &Vec3<T>, out: &mut [T]) {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for a in 0..3 {
            let n = self.grid.dims[a];
            if n == 1 {
                continue;
            }
            let f = v[a].floor().max(T::zero()).min(T::c((n - 2) as f64));
            lo[a] = f.to_usize().unwrap();
            hi[a] = lo[a] + 1;
            frac[a] = (v[a] - f).max(T::zero()).min(T::one());
        }
        let [fx, fy, fz] = frac;
        let lerp = |a: T, b: T, f: T| a + f * (b - a);
        let c000 = self.voxel([lo[0], lo[1], lo[2]]);
        let c100 = self.voxel([hi[0], lo[1], lo[2]]);
        let c010 = self.voxel([lo[0], hi[1], lo[2]]);
        let c110 = self.voxel([hi[0], hi[1], lo[2]]);
        let c001 = self.voxel([lo[0], lo[1], hi[2]]);
        let c101 = self.voxel([hi[0], lo[1], hi[2]]);
        let c011 = self.voxel([lo[0], hi[1], hi[2]]);
        let c111 = self.voxel([hi[0], hi[1], hi[2]]);
        for (c, o) in out.iter_mut().enumerate() {
            let y0 = lerp(lerp(c000[c], c100[c], fx), lerp(c010[c], c110[c], fx), fy);
            let y1 = lerp(lerp(c001[c], c101[c], fx), lerp(c011[c], c111[c], fx), fy);
            *o = lerp(y0, y1, fz);
        }
    }

    /// Samples the 3x3x3 neighbourhood of a point at one-voxel offsets
    /// along the world axes. Output layout is `[i][j][k][channel]` with
    /// `i, j, k` indexing offsets `-1, 0, +1` along x, y, z.
    pub fn extract_neighborhood(&self, p: &Vec3<T>) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); PATCH_CELLS * self.channels];
        self.extract_neighborhood_into(p, &mut out)?;
        Ok(out)
    }

    pub fn extract_neighborhood_into(&self, p: &Vec3<T>, out: &mut [T]) -> Result<()> {
        assert_eq!(out.len(), PATCH_CELLS * self.channels, "patch buffer size");
        let vs = self.grid.voxel_size;
        let mut cell = 0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let q = [
                        p[0] + T::c(i as f64 - 1.0) * vs[0],
                        p[1] + T::c(j as f64 - 1.0) * vs[1],
                        p[2] + T::c(k as f64 - 1.0) * vs[2],
                    ];
                    let dst = &mut out[cell * self.channels..(cell + 1) * self.channels];
                    if i == 1 && j == 1 && k == 1 {
                        self.sample_into(p, dst)?;
                    } else {
                        self.sample_into(&q, dst)?;
                    }
                    cell += 1;
                }
            }
        }
        Ok(())
    }

    /// Copy of the data converted to another scalar type.
    pub fn cast<U: Real>(&self) -> Volume<U> {
        Volume {
            grid: self.grid.cast(),
            channels: self.channels,
            data: self.data.iter().map(|&x| U::c(x.to_f64().unwrap())).collect(),
        }
    }
}

fn apply<T: Real>(m: &[[T; 4]; 4], v: &Vec3<T>) -> Vec3<T> {
    let mut o = [T::zero(); 3];
    for (r, out) in o.iter_mut().enumerate() {
        *out = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3];
    }
    o
}

/// Inverse of an affine 4x4 (last row `0 0 0 1`), via the 3x3 block.
fn invert_affine<T: Real>(m: &[[T; 4]; 4]) -> Option<[[T; 4]; 4]> {
    let a = |r: usize, c: usize| m[r][c];
    let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
        - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
        + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    let bottom_ok = m[3][0] == T::zero() && m[3][1] == T::zero() && m[3][2] == T::zero() && m[3][3] == T::one();
    if !bottom_ok {
        return None;
    }
    let inv_det = T::one() / det;
    let mut r = [[T::zero(); 4]; 4];
    r[0][0] = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) * inv_det;
    r[0][1] = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) * inv_det;
    r[0][2] = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) * inv_det;
    r[1][0] = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) * inv_det;
    r[1][1] = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) * inv_det;
    r[1][2] = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) * inv_det;
    r[2][0] = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) * inv_det;
    r[2][1] = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) * inv_det;
    r[2][2] = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) * inv_det;
    for i in 0..3 {
        r[i][3] = -(r[i][0] * m[0][3] + r[i][1] * m[1][3] + r[i][2] * m[2][3]);
    }
    r[3][3] = T::one();
    Some(r)
}
