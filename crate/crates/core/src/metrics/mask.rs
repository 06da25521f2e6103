use crate::shcore::{Grid, Volume};
use crate::{Error, Real, Result, Vec3};

/// Binary voxel set over a fixed grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelMask {
    grid: Grid<f64>,
    words: Vec<u64>,
}

impl VoxelMask {
    pub fn new(grid: Grid<f64>) -> Self {
        let n = grid.n_voxels();
        Self { grid, words: vec![0; n.div_ceil(64)] }
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims()
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    #[inline]
    pub fn set_index(&mut self, idx: usize) {
        self.words[idx / 64] |= 1 << (idx % 64);
    }

    pub fn get(&self, ijk: [usize; 3]) -> bool {
        self.get_index(self.grid.linear_index(ijk))
    }

    pub fn set(&mut self, ijk: [usize; 3]) {
        let i = self.grid.linear_index(ijk);
        self.set_index(i);
    }

    /// Whether the voxel containing `p` is set; false outside the grid.
    pub fn contains_point(&self, p: &Vec3<f64>) -> bool {
        self.grid.containing_voxel(p).is_some_and(|v| self.get(v))
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::invalid(format!(
                "mask grids differ: {:?} vs {:?}",
                self.grid.dims(),
                other.grid.dims()
            )));
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &Self) -> Result<usize> {
        self.check_same_grid(other)?;
        Ok(self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum())
    }

    /// `|self \ other|`
    pub fn difference_count(&self, other: &Self) -> Result<usize> {
        self.check_same_grid(other)?;
        Ok(self.words.iter().zip(&other.words).map(|(a, b)| (a & !b).count_ones() as usize).sum())
    }

    pub fn union_with(&mut self, other: &Self) -> Result<()> {
        self.check_same_grid(other)?;
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a |= b);
        Ok(())
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.n_voxels()).filter(move |&i| self.get_index(i))
    }

    pub fn voxels(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.indices().map(move |i| self.grid.voxel_of_index(i))
    }

    /// Chebyshev (cube) dilation by `radius` voxels, clipped to the grid.
    pub fn dilate(&self, radius: usize) -> Self {
        let mut out = Self::new(self.grid.clone());
        let dims = self.dims();
        let r = radius as isize;
        for v in self.voxels() {
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        let q = [v[0] as isize + dx, v[1] as isize + dy, v[2] as isize + dz];
                        if (0..3).all(|a| q[a] >= 0 && (q[a] as usize) < dims[a]) {
                            out.set([q[0] as usize, q[1] as usize, q[2] as usize]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Single-channel 0/1 volume.
    pub fn to_volume<T: Real>(&self) -> Volume<T> {
        let data = (0..self.grid.n_voxels()).map(|i| if self.get_index(i) { T::one() } else { T::zero() }).collect();
        Volume::from_grid(self.grid.cast(), 1, data).expect("grid sized data")
    }

    /// Voxels whose first channel is above one half.
    pub fn from_volume<T: Real>(vol: &Volume<T>) -> Self {
        let mut m = Self::new(vol.grid().cast());
        let half = T::c(0.5);
        for i in 0..vol.n_voxels() {
            if vol.data()[i * vol.channels()] > half {
                m.set_index(i);
            }
        }
        m
    }
}
