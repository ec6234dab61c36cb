//! Boolean voxel occupancy over an axis-aligned workspace box, analytic
//! obstacle rasterization and free-space erosion.
//!
//! Voxel `(i, j, k)` has its center at `min + (index + 0.5) * edge` and flat
//! index `i + nx * (j + ny * k)` (x fastest).

use alloc::vec;
use alloc::vec::Vec;

use crate::edt::distance_transform;
use crate::math::{floor, sqrt};
use crate::shapes::ObstacleShape;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorldBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl WorldBounds {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        if (0..3).any(|a| !(max[a] > min[a])) {
            return Err(Error::param("bounds", "max must exceed min on every axis"));
        }
        Ok(Self { min, max })
    }

    pub fn min_v(&self) -> Vec3 {
        Vec3::from(self.min)
    }

    pub fn max_v(&self) -> Vec3 {
        Vec3::from(self.max)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min[0], self.max[0]),
            p.y.clamp(self.min[1], self.max[1]),
            p.z.clamp(self.min[2], self.max[2]),
        )
    }
}

impl Default for WorldBounds {
    fn default() -> Self {
        Self {
            min: [-1.0, -1.0, 0.0],
            max: [1.0, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridDims {
    pub const MIN_PER_AXIS: usize = 8;

    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx.min(ny).min(nz) < Self::MIN_PER_AXIS {
            return Err(Error::param("dims", "every axis needs at least 8 voxels"));
        }
        Ok(Self { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        (i, j, k)
    }

    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || j == 0 || k == 0 || i + 1 == self.nx || j + 1 == self.ny || k + 1 == self.nz
    }
}

impl Default for GridDims {
    fn default() -> Self {
        Self {
            nx: 100,
            ny: 100,
            nz: 100,
        }
    }
}

/// Shared geometry of grids and fields on them.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridGeometry {
    pub bounds: WorldBounds,
    pub dims: GridDims,
}

impl GridGeometry {
    pub fn new(bounds: WorldBounds, dims: GridDims) -> Self {
        Self { bounds, dims }
    }

    /// Voxel edge length per axis.
    pub fn edge(&self) -> [f64; 3] {
        let n = self.dims.as_array();
        [0, 1, 2].map(|a| (self.bounds.max[a] - self.bounds.min[a]) / n[a] as f64)
    }

    pub fn half_diagonal(&self) -> f64 {
        let e = self.edge();
        0.5 * sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let e = self.edge();
        Vec3::new(
            self.bounds.min[0] + (i as f64 + 0.5) * e[0],
            self.bounds.min[1] + (j as f64 + 0.5) * e[1],
            self.bounds.min[2] + (k as f64 + 0.5) * e[2],
        )
    }

    pub fn center_of(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.dims.coords(idx);
        self.center(i, j, k)
    }

    /// Voxel containing `p`, or `None` outside the bounds.
    pub fn voxel_of(&self, p: &Vec3) -> Option<(usize, usize, usize)> {
        if !self.bounds.contains(p) {
            return None;
        }
        let e = self.edge();
        let n = self.dims.as_array();
        let c = [0, 1, 2].map(|a| {
            let f = floor((p[a] - self.bounds.min[a]) / e[a]);
            (f.max(0.0) as usize).min(n[a] - 1)
        });
        Some((c[0], c[1], c[2]))
    }

    /// Inner faces of the one-voxel wall shell: the analytic free box.
    pub fn inner_box(&self) -> (Vec3, Vec3) {
        let e = Vec3::from(self.edge());
        (self.bounds.min_v() + e, self.bounds.max_v() - e)
    }

    /// Inclusive voxel index range overlapping the world box `[lo, hi]`,
    /// or `None` if it misses the grid.
    pub fn index_range(&self, lo: &Vec3, hi: &Vec3) -> Option<[(usize, usize); 3]> {
        let e = self.edge();
        let n = self.dims.as_array();
        let mut out = [(0, 0); 3];
        for a in 0..3 {
            let l = floor((lo[a] - self.bounds.min[a]) / e[a]);
            let h = floor((hi[a] - self.bounds.min[a]) / e[a]);
            if h < 0.0 || l > (n[a] - 1) as f64 {
                return None;
            }
            out[a] = (l.max(0.0) as usize, (h as usize).min(n[a] - 1));
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub geometry: GridGeometry,
    pub occupied: Vec<bool>,
    pub timestamp: f64,
    /// Set by erosion when no free voxel survives.
    pub empty_interior: bool,
}

impl OccupancyGrid {
    /// Grid with only the outer wall shell occupied.
    pub fn walls_only(bounds: WorldBounds, dims: GridDims) -> Self {
        let geometry = GridGeometry::new(bounds, dims);
        let mut occupied = vec![false; dims.len()];
        for k in 0..dims.nz {
            for j in 0..dims.ny {
                for i in 0..dims.nx {
                    if dims.is_boundary(i, j, k) {
                        occupied[dims.index(i, j, k)] = true;
                    }
                }
            }
        }
        Self {
            geometry,
            occupied,
            timestamp: 0.0,
            empty_interior: false,
        }
    }

    pub fn bounds(&self) -> WorldBounds {
        self.geometry.bounds
    }

    pub fn dims(&self) -> GridDims {
        self.geometry.dims
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn free_count(&self) -> usize {
        self.occupied.len() - self.occupied_count()
    }

    pub fn is_occupied(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupied[self.geometry.dims.index(i, j, k)]
    }

    /// Whether the voxel containing `p` is occupied; points outside the
    /// bounds count as occupied.
    pub fn is_occupied_at(&self, p: &Vec3) -> bool {
        match self.geometry.voxel_of(p) {
            Some((i, j, k)) => self.is_occupied(i, j, k),
            None => true,
        }
    }

    /// Marks every voxel whose center lies closer than half a voxel diagonal
    /// to the shape (signed distance), so the shape is contained in the union
    /// of occupied voxels.
    pub fn add_shape(&mut self, shape: &ObstacleShape) {
        let g = self.geometry;
        let margin = g.half_diagonal();
        let (lo, hi) = shape.aabb();
        let pad = Vec3::repeat(margin);
        let Some(range) = g.index_range(&(lo - pad), &(hi + pad)) else {
            return;
        };
        for k in range[2].0..=range[2].1 {
            for j in range[1].0..=range[1].1 {
                for i in range[0].0..=range[0].1 {
                    let idx = g.dims.index(i, j, k);
                    if !self.occupied[idx] && shape.signed_distance(&g.center(i, j, k)) < margin {
                        self.occupied[idx] = true;
                    }
                }
            }
        }
    }
}

/// Walls plus conservatively rasterized shapes.
pub fn rasterize_scene(
    shapes: &[ObstacleShape],
    bounds: WorldBounds,
    dims: GridDims,
) -> OccupancyGrid {
    let mut grid = OccupancyGrid::walls_only(bounds, dims);
    for s in shapes {
        grid.add_shape(s);
    }
    grid
}

/// Per-voxel distance, in meters, from the voxel center to the nearest
/// occupied voxel center.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
}

impl DistanceField {
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.geometry.dims.index(i, j, k)]
    }
}

pub fn distance_to_occupied(grid: &OccupancyGrid) -> DistanceField {
    let g = grid.geometry;
    DistanceField {
        geometry: g,
        values: distance_transform(&grid.occupied, g.dims.as_array(), g.edge()),
    }
}

/// Pontryagin-style erosion of the free space by `radius`, with the
/// half-diagonal containment margin added to the threshold.
pub fn erode_free_space(grid: &OccupancyGrid, radius: f64) -> Result<OccupancyGrid> {
    if !(radius >= 0.0) {
        return Err(Error::param("radius", "must be non-negative"));
    }
    let dist = distance_to_occupied(grid);
    Ok(erode_with_threshold(
        grid,
        &dist,
        radius + grid.geometry.half_diagonal(),
    ))
}

/// A voxel ends up occupied iff it was occupied or its distance to the
/// occupied set is below `threshold`. A threshold of 0 is the identity.
pub fn erode_with_threshold(
    grid: &OccupancyGrid,
    dist: &DistanceField,
    threshold: f64,
) -> OccupancyGrid {
    let occupied: Vec<bool> = grid
        .occupied
        .iter()
        .zip(&dist.values)
        .map(|(&o, &d)| o || d < threshold)
        .collect();
    let empty_interior = occupied.iter().all(|&o| o);
    OccupancyGrid {
        geometry: grid.geometry,
        occupied,
        timestamp: grid.timestamp,
        empty_interior,
    }
}
