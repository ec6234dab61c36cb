//! The field pipeline: rasterize → distance transform → erode → solve.

use alloc::sync::Arc;

use crate::grid::{distance_to_occupied, erode_with_threshold, GridGeometry, OccupancyGrid};
use crate::psf::{solve_poisson, FieldPair, ScalarField, SolverSettings};
use crate::shapes::ObstacleShape;
use crate::sim::Clock;
use crate::{Error, Result};

/// One published field with the grids it was built from.
#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub pair: FieldPair,
    /// Free space eroded by `ε + δ`: where samples must lie.
    pub premise: Arc<OccupancyGrid>,
    /// Free space the PDE was solved on.
    pub pde_grid: Arc<OccupancyGrid>,
    pub t: f64,
    pub pde_iters: usize,
    pub pde_residual: f64,
    pub converged: bool,
    pub rasterize_time: f64,
    /// Distance transform plus both erosions.
    pub buffer_time: f64,
    pub pde_time: f64,
}

impl FieldSnapshot {
    /// The same field with `∂h/∂t = 0`, for ticks where nothing moved.
    pub fn settled(&self) -> Self {
        let mut s = self.clone();
        s.pair = FieldPair::single(self.pair.current.clone());
        s
    }
}

/// Builds fields for a fixed grid, caching the static part of the scene and
/// warm-starting each solve from the previous one.
#[derive(Debug, Clone)]
pub struct FieldBuilder {
    geometry: GridGeometry,
    settings: SolverSettings,
    premise_radius: f64,
    static_grid: OccupancyGrid,
    previous: Option<Arc<ScalarField>>,
}

impl FieldBuilder {
    /// `buffer` is the Pontryagin radius `ε + δ`. The PDE domain is eroded by
    /// one more voxel diagonal, so that wherever the interpolated field is
    /// positive some node of the cell is free, which keeps `{h > 0}` inside
    /// the `ε + δ` erosion.
    pub fn new(
        geometry: GridGeometry,
        static_shapes: &[ObstacleShape],
        buffer: f64,
        settings: SolverSettings,
    ) -> Result<Self> {
        if !(buffer >= 0.0) {
            return Err(Error::param("buffer", "must be non-negative"));
        }
        settings.validate()?;
        let mut static_grid = OccupancyGrid::walls_only(geometry.bounds, geometry.dims);
        for s in static_shapes {
            static_grid.add_shape(s);
        }
        Ok(Self {
            geometry,
            settings,
            premise_radius: buffer,
            static_grid,
            previous: None,
        })
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// Forgets the warm start (e.g. after a reset).
    pub fn reset(&mut self) {
        self.previous = None;
    }

    pub fn build(
        &mut self,
        dynamic_shapes: &[ObstacleShape],
        t: f64,
        clock: &dyn Clock,
    ) -> Result<FieldSnapshot> {
        let t0 = clock.now();
        let mut grid = self.static_grid.clone();
        for s in dynamic_shapes {
            grid.add_shape(s);
        }
        grid.timestamp = t;
        let t1 = clock.now();

        let dist = distance_to_occupied(&grid);
        let half = self.geometry.half_diagonal();
        let premise = erode_with_threshold(&grid, &dist, self.premise_radius + half);
        let pde_grid = erode_with_threshold(&grid, &dist, self.premise_radius + 3.0 * half);
        let t2 = clock.now();
        if pde_grid.empty_interior {
            return Err(Error::EmptyInterior);
        }

        let field = solve_poisson(&pde_grid, &self.settings, self.previous.as_deref())?;
        let t3 = clock.now();
        let field = Arc::new(field);
        let pair = match self.previous.take() {
            Some(prev) if prev.timestamp < t => FieldPair::new(field.clone(), prev)?,
            _ => FieldPair::single(field.clone()),
        };
        self.previous = Some(field.clone());
        Ok(FieldSnapshot {
            pair,
            premise: Arc::new(premise),
            pde_grid: Arc::new(pde_grid),
            t,
            pde_iters: field.iterations_used,
            pde_residual: field.residual,
            converged: field.converged,
            rasterize_time: t1 - t0,
            buffer_time: t2 - t1,
            pde_time: t3 - t2,
        })
    }
}
