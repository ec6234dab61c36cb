//! Poisson safety function: solve `∇²h = -c` on the free voxels with `h = 0`
//! on occupied voxels, then query the result continuously.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{GridGeometry, OccupancyGrid};
use crate::math::floor;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverSettings {
    /// Over-relaxation factor, `1 <= omega < 2`.
    pub omega: f64,
    /// Max-norm threshold on the 7-point Laplacian defect.
    pub residual_tol: f64,
    /// Sweep cap for cold solves.
    pub max_iters: usize,
    /// Sweep cap when a warm start is supplied.
    pub max_iters_warm: usize,
    /// Constant forcing magnitude; the right-hand side is `-forcing_c`.
    pub forcing_c: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            omega: 1.9,
            residual_tol: 1e-4,
            max_iters: 5000,
            max_iters_warm: 500,
            forcing_c: 6.0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 1.0 && self.omega < 2.0) {
            return Err(Error::param("omega", "must lie in [1, 2)"));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::param("residual_tol", "must be positive"));
        }
        if !(self.forcing_c > 0.0) {
            return Err(Error::param("forcing_c", "must be positive"));
        }
        if self.max_iters == 0 || self.max_iters_warm == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// Node values of the safety function on a voxel grid. Occupied nodes hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
    pub occupied: Vec<bool>,
    pub timestamp: f64,
    pub iterations_used: usize,
    pub residual: f64,
    pub converged: bool,
}

impl ScalarField {
    /// Field with explicit node values, e.g. for analytic test fields.
    pub fn from_values(
        geometry: GridGeometry,
        values: Vec<f64>,
        occupied: Vec<bool>,
    ) -> Result<Self> {
        let n = geometry.dims.len();
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: values.len(),
            });
        }
        if occupied.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: occupied.len(),
            });
        }
        Ok(Self {
            geometry,
            values,
            occupied,
            timestamp: 0.0,
            iterations_used: 0,
            residual: 0.0,
            converged: true,
        })
    }

    pub fn value_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.geometry.dims.index(i, j, k)]
    }

    fn check_domain(&self, p: &Vec3) -> Result<()> {
        if self.geometry.bounds.contains(p) && p.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                x: p.x,
                y: p.y,
                z: p.z,
            })
        }
    }

    /// Lower corner node and fractional offsets of the interpolation cell.
    fn cell(&self, p: &Vec3) -> ([usize; 3], [f64; 3]) {
        let e = self.geometry.edge();
        let n = self.geometry.dims.as_array();
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..3 {
            let u = (p[a] - self.geometry.bounds.min[a]) / e[a] - 0.5;
            let i0 = floor(u).clamp(0.0, (n[a] - 2) as f64);
            base[a] = i0 as usize;
            t[a] = (u - i0).clamp(0.0, 1.0);
        }
        (base, t)
    }

    fn trilinear<F: Fn(usize) -> f64>(&self, base: [usize; 3], t: [f64; 3], f: F) -> f64 {
        let d = self.geometry.dims;
        let mut acc = 0.0;
        for dk in 0..2 {
            let wk = if dk == 0 { 1.0 - t[2] } else { t[2] };
            for dj in 0..2 {
                let wj = if dj == 0 { 1.0 - t[1] } else { t[1] };
                for di in 0..2 {
                    let wi = if di == 0 { 1.0 - t[0] } else { t[0] };
                    let w = wi * wj * wk;
                    if w != 0.0 {
                        acc += w * f(d.index(base[0] + di, base[1] + dj, base[2] + dk));
                    }
                }
            }
        }
        acc
    }

    /// Trilinear interpolation of the node values.
    pub fn sample_value(&self, p: &Vec3) -> Result<f64> {
        self.check_domain(p)?;
        let (base, t) = self.cell(p);
        Ok(self.trilinear(base, t, |idx| self.values[idx]))
    }

    /// Finite-difference gradient at a node. Differences only reach into
    /// free neighbors: central when both are free, one-sided toward the free
    /// side when only one is, and central over the stored zeros otherwise.
    pub fn node_gradient(&self, idx: usize) -> Vec3 {
        let d = self.geometry.dims;
        let e = self.geometry.edge();
        let (i, j, k) = d.coords(idx);
        let pos = [i, j, k];
        let n = d.as_array();
        let stride = [1, d.nx, d.nx * d.ny];
        let mut g = Vec3::zeros();
        for a in 0..3 {
            let lo = (pos[a] > 0).then(|| idx - stride[a]);
            let hi = (pos[a] + 1 < n[a]).then(|| idx + stride[a]);
            let free = |o: Option<usize>| o.is_some_and(|m| !self.occupied[m]);
            let val = |o: Option<usize>| o.map_or(0.0, |m| self.values[m]);
            let v = self.values[idx];
            g[a] = match (free(lo), free(hi)) {
                (true, true) => (val(hi) - val(lo)) / (2.0 * e[a]),
                (true, false) => (v - val(lo)) / e[a],
                (false, true) => (val(hi) - v) / e[a],
                (false, false) => (val(hi) - val(lo)) / (2.0 * e[a]),
            };
        }
        g
    }

    /// Trilinear interpolation of per-node finite-difference gradients.
    pub fn sample_gradient(&self, p: &Vec3) -> Result<Vec3> {
        self.check_domain(p)?;
        let (base, t) = self.cell(p);
        let mut g = Vec3::zeros();
        for a in 0..3 {
            // cheap enough for tens of queries per tick
            g[a] = self.trilinear(base, t, |idx| self.node_gradient(idx)[a]);
        }
        Ok(g)
    }

    /// Value and gradient in one call.
    pub fn sample(&self, p: &Vec3) -> Result<(f64, Vec3)> {
        self.check_domain(p)?;
        let (base, t) = self.cell(p);
        let d = self.geometry.dims;
        let mut h = 0.0;
        let mut g = Vec3::zeros();
        for dk in 0..2 {
            let wk = if dk == 0 { 1.0 - t[2] } else { t[2] };
            for dj in 0..2 {
                let wj = if dj == 0 { 1.0 - t[1] } else { t[1] };
                for di in 0..2 {
                    let wi = if di == 0 { 1.0 - t[0] } else { t[0] };
                    let w = wi * wj * wk;
                    if w != 0.0 {
                        let idx = d.index(base[0] + di, base[1] + dj, base[2] + dk);
                        h += w * self.values[idx];
                        g += self.node_gradient(idx) * w;
                    }
                }
            }
        }
        Ok((h, g))
    }

    /// Max-norm of `∇²h + c` over free nodes, recomputed from scratch.
    pub fn max_residual(&self, forcing_c: f64) -> f64 {
        laplacian_defect(&self.geometry, &self.values, &self.occupied, forcing_c)
    }
}

/// `max |∇²h + c|` over free voxels using the 7-point stencil. Neighbors
/// outside the grid count as zero.
pub fn laplacian_defect(
    geometry: &GridGeometry,
    values: &[f64],
    occupied: &[bool],
    forcing_c: f64,
) -> f64 {
    let d = geometry.dims;
    let e = geometry.edge();
    let c = [0, 1, 2].map(|a| 1.0 / (e[a] * e[a]));
    let n = d.as_array();
    let stride = [1, d.nx, d.nx * d.ny];
    let mut worst: f64 = 0.0;
    for idx in 0..d.len() {
        if occupied[idx] {
            continue;
        }
        let (i, j, k) = d.coords(idx);
        let pos = [i, j, k];
        let mut lap = 0.0;
        for a in 0..3 {
            let lo = if pos[a] > 0 {
                values[idx - stride[a]]
            } else {
                0.0
            };
            let hi = if pos[a] + 1 < n[a] {
                values[idx + stride[a]]
            } else {
                0.0
            };
            lap += c[a] * (lo + hi - 2.0 * values[idx]);
        }
        worst = worst.max((lap + forcing_c).abs());
    }
    worst
}

/// Red-black SOR solve on the free voxels of `buffered`.
///
/// Warm-start values are reused wherever a voxel is free in both grids. The
/// result carries the sweep count, the recomputed residual and whether the
/// tolerance was met before the cap.
pub fn solve_poisson(
    buffered: &OccupancyGrid,
    settings: &SolverSettings,
    warm_start: Option<&ScalarField>,
) -> Result<ScalarField> {
    settings.validate()?;
    let geometry = buffered.geometry;
    let d = geometry.dims;
    if buffered.empty_interior || buffered.occupied.iter().all(|&o| o) {
        return Err(Error::EmptyInterior);
    }
    if let Some(w) = warm_start {
        if w.geometry != geometry {
            return Err(Error::GeometryMismatch("warm start differs from the grid"));
        }
    }

    // free voxels as contiguous x-runs: (first index, one past last, parity of first)
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    for idx in 0..d.len() {
        if buffered.occupied[idx] {
            continue;
        }
        let (i, j, k) = d.coords(idx);
        if d.is_boundary(i, j, k) {
            return Err(Error::param(
                "buffered",
                "outer voxel layer must be occupied",
            ));
        }
        match runs.last_mut() {
            Some(run) if run.1 == idx => run.1 += 1,
            _ => runs.push((idx, idx + 1, (i + j + k) % 2)),
        }
    }

    let mut values = vec![0.0; d.len()];
    if let Some(w) = warm_start {
        for &(lo, hi, _) in &runs {
            for ((v, &wv), &occ) in values[lo..hi]
                .iter_mut()
                .zip(&w.values[lo..hi])
                .zip(&w.occupied[lo..hi])
            {
                if !occ {
                    *v = wv;
                }
            }
        }
    }

    let e = geometry.edge();
    let stencil = Stencil {
        c: [0, 1, 2].map(|a| 1.0 / (e[a] * e[a])),
        stride: [1, d.nx, d.nx * d.ny],
        f: settings.forcing_c,
        omega: settings.omega,
    };
    let tol = settings.residual_tol;
    let cap = if warm_start.is_some() {
        settings.max_iters_warm
    } else {
        settings.max_iters
    };

    let mut residual = laplacian_defect(&geometry, &values, &buffered.occupied, stencil.f);
    let mut sweeps = 0usize;
    while residual > tol && sweeps < cap {
        let monitor =
            stencil
                .sweep(&mut values, &runs, 0)
                .max(stencil.sweep(&mut values, &runs, 1));
        sweeps += 1;
        // the in-sweep defects are a cheap proxy; confirm with a clean pass
        if monitor <= tol || sweeps == cap {
            residual = laplacian_defect(&geometry, &values, &buffered.occupied, stencil.f);
        }
    }

    Ok(ScalarField {
        geometry,
        values,
        occupied: buffered.occupied.clone(),
        timestamp: buffered.timestamp,
        iterations_used: sweeps,
        residual,
        converged: residual <= tol,
    })
}

struct Stencil {
    c: [f64; 3],
    stride: [usize; 3],
    f: f64,
    omega: f64,
}

impl Stencil {
    /// Updates every voxel of one parity; returns the largest defect seen.
    fn sweep(&self, values: &mut [f64], runs: &[(usize, usize, usize)], parity: usize) -> f64 {
        let [cx, cy, cz] = self.c;
        let [_, sy, sz] = self.stride;
        let diag = 2.0 * (cx + cy + cz);
        let scale = self.omega / diag;
        let mut monitor: f64 = 0.0;
        for &(lo, hi, p) in runs {
            // runs hold interior voxels only, so every neighbor is in bounds
            debug_assert!(lo >= sz && hi + sz <= values.len());
            let row = &mut values[lo - sz..hi + sz];
            let mut i = sz + (parity + 2 - p) % 2;
            let end = hi - lo + sz;
            while i < end {
                let sum = cx * (row[i - 1] + row[i + 1])
                    + cy * (row[i - sy] + row[i + sy])
                    + cz * (row[i - sz] + row[i + sz]);
                let defect = sum + self.f - diag * row[i];
                monitor = monitor.max(defect.abs());
                row[i] += scale * defect;
                i += 2;
            }
        }
        monitor
    }
}

/// The latest published field and, for moving scenes, its predecessor.
#[derive(Debug, Clone)]
pub struct FieldPair {
    pub current: Arc<ScalarField>,
    pub previous: Option<Arc<ScalarField>>,
    pub dt: f64,
}

impl FieldPair {
    pub fn single(current: Arc<ScalarField>) -> Self {
        Self {
            current,
            previous: None,
            dt: 0.0,
        }
    }

    pub fn new(current: Arc<ScalarField>, previous: Arc<ScalarField>) -> Result<Self> {
        if current.geometry != previous.geometry {
            return Err(Error::GeometryMismatch("field pair geometries differ"));
        }
        let dt = current.timestamp - previous.timestamp;
        if !(dt > 0.0) {
            return Err(Error::param(
                "dt",
                "current field must be newer than previous",
            ));
        }
        Ok(Self {
            current,
            previous: Some(previous),
            dt,
        })
    }

    /// Backward difference of the two solves at `p`; 0 without a predecessor.
    pub fn time_derivative(&self, p: &Vec3) -> Result<f64> {
        match &self.previous {
            None => Ok(0.0),
            Some(prev) => {
                if !(self.dt > 0.0) {
                    return Err(Error::param("dt", "must be positive"));
                }
                Ok((self.current.sample_value(p)? - prev.sample_value(p)?) / self.dt)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridDims, WorldBounds};

    fn geom(n: usize) -> GridGeometry {
        GridGeometry::new(
            WorldBounds::new([-1.0, -1.0, 0.0], [1.0, 1.0, 2.0]).unwrap(),
            GridDims::cube(n).unwrap(),
        )
    }

    #[test]
    fn settings_validation() {
        let mut s = SolverSettings::default();
        assert!(s.validate().is_ok());
        s.omega = 2.0;
        assert!(s.validate().is_err());
        s = SolverSettings {
            forcing_c: 0.0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_unknown() {
        let g = geom(16);
        let mut grid = OccupancyGrid::walls_only(g.bounds, g.dims);
        grid.occupied.iter_mut().for_each(|o| *o = true);
        let idx = g.dims.index(8, 8, 8);
        grid.occupied[idx] = false;
        let e = g.edge()[0];
        // Gauss-Seidel solves an isolated unknown exactly
        let s = SolverSettings {
            omega: 1.0,
            ..Default::default()
        };
        let f = solve_poisson(&grid, &s, None).unwrap();
        assert!((f.values[idx] - s.forcing_c * e * e / 6.0).abs() < 1e-15);
        // the second sweep only confirms the in-sweep monitor
        assert!(f.iterations_used <= 2);
        assert!(f.converged);
        // over-relaxed: stops once the defect is below tolerance
        let s = SolverSettings::default();
        let f = solve_poisson(&grid, &s, None).unwrap();
        let diag = 6.0 / (e * e);
        assert!((f.values[idx] - s.forcing_c * e * e / 6.0).abs() <= f.residual / diag + 1e-15);
        assert!(f.converged);
    }

    #[test]
    fn empty_interior_refused() {
        let g = geom(8);
        let mut grid = OccupancyGrid::walls_only(g.bounds, g.dims);
        grid.occupied.iter_mut().for_each(|o| *o = true);
        assert_eq!(
            solve_poisson(&grid, &SolverSettings::default(), None),
            Err(Error::EmptyInterior)
        );
    }

    #[test]
    fn warm_start_from_converged_field_is_immediate() {
        let g = geom(16);
        let grid = OccupancyGrid::walls_only(g.bounds, g.dims);
        let s = SolverSettings::default();
        let cold = solve_poisson(&grid, &s, None).unwrap();
        assert!(cold.converged);
        let warm = solve_poisson(&grid, &s, Some(&cold)).unwrap();
        assert!(warm.iterations_used <= 2);
    }

    #[test]
    fn cap_reports_non_convergence() {
        let g = geom(16);
        let grid = OccupancyGrid::walls_only(g.bounds, g.dims);
        let s = SolverSettings {
            max_iters: 3,
            ..Default::default()
        };
        let f = solve_poisson(&grid, &s, None).unwrap();
        assert!(!f.converged);
        assert_eq!(f.iterations_used, 3);
        assert!((f.residual - f.max_residual(s.forcing_c)).abs() < 1e-12);
    }

    fn ramp(g: GridGeometry, a: f64) -> ScalarField {
        let values = (0..g.dims.len()).map(|i| a * g.center_of(i).x).collect();
        ScalarField::from_values(g, values, vec![false; g.dims.len()]).unwrap()
    }

    #[test]
    fn interpolation_exact_at_nodes_and_on_linear_fields() {
        let g = geom(16);
        let f = ramp(g, 0.7);
        let c = g.center(3, 9, 4);
        assert_eq!(f.sample_value(&c).unwrap(), f.value_at(3, 9, 4));
        for p in [Vec3::new(0.123, -0.4, 1.3), Vec3::new(-0.77, 0.5, 0.25)] {
            assert!((f.sample_value(&p).unwrap() - 0.7 * p.x).abs() < 1e-14);
            let grad = f.sample_gradient(&p).unwrap();
            assert!((grad - Vec3::new(0.7, 0.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain_queries_fail() {
        let f = ramp(geom(8), 1.0);
        assert!(matches!(
            f.sample_value(&Vec3::new(2.0, 0.0, 1.0)),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(f.sample_gradient(&Vec3::new(0.0, 0.0, -0.1)).is_err());
    }

    #[test]
    fn time_derivative_cases() {
        let g = geom(8);
        let mut cur = ramp(g, 1.0);
        cur.timestamp = 0.02;
        let mut prev = cur.clone();
        prev.timestamp = 0.0;
        let p = Vec3::new(0.1, 0.2, 1.0);
        let same = FieldPair::new(Arc::new(cur.clone()), Arc::new(prev.clone())).unwrap();
        assert_eq!(same.time_derivative(&p).unwrap(), 0.0);
        prev.values.iter_mut().for_each(|v| *v -= 0.01);
        let shifted = FieldPair::new(Arc::new(cur.clone()), Arc::new(prev.clone())).unwrap();
        assert!((shifted.time_derivative(&p).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(
            FieldPair::single(Arc::new(cur.clone()))
                .time_derivative(&p)
                .unwrap(),
            0.0
        );
        prev.timestamp = 0.05;
        assert!(FieldPair::new(Arc::new(cur), Arc::new(prev)).is_err());
    }
}
