//! Dense dual active-set solver (Goldfarb–Idnani) for Euclidean projections
//! onto polyhedra:
//!
//! ```text
//! minimize ½‖x − x₀‖²  subject to  C x ≥ d
//! ```
//!
//! With an identity Hessian the method starts at the unconstrained optimum
//! `x₀` and adds the most violated row until none is left, dropping rows
//! whose multiplier would turn negative. Every iterate is dual feasible, so an
//! empty step set proves primal infeasibility.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Degraded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Rows with `(c·x − d)/‖c‖` above `-feas_tol` count as satisfied.
    pub feas_tol: f64,
    /// Active-set changes before giving up with `Degraded`.
    pub max_iters: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-10,
            max_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// One multiplier per row for the `½‖x − x₀‖²` objective, so that
    /// `x − x₀ = Σ λᵢ cᵢ` at an optimum.
    pub multipliers: DVector<f64>,
    pub active: Vec<usize>,
    pub status: QpStatus,
    pub iterations: usize,
}

/// Projects `x0` onto `{x : C x ≥ d}`.
pub fn project(
    x0: &DVector<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    settings: &QpSettings,
) -> QpSolution {
    let m = x0.len();
    let rows = c.nrows();
    assert_eq!(c.ncols(), m, "constraint width must match x0");
    assert_eq!(d.len(), rows, "one bound per row");

    let norms: Vec<f64> = (0..rows).map(|i| c.row(i).norm()).collect();
    let mut x = x0.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut iterations = 0usize;

    let finish = |x: DVector<f64>, active: Vec<usize>, u: &[f64], status, iterations| {
        let mut multipliers = DVector::zeros(rows);
        for (k, &i) in active.iter().enumerate() {
            multipliers[i] = u[k];
        }
        QpSolution {
            x,
            multipliers,
            active,
            status,
            iterations,
        }
    };

    // A zero row is a constant constraint 0 ≥ d.
    for i in 0..rows {
        if norms[i] == 0.0 && d[i] > settings.feas_tol {
            return finish(x, active, &u, QpStatus::Infeasible, 0);
        }
    }

    loop {
        // most violated row by normalized distance
        let mut worst = -settings.feas_tol;
        let mut p = None;
        for i in 0..rows {
            if norms[i] == 0.0 || active.contains(&i) {
                continue;
            }
            let s = (c.row(i).dot(&x.transpose()) - d[i]) / norms[i];
            if s < worst {
                worst = s;
                p = Some(i);
            }
        }
        let Some(p) = p else {
            return finish(x, active, &u, QpStatus::Optimal, iterations);
        };
        let cp: DVector<f64> = c.row(p).transpose();
        let mut up = 0.0;

        loop {
            iterations += 1;
            if iterations > settings.max_iters {
                return finish(x, active, &u, QpStatus::Degraded, iterations);
            }
            let (z, r) = match step_direction(c, &active, &cp) {
                Some(v) => v,
                None => return finish(x, active, &u, QpStatus::Degraded, iterations),
            };

            // dual step: largest t keeping active multipliers nonnegative
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 0.0 {
                    let t = u[k] / rk;
                    if t < t1 {
                        t1 = t;
                        drop = Some(k);
                    }
                }
            }
            // primal step: distance along z to the plane of row p
            // z is the residual of projecting c_p onto the active normals;
            // treat it as zero when it is round-off relative to ‖c_p‖
            let t2 = if z.norm() > 1e-9 * norms[p] {
                (d[p] - cp.dot(&x)) / z.dot(&cp)
            } else {
                f64::INFINITY
            };

            let t = t1.min(t2);
            if !t.is_finite() {
                return finish(x, active, &u, QpStatus::Infeasible, iterations);
            }
            if t2.is_finite() {
                x += &z * t;
            }
            for (uk, rk) in u.iter_mut().zip(r.iter()) {
                *uk -= t * rk;
            }
            up += t;

            if t2 <= t1 {
                active.push(p);
                u.push(up);
                break;
            }
            // a multiplier hit zero: release that row and retry
            let k = drop.expect("finite dual step has a blocking row");
            active.remove(k);
            u.remove(k);
        }
    }
}

/// For active normals `N`, returns `z = (I − N(NᵀN)⁻¹Nᵀ) c` and
/// `r = (NᵀN)⁻¹Nᵀ c`. `None` if the active normals are numerically dependent.
fn step_direction(
    c: &DMatrix<f64>,
    active: &[usize],
    cp: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    if active.is_empty() {
        return Some((cp.clone(), DVector::zeros(0)));
    }
    let m = c.ncols();
    let k = active.len();
    let mut n = DMatrix::zeros(m, k);
    for (col, &i) in active.iter().enumerate() {
        n.set_column(col, &c.row(i).transpose());
    }
    let gram = n.transpose() * &n;
    let chol = gram.cholesky()?;
    let r = chol.solve(&(n.transpose() * cp));
    let z = cp - &n * &r;
    Some((z, r))
}

/// Largest normalized violation `max(0, (d − c·x)/‖c‖)` over rows with a
/// nonzero normal.
pub fn max_violation(x: &DVector<f64>, c: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    (0..c.nrows())
        .filter_map(|i| {
            let norm = c.row(i).norm();
            (norm > 0.0).then(|| (d[i] - c.row(i).dot(&x.transpose())) / norm)
        })
        .fold(0.0, f64::max)
}

/// Least-violation fallback for an infeasible row set: finds the smallest
/// uniform relaxation `t` (in normalized row distance) that makes the rows
/// feasible, then returns the minimum-norm point of the relaxed set.
pub fn least_violation(
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    settings: &QpSettings,
) -> (DVector<f64>, f64) {
    let m = c.ncols();
    let origin = DVector::zeros(m);
    let norms: Vec<f64> = (0..c.nrows()).map(|i| c.row(i).norm()).collect();
    let relaxed = |t: f64| {
        DVector::from_iterator(
            d.len(),
            // constant rows cannot be helped by moving x; drop them
            d.iter()
                .zip(&norms)
                .map(|(di, ni)| if *ni == 0.0 { di.min(0.0) } else { di - t * ni }),
        )
    };
    // the origin violates every row by at most `hi`
    let mut hi = max_violation(&origin, c, d).max(settings.feas_tol);
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if project(&origin, c, &relaxed(mid), settings).status == QpStatus::Optimal {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    let sol = project(&origin, c, &relaxed(hi), settings);
    (sol.x, hi)
}

/// Stationarity, sign and complementarity residuals of a claimed solution,
/// computed without reference to solver internals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub min_multiplier: f64,
    pub complementarity: f64,
    pub primal: f64,
}

pub fn kkt_residuals(
    x0: &DVector<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
) -> KktResiduals {
    let grad = x - x0 - c.transpose() * lambda;
    let slack = c * x - d;
    let complementarity = slack
        .iter()
        .zip(lambda.iter())
        .map(|(s, l)| (s * l).abs())
        .fold(0.0, f64::max);
    let primal = slack.iter().map(|s| (-s).max(0.0)).fold(0.0, f64::max);
    KktResiduals {
        stationarity: grad.amax(),
        min_multiplier: lambda.iter().copied().fold(0.0, f64::min),
        complementarity,
        primal,
    }
}

/// Builds a row matrix from slices; handy for tests and small problems.
pub fn rows_to_matrix(rows: &[Vec<f64>], m: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(rows.len(), m);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            c[(i, j)] = *v;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn no_rows_returns_nominal() {
        let x0 = dv(&[0.3, -1.0, 2.0]);
        let sol = project(
            &x0,
            &DMatrix::zeros(0, 3),
            &DVector::zeros(0),
            &QpSettings::default(),
        );
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_eq!(sol.x, x0);
    }

    #[test]
    fn halfspace_projection_closed_form() {
        let x0 = dv(&[1.0, 2.0, -0.5]);
        let a = dv(&[0.5, -1.0, 2.0]);
        let b = 3.0;
        let c = DMatrix::from_row_slice(1, 3, a.as_slice());
        let sol = project(&x0, &c, &dv(&[b]), &QpSettings::default());
        let expect = &x0 + &a * ((b - a.dot(&x0)) / a.norm_squared());
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((&sol.x - expect).amax() < 1e-12);
        let kkt = kkt_residuals(&x0, &c, &dv(&[b]), &sol.x, &sol.multipliers);
        assert!(kkt.stationarity < 1e-12 && kkt.min_multiplier >= 0.0);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, -1.0]);
        let sol = project(
            &dv(&[0.0, 0.0]),
            &c,
            &dv(&[1.0, 1.0]),
            &QpSettings::default(),
        );
        assert_eq!(sol.status, QpStatus::Infeasible);
        let (x, t) = least_violation(&c, &dv(&[1.0, 1.0]), &QpSettings::default());
        // both rows are violated equally at the compromise a·x = 0
        assert!((t - 0.5_f64.sqrt()).abs() < 1e-9, "t = {t}");
        assert!(x.norm() < 1e-9);
    }

    #[test]
    fn zero_row_with_positive_bound_is_infeasible() {
        let c = DMatrix::zeros(1, 2);
        let sol = project(&dv(&[0.0, 0.0]), &c, &dv(&[0.1]), &QpSettings::default());
        assert_eq!(sol.status, QpStatus::Infeasible);
        let ok = project(&dv(&[0.0, 0.0]), &c, &dv(&[-0.1]), &QpSettings::default());
        assert_eq!(ok.status, QpStatus::Optimal);
    }

    #[test]
    fn only_binding_row_is_active() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let d = dv(&[0.0, 2.0]);
        let x0 = dv(&[-1.0, -3.0]);
        let sol = project(&x0, &c, &d, &QpSettings::default());
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x - dv(&[2.0, 0.0])).amax() < 1e-12);
        assert_eq!(sol.active, vec![1]);
    }
}
