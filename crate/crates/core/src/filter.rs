//! The multi-constraint safety filter: one barrier row per surface sample,
//! joint-position and velocity limits, and an optional soft CLF row, solved
//! as a projection of the nominal velocity.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3xX};

use crate::kinematics::RobotModel;
use crate::psf::FieldPair;
use crate::qp::{self, QpSettings, QpStatus};
use crate::sampling::SampleSet;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FilterConfig {
    /// Class-K gain on every sample row, 1/s.
    pub alpha: f64,
    /// Input-to-state safety margin gain.
    pub issf_eps0: f64,
    /// Gain on the joint-position limit rows, 1/s.
    pub alpha_joint: f64,
    /// Required exponential decrease rate of the CLF, 1/s.
    pub clf_gamma: f64,
    /// Weight on the squared CLF slack.
    pub slack_penalty: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            issf_eps0: 0.05,
            alpha_joint: 5.0,
            clf_gamma: 1.0,
            slack_penalty: 100.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("alpha_joint", self.alpha_joint),
            ("clf_gamma", self.clf_gamma),
            ("slack_penalty", self.slack_penalty),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        if !(self.issf_eps0 >= 0.0 && self.issf_eps0.is_finite()) {
            return Err(Error::param("issf_eps0", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RowTag {
    Sample,
    JointLimit,
    VelocityLimit,
    Clf,
}

/// `a·v ≥ b` for hard rows; for [`RowTag::Clf`] the row means `a·v − δ ≤ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub a: Vec<f64>,
    pub b: f64,
    pub tag: RowTag,
    /// Sample index (flattened over links), joint index, or 0 for the CLF.
    pub source_index: usize,
}

impl ConstraintRow {
    /// `a·v − b`; non-negative when a hard row holds.
    pub fn margin(&self, v: &[f64]) -> f64 {
        self.a.iter().zip(v).map(|(a, v)| a * v).sum::<f64>() - self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub v_safe: Vec<f64>,
    pub slack: f64,
    pub status: QpStatus,
    /// Indices into the hard rows; the soft row, if active, is `hard.len()`.
    pub active_set: Vec<usize>,
    /// Multipliers for the objective `‖v − v_nom‖² + p·δ²`: hard rows first,
    /// then the soft row, then `δ ≥ 0`.
    pub multipliers: Vec<f64>,
    /// Largest normalized hard-row violation of `v_safe` (0 when all hold).
    pub max_violation: f64,
    /// Wall-clock seconds, filled in by the caller's clock.
    pub solve_time: f64,
}

/// Per-sample rows plus the quantities the simulator records alongside.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BarrierRows {
    pub rows: Vec<ConstraintRow>,
    /// World positions of every sample, base link included.
    pub positions: Vec<Vec3>,
    /// `h` at every sample (NaN for base-link samples, which get no row).
    pub h: Vec<f64>,
    /// Flattened indices of samples that had to be clamped into the grid.
    pub clamped: Vec<usize>,
    /// Minimum of `h` over the rows.
    pub min_h: f64,
    /// Index of the sample attaining `min_h`.
    pub argmin: Option<usize>,
}

/// Barrier rows `gᵀJ v ≥ −α h − ∂h/∂t + ε₀ ‖gᵀJ‖²` for every non-base sample.
///
/// Base-link samples cannot move, so their rows would read `0 ≥ b`; they are
/// positioned but skipped. Samples outside the region where gradients are
/// defined (one voxel inside the bounds) are clamped into it and reported.
pub fn barrier_rows(
    model: &RobotModel,
    q: &[f64],
    samples: &SampleSet,
    fields: Option<&FieldPair>,
    config: &FilterConfig,
) -> Result<BarrierRows> {
    let fields = fields.ok_or(Error::MissingField)?;
    let field = &fields.current;
    let state = model.chain_state(q)?;
    let (lo, hi) = field.geometry.inner_box();
    let n = model.dof();

    let mut out = BarrierRows {
        min_h: f64::INFINITY,
        ..Default::default()
    };
    for (index, p) in samples.iter().enumerate() {
        if p.link >= state.link_poses.len() {
            return Err(Error::param("samples", "link index out of range"));
        }
        let y = state.link_poses[p.link]
            .transform_point(&p.local.into())
            .coords;
        out.positions.push(y);
        if p.link == 0 {
            out.h.push(f64::NAN);
            continue;
        }
        let yc = Vec3::new(
            y.x.clamp(lo.x, hi.x),
            y.y.clamp(lo.y, hi.y),
            y.z.clamp(lo.z, hi.z),
        );
        if yc != y {
            out.clamped.push(index);
        }
        let (h, g) = field.sample(&yc)?;
        let dhdt = fields.time_derivative(&yc)?;
        let jac = model.jacobian_from_state(&state, p.link, &y);
        let a: Vec<f64> = (0..n).map(|j| g.dot(&jac.column(j))).collect();
        let a_sq: f64 = a.iter().map(|x| x * x).sum();
        let b = -config.alpha * h - dhdt + config.issf_eps0 * a_sq;
        if h < out.min_h {
            out.min_h = h;
            out.argmin = Some(index);
        }
        out.h.push(h);
        out.rows.push(ConstraintRow {
            a,
            b,
            tag: RowTag::Sample,
            source_index: index,
        });
    }
    Ok(out)
}

/// Position-limit rows `v_j ≥ −α_J (q_j − q_min)`, `−v_j ≥ −α_J (q_max − q_j)`
/// and velocity rows `|v_j| ≤ v_max` for every joint.
pub fn joint_limit_rows(
    model: &RobotModel,
    q: &[f64],
    config: &FilterConfig,
) -> Vec<ConstraintRow> {
    let n = model.dof();
    let mut rows = Vec::with_capacity(4 * n);
    let unit = |j: usize, s: f64| {
        let mut a = vec![0.0; n];
        a[j] = s;
        a
    };
    for (j, (spec, &qj)) in model.joints.iter().zip(q).enumerate() {
        rows.push(ConstraintRow {
            a: unit(j, 1.0),
            b: -config.alpha_joint * (qj - spec.q_min),
            tag: RowTag::JointLimit,
            source_index: j,
        });
        rows.push(ConstraintRow {
            a: unit(j, -1.0),
            b: -config.alpha_joint * (spec.q_max - qj),
            tag: RowTag::JointLimit,
            source_index: j,
        });
    }
    for (j, spec) in model.joints.iter().enumerate() {
        for s in [1.0, -1.0] {
            rows.push(ConstraintRow {
                a: unit(j, s),
                b: -spec.v_max,
                tag: RowTag::VelocityLimit,
                source_index: j,
            });
        }
    }
    rows
}

/// Soft row `(x − x_d)ᵀ J v − δ ≤ −γ ½‖x − x_d‖²` for `V = ½‖x − x_d‖²`.
pub fn clf_row(
    x_ee: &Vec3,
    x_d: &Vec3,
    j_ee: &Matrix3xX<f64>,
    config: &FilterConfig,
) -> ConstraintRow {
    let e = x_ee - x_d;
    let a = (0..j_ee.ncols()).map(|j| e.dot(&j_ee.column(j))).collect();
    ConstraintRow {
        a,
        b: -config.clf_gamma * 0.5 * e.norm_squared(),
        tag: RowTag::Clf,
        source_index: 0,
    }
}

/// Minimizes `‖v − v_nom‖² + p·δ²` over the hard rows and the soft row.
///
/// With variables `w = (v, √p·δ)` the objective is a plain distance, so the
/// problem is a projection. If the hard rows are infeasible the result is the
/// minimum-norm velocity among those of least uniform violation, flagged
/// [`QpStatus::Infeasible`].
pub fn solve_filter_qp(
    v_nom: &[f64],
    hard: &[ConstraintRow],
    soft: Option<&ConstraintRow>,
    config: &FilterConfig,
) -> FilterResult {
    let n = v_nom.len();
    let m = if soft.is_some() { n + 1 } else { n };
    let rows = hard.len() + if soft.is_some() { 2 } else { 0 };
    let sqrt_p = libm::sqrt(config.slack_penalty);

    let mut c = DMatrix::zeros(rows, m);
    let mut d = DVector::zeros(rows);
    for (i, r) in hard.iter().enumerate() {
        for (j, &a) in r.a.iter().enumerate() {
            c[(i, j)] = a;
        }
        d[i] = r.b;
    }
    if let Some(s) = soft {
        let i = hard.len();
        // −a·v + δ ≥ −b, then δ ≥ 0
        for (j, &a) in s.a.iter().enumerate() {
            c[(i, j)] = -a;
        }
        c[(i, n)] = 1.0 / sqrt_p;
        d[i] = -s.b;
        c[(i + 1, n)] = 1.0;
    }
    let mut w0 = DVector::zeros(m);
    w0.rows_mut(0, n).copy_from_slice(v_nom);

    let settings = QpSettings::default();
    let sol = qp::project(&w0, &c, &d, &settings);

    let hard_c = c.view((0, 0), (hard.len(), n)).into_owned();
    let hard_d = d.rows(0, hard.len()).into_owned();
    match sol.status {
        QpStatus::Optimal | QpStatus::Degraded => {
            let v = sol.x.rows(0, n).into_owned();
            let slack = if soft.is_some() {
                sol.x[n] / sqrt_p
            } else {
                0.0
            };
            // internal multipliers are for ½‖w − w0‖²; scale to ‖v − v_nom‖² + pδ²
            let mut multipliers: Vec<f64> = sol.multipliers.iter().map(|l| 2.0 * l).collect();
            if soft.is_some() {
                // the soft row was scaled by 1/√p in the slack column only;
                // its v-part is unscaled, so the multiplier carries over as is
                let k = hard.len();
                multipliers[k + 1] *= sqrt_p;
            }
            FilterResult {
                max_violation: qp::max_violation(&v, &hard_c, &hard_d),
                v_safe: v.iter().copied().collect(),
                slack,
                status: sol.status,
                active_set: sol
                    .active
                    .iter()
                    .copied()
                    .filter(|&i| i <= hard.len())
                    .collect(),
                multipliers,
                solve_time: 0.0,
            }
        }
        QpStatus::Infeasible => {
            let (v, _) = qp::least_violation(&hard_c, &hard_d, &settings);
            let slack = soft.map_or(0.0, |s| (s.margin(v.as_slice())).max(0.0));
            FilterResult {
                max_violation: qp::max_violation(&v, &hard_c, &hard_d),
                v_safe: v.iter().copied().collect(),
                slack,
                status: QpStatus::Infeasible,
                active_set: Vec::new(),
                multipliers: vec![0.0; rows],
                solve_time: 0.0,
            }
        }
    }
}

/// KKT residuals of a filter result in the original variables, recomputed
/// from the rows alone: stationarity in `v` and `δ`, multiplier sign,
/// complementarity and primal feasibility (absolute, unnormalized).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterKkt {
    pub stationarity: f64,
    pub min_multiplier: f64,
    pub complementarity: f64,
    pub primal: f64,
}

impl FilterKkt {
    pub fn within(&self, tol: f64) -> bool {
        self.stationarity <= tol
            && self.min_multiplier >= -tol
            && self.complementarity <= tol
            && self.primal <= tol
    }
}

pub fn filter_kkt(
    v_nom: &[f64],
    hard: &[ConstraintRow],
    soft: Option<&ConstraintRow>,
    config: &FilterConfig,
    result: &FilterResult,
) -> FilterKkt {
    let n = v_nom.len();
    let v = &result.v_safe;
    let lam = &result.multipliers;
    // ∇(‖v − v_nom‖²) = Σ λ ∇(row): (v − v_nom) − ½ Σ λ a = 0
    let mut grad: Vec<f64> = (0..n).map(|j| v[j] - v_nom[j]).collect();
    let mut complementarity: f64 = 0.0;
    let mut primal: f64 = 0.0;
    let mut min_multiplier: f64 = 0.0;
    for (i, r) in hard.iter().enumerate() {
        for (g, a) in grad.iter_mut().zip(&r.a) {
            *g -= 0.5 * lam[i] * a;
        }
        let s = r.margin(v);
        complementarity = complementarity.max((s * lam[i]).abs());
        primal = primal.max(-s);
        min_multiplier = min_multiplier.min(lam[i]);
    }
    let mut stationarity = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    if let Some(s) = soft {
        let k = hard.len();
        let (ls, lz) = (lam[k], lam[k + 1]);
        // soft row in ≥ form: −a·v + δ ≥ −b
        for (g, a) in grad.iter_mut().zip(&s.a) {
            *g += 0.5 * ls * a;
        }
        stationarity = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        // ∂/∂δ: 2pδ − λ_s − λ_z = 0
        let gd = 2.0 * config.slack_penalty * result.slack - ls - lz;
        stationarity = stationarity.max(gd.abs());
        let soft_margin = -s.margin(v) + result.slack;
        complementarity = complementarity
            .max((soft_margin * ls).abs())
            .max((result.slack * lz).abs());
        primal = primal.max(-soft_margin).max(-result.slack);
        min_multiplier = min_multiplier.min(ls).min(lz);
    }
    FilterKkt {
        stationarity,
        min_multiplier,
        complementarity,
        primal,
    }
}
