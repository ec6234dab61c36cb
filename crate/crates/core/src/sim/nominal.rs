//! Nominal controllers: what the operator or task would command without the
//! safety filter.

use alloc::vec::Vec;

use nalgebra::Matrix3;

use crate::kinematics::{PointJacobian, RobotModel};
use crate::sim::scenario::NominalSpec;
use crate::Vec3;

/// Damping of the least-squares inverse, meters.
const DLS_DAMPING: f64 = 0.05;

/// Mutable controller state carried across ticks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NominalState {
    pub waypoint: usize,
    /// Live target for the external mode.
    pub target: Option<Vec3>,
}

/// Joint velocity realizing Cartesian velocity `xdot` of a point with
/// Jacobian `jac`: `Jᵀ (J Jᵀ + λ² I)⁻¹ ẋ`.
pub fn damped_least_squares(jac: &PointJacobian, xdot: &Vec3) -> Vec<f64> {
    let jjt: Matrix3<f64> =
        jac * jac.transpose() + Matrix3::identity() * (DLS_DAMPING * DLS_DAMPING);
    let y = jjt
        .cholesky()
        .map(|c| c.solve(xdot))
        .unwrap_or_else(Vec3::zeros);
    (jac.transpose() * y).iter().copied().collect()
}

/// Uniformly scales `v` so every joint respects its velocity limit.
pub fn limit_velocity(model: &RobotModel, v: &mut [f64]) {
    let ratio = v
        .iter()
        .zip(&model.joints)
        .map(|(vj, j)| vj.abs() / j.v_max)
        .fold(0.0, f64::max);
    if ratio > 1.0 {
        v.iter_mut().for_each(|x| *x /= ratio);
    }
}

fn track(
    model: &RobotModel,
    ee: &Vec3,
    jac: &PointJacobian,
    target: &Vec3,
    gain: f64,
    speed: f64,
) -> Vec<f64> {
    let mut xdot = (target - ee) * gain;
    let norm = xdot.norm();
    if norm > speed {
        xdot *= speed / norm;
    }
    let mut v = damped_least_squares(jac, &xdot);
    limit_velocity(model, &mut v);
    v
}

/// Nominal command and the Cartesian goal it pursues, if any.
#[allow(clippy::too_many_arguments)]
pub fn nominal_velocity(
    spec: &NominalSpec,
    model: &RobotModel,
    q0: &[f64],
    q: &[f64],
    ee: &Vec3,
    jac: &PointJacobian,
    obstacle_centers: &[Vec3],
    state: &mut NominalState,
) -> (Vec<f64>, Option<Vec3>) {
    match spec {
        NominalSpec::HoldQ { q_target, gain } => {
            let goal = q_target.as_deref().unwrap_or(q0);
            let mut v: Vec<f64> = goal.iter().zip(q).map(|(g, qj)| gain * (g - qj)).collect();
            limit_velocity(model, &mut v);
            (v, None)
        }
        NominalSpec::EeWaypoints {
            waypoints,
            gain,
            speed,
            tolerance,
            cycle,
        } => {
            let mut goal = Vec3::from(waypoints[state.waypoint.min(waypoints.len() - 1)]);
            if (goal - ee).norm() < *tolerance
                && state.waypoint + 1 < waypoints.len() + usize::from(*cycle)
            {
                state.waypoint = (state.waypoint + 1) % waypoints.len();
                goal = Vec3::from(waypoints[state.waypoint]);
            }
            (track(model, ee, jac, &goal, *gain, *speed), Some(goal))
        }
        NominalSpec::AdversarialTowardObstacle {
            obstacle,
            gain,
            speed,
        } => {
            let goal = obstacle_centers[*obstacle];
            (track(model, ee, jac, &goal, *gain, *speed), None)
        }
        NominalSpec::External { gain, speed } => match state.target {
            Some(goal) => (track(model, ee, jac, &goal, *gain, *speed), Some(goal)),
            None => (alloc::vec![0.0; q.len()], None),
        },
    }
}
