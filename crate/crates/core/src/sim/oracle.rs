//! Ground truth: analytic clearance of the dense surface cloud, independent
//! of the grid and the field.

use alloc::vec::Vec;

use crate::grid::GridGeometry;
use crate::kinematics::RobotModel;
use crate::sampling::DenseSurfaceCloud;
use crate::shapes::{wall_signed_distance, ObstacleShape};
use crate::{Pose, Result, Vec3};

/// `q + v·dt`, clamped to the joint limits. Returns whether a clamp engaged.
pub fn step_state(q: &[f64], v: &[f64], dt: f64, model: &RobotModel) -> (Vec<f64>, bool) {
    let mut next: Vec<f64> = q.iter().zip(v).map(|(qj, vj)| qj + vj * dt).collect();
    let clamped = model.clamp_to_limits(&mut next);
    (next, clamped)
}

/// Signed clearance of world point `p` from every obstacle and from the
/// workspace walls (the one-voxel shell, i.e. everything outside the inner
/// box).
pub fn point_clearance(p: &Vec3, obstacles: &[ObstacleShape], geometry: &GridGeometry) -> f64 {
    let (lo, hi) = geometry.inner_box();
    obstacles
        .iter()
        .map(|o| o.signed_distance(p))
        .fold(wall_signed_distance(&lo, &hi, p), f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearance {
    /// Minimum over cloud points of links `1..`.
    pub min: f64,
    /// Minimum over base-link cloud points (obstacles only; the pedestal
    /// stands on the floor wall by construction).
    pub base: f64,
}

/// Minimum analytic clearance of the dense cloud at `link_poses`.
///
/// The base link is reported separately: it cannot move, so its clearance
/// is outside what the filter can influence.
pub fn ground_truth_min_clearance(
    link_poses: &[Pose],
    cloud: &DenseSurfaceCloud,
    obstacles: &[ObstacleShape],
    geometry: &GridGeometry,
) -> Clearance {
    let mut min = f64::INFINITY;
    let mut base = f64::INFINITY;
    for (link, pts) in cloud.per_link.iter().enumerate() {
        let pose = &link_poses[link];
        for p in pts {
            let y = pose.transform_point(&(*p).into()).coords;
            if link == 0 {
                let d = obstacles
                    .iter()
                    .map(|o| o.signed_distance(&y))
                    .fold(f64::INFINITY, f64::min);
                base = base.min(d);
            } else {
                min = min.min(point_clearance(&y, obstacles, geometry));
            }
        }
    }
    Clearance { min, base }
}

/// Convenience wrapper running forward kinematics first.
pub fn clearance_at(
    model: &RobotModel,
    q: &[f64],
    cloud: &DenseSurfaceCloud,
    obstacles: &[ObstacleShape],
    geometry: &GridGeometry,
) -> Result<Clearance> {
    let poses = model.forward_kinematics(q)?;
    Ok(ground_truth_min_clearance(
        &poses, cloud, obstacles, geometry,
    ))
}
