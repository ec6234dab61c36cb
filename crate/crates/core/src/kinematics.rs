//! Serial-chain kinematics: link poses, body-point positions and point
//! Jacobians.
//!
//! Link 0 is the fixed base. Joint `j` (0-based) connects link `j` to link
//! `j + 1`; its frame is `parent_pose * parent_offset`, and the joint motion
//! is applied after the offset.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Dyn, OMatrix, Translation3, Unit, UnitQuaternion, U3};

use crate::math::PI;
use crate::{Error, Pose, Result, Vec3};

pub type PointJacobian = OMatrix<f64, U3, Dyn>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub parent_offset: Pose,
    pub axis: Unit<Vec3>,
    pub kind: JointKind,
    pub q_min: f64,
    pub q_max: f64,
    pub v_max: f64,
}

impl JointSpec {
    pub fn revolute(parent_offset: Pose, axis: Vec3, q_min: f64, q_max: f64, v_max: f64) -> Self {
        Self {
            parent_offset,
            axis: Unit::new_normalize(axis),
            kind: JointKind::Revolute,
            q_min,
            q_max,
            v_max,
        }
    }

    fn motion(&self, q: f64) -> Pose {
        match self.kind {
            JointKind::Revolute => Pose::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&self.axis, q),
            ),
            JointKind::Prismatic => {
                let t = self.axis.into_inner() * q;
                Pose::translation(t.x, t.y, t.z)
            }
        }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.q_min + self.q_max)
    }
}

/// Collision primitive in a link frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Capsule {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
}

impl Primitive {
    pub fn radius(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius, .. } | Primitive::Capsule { radius, .. } => radius,
        }
    }

    /// Signed distance from a point in the link frame.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        match *self {
            Primitive::Sphere { center, radius } => (p - Vec3::from(center)).norm() - radius,
            Primitive::Capsule { a, b, radius } => {
                crate::shapes::point_segment_distance(p, &Vec3::from(a), &Vec3::from(b)) - radius
            }
        }
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Primitive::Capsule { a, b, radius } => {
                let len = (Vec3::from(b) - Vec3::from(a)).norm();
                2.0 * PI * radius * len + 4.0 * PI * radius * radius
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkGeometry {
    pub primitives: Vec<Primitive>,
}

impl LinkGeometry {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        Self { primitives }
    }

    pub fn capsule(a: [f64; 3], b: [f64; 3], radius: f64) -> Self {
        Self::new(vec![Primitive::Capsule { a, b, radius }])
    }

    pub fn sphere(center: [f64; 3], radius: f64) -> Self {
        Self::new(vec![Primitive::Sphere { center, radius }])
    }
}

/// A point fixed to a link, in that link's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BodyPoint {
    pub link: usize,
    pub local: Vec3,
}

impl BodyPoint {
    pub fn new(link: usize, local: Vec3) -> Self {
        Self { link, local }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub base_pose: Pose,
    pub joints: Vec<JointSpec>,
    /// One entry per joint plus the base.
    pub links: Vec<LinkGeometry>,
    /// Point tracked by end-effector controllers.
    pub end_effector: BodyPoint,
}

/// Link poses plus the world-frame joint origins and axes they imply.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub link_poses: Vec<Pose>,
    pub joint_origins: Vec<Vec3>,
    pub joint_axes: Vec<Vec3>,
}

impl RobotModel {
    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::param("joints", "need at least one joint"));
        }
        if self.links.len() != self.joints.len() + 1 {
            return Err(Error::param(
                "links",
                "need one link per joint plus the base",
            ));
        }
        for j in &self.joints {
            if !(j.q_min < j.q_max) {
                return Err(Error::param("q_min", "must be below q_max"));
            }
            if !(j.v_max > 0.0) {
                return Err(Error::param("v_max", "must be positive"));
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::param("axis", "must be unit length"));
            }
        }
        for l in &self.links {
            if l.primitives.iter().any(|p| !(p.radius() > 0.0)) {
                return Err(Error::param("radius", "primitive radii must be positive"));
            }
        }
        if self.end_effector.link >= self.links.len() {
            return Err(Error::param("end_effector", "link index out of range"));
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn chain_state(&self, q: &[f64]) -> Result<ChainState> {
        self.check_q(q)?;
        let n = self.dof();
        let mut link_poses = Vec::with_capacity(n + 1);
        let mut joint_origins = Vec::with_capacity(n);
        let mut joint_axes = Vec::with_capacity(n);
        let mut pose = self.base_pose;
        link_poses.push(pose);
        for (joint, &qj) in self.joints.iter().zip(q) {
            let frame = pose * joint.parent_offset;
            joint_origins.push(frame.translation.vector);
            joint_axes.push(frame.rotation * joint.axis.into_inner());
            pose = frame * joint.motion(qj);
            link_poses.push(pose);
        }
        Ok(ChainState {
            link_poses,
            joint_origins,
            joint_axes,
        })
    }

    /// World poses of links `0..=n`.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Vec<Pose>> {
        Ok(self.chain_state(q)?.link_poses)
    }

    pub fn body_point_position(&self, q: &[f64], p: &BodyPoint) -> Result<Vec3> {
        let poses = self.forward_kinematics(q)?;
        self.check_link(p.link)?;
        Ok(poses[p.link].transform_point(&p.local.into()).coords)
    }

    fn check_link(&self, link: usize) -> Result<()> {
        if link >= self.links.len() {
            return Err(Error::param("link", "index out of range"));
        }
        Ok(())
    }

    pub fn point_jacobian(&self, q: &[f64], p: &BodyPoint) -> Result<PointJacobian> {
        let state = self.chain_state(q)?;
        self.check_link(p.link)?;
        let y = state.link_poses[p.link]
            .transform_point(&p.local.into())
            .coords;
        Ok(self.jacobian_from_state(&state, p.link, &y))
    }

    /// Jacobian of world point `y` rigidly attached to `link`.
    pub fn jacobian_from_state(&self, state: &ChainState, link: usize, y: &Vec3) -> PointJacobian {
        let n = self.dof();
        let mut jac = PointJacobian::zeros(n);
        // joint j moves links j+1.., so it is an ancestor of `link` iff j < link
        for j in 0..link.min(n) {
            let axis = state.joint_axes[j];
            let col = match self.joints[j].kind {
                JointKind::Revolute => axis.cross(&(y - state.joint_origins[j])),
                JointKind::Prismatic => axis,
            };
            jac.set_column(j, &col);
        }
        jac
    }

    /// Sum of the joint offsets after the base plus the end-effector lever:
    /// an upper bound on how far the end effector gets from the first joint.
    pub fn reach(&self) -> f64 {
        let offsets: f64 = self
            .joints
            .iter()
            .map(|j| j.parent_offset.translation.vector.norm())
            .sum();
        offsets + self.end_effector.local.norm()
    }

    pub fn clamp_to_limits(&self, q: &mut [f64]) -> bool {
        let mut clamped = false;
        for (qj, j) in q.iter_mut().zip(&self.joints) {
            if *qj < j.q_min {
                *qj = j.q_min;
                clamped = true;
            } else if *qj > j.q_max {
                *qj = j.q_max;
                clamped = true;
            }
        }
        clamped
    }
}

fn dh_offset(a: f64, d: f64, alpha: f64) -> Pose {
    // modified DH: Trans_x(a) Rot_x(alpha) Trans_z(d)
    Pose::translation(a, 0.0, 0.0)
        * Pose::from_parts(
            Translation3::identity(),
            UnitQuaternion::from_axis_angle(&Vec3::x_axis(), alpha),
        )
        * Pose::translation(0.0, 0.0, d)
}

/// Seven revolute joints with the topology, link offsets and joint limits of
/// a Franka FR3. The base frame sits at shoulder height (0.333 m) so the
/// pedestal belongs to the fixed base link.
pub fn fr3_like() -> RobotModel {
    let half = PI / 2.0;
    let params: [(f64, f64, f64, f64, f64, f64); 7] = [
        // a, d, alpha, q_min, q_max, v_max
        (0.0, 0.0, 0.0, -2.7437, 2.7437, 2.62),
        (0.0, 0.0, -half, -1.7837, 1.7837, 2.62),
        (0.0, 0.316, half, -2.9007, 2.9007, 2.62),
        (0.0825, 0.0, half, -3.0421, -0.1518, 2.62),
        (-0.0825, 0.384, -half, -2.8065, 2.8065, 5.26),
        (0.0, 0.0, half, 0.5445, 4.5169, 4.18),
        (0.088, 0.0, half, -3.0159, 3.0159, 5.26),
    ];
    let joints = params
        .iter()
        .map(|&(a, d, alpha, lo, hi, v)| {
            JointSpec::revolute(dh_offset(a, d, alpha), Vec3::z(), lo, hi, v)
        })
        .collect();
    let links = vec![
        // pedestal, from the floor to just below the shoulder
        LinkGeometry::capsule([0.0, 0.0, -0.2], [0.0, 0.0, -0.14], 0.06),
        // shoulder housing
        LinkGeometry::sphere([0.0, 0.0, 0.0], 0.065),
        // upper arm, lower half (local -y points up at q = 0)
        LinkGeometry::capsule([0.0, 0.0, 0.0], [0.0, -0.2, 0.0], 0.055),
        // upper arm, upper half down from the elbow frame
        LinkGeometry::capsule([0.0, 0.0, -0.116], [0.0825, 0.0, 0.0], 0.055),
        // elbow
        LinkGeometry::capsule([0.0, 0.0, 0.0], [-0.0825, 0.12, 0.0], 0.05),
        // forearm, along the wrist axis
        LinkGeometry::capsule([0.0, 0.0, -0.25], [0.0, 0.0, 0.0], 0.045),
        // wrist
        LinkGeometry::capsule([0.0, 0.0, 0.0], [0.088, 0.0, 0.0], 0.045),
        // flange and hand
        LinkGeometry::capsule([0.0, 0.0, 0.0], [0.0, 0.0, 0.115], 0.04),
    ];
    RobotModel {
        name: "fr3_like".into(),
        base_pose: Pose::translation(0.0, 0.0, 0.333),
        joints,
        links,
        end_effector: BodyPoint::new(7, Vec3::new(0.0, 0.0, 0.115)),
    }
}

/// The usual "ready" posture of the 7-joint arm.
pub fn fr3_ready() -> Vec<f64> {
    vec![
        0.0,
        -PI / 4.0,
        0.0,
        -3.0 * PI / 4.0,
        0.0,
        PI / 2.0,
        PI / 4.0,
    ]
}

/// Two revolute joints about +z with link lengths `l1`, `l2`; the end
/// effector is the tip of link 2.
pub fn planar_two_link(l1: f64, l2: f64) -> RobotModel {
    let joints = vec![
        JointSpec::revolute(Pose::identity(), Vec3::z(), -PI, PI, 2.0),
        JointSpec::revolute(Pose::translation(l1, 0.0, 0.0), Vec3::z(), -PI, PI, 2.0),
    ];
    let r = 0.03;
    RobotModel {
        name: "planar2".into(),
        base_pose: Pose::identity(),
        joints,
        links: vec![
            LinkGeometry::sphere([0.0, 0.0, 0.0], 0.05),
            LinkGeometry::capsule([0.0, 0.0, 0.0], [l1, 0.0, 0.0], r),
            LinkGeometry::capsule([0.0, 0.0, 0.0], [l2, 0.0, 0.0], r),
        ],
        end_effector: BodyPoint::new(2, Vec3::new(l2, 0.0, 0.0)),
    }
}

/// Built-in models: the 7-joint arm and a 0.4 m + 0.3 m planar arm.
pub fn default_models() -> Vec<RobotModel> {
    vec![fr3_like(), planar_two_link(0.4, 0.3)]
}

pub fn model_by_name(name: &str) -> Option<RobotModel> {
    default_models().into_iter().find(|m| m.name == name)
}
