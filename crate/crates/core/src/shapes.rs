//! Analytic obstacle primitives and their exact signed distances.

use crate::math::sqrt;
use crate::{Error, Pose, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum ShapeKind {
    Sphere {
        radius: f64,
    },
    /// Box given by half extents along the local axes.
    Box {
        half_extents: [f64; 3],
    },
    /// Capsule whose segment runs along the local z axis from
    /// `-half_length` to `+half_length`.
    Capsule {
        radius: f64,
        half_length: f64,
    },
}

/// An obstacle: a primitive placed in the world by a rigid pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleShape {
    pub kind: ShapeKind,
    pub pose: Pose,
}

impl ObstacleShape {
    pub fn new(kind: ShapeKind, pose: Pose) -> Result<Self> {
        let ok = match kind {
            ShapeKind::Sphere { radius } => radius > 0.0,
            ShapeKind::Box { half_extents } => half_extents.iter().all(|&e| e > 0.0),
            ShapeKind::Capsule {
                radius,
                half_length,
            } => radius > 0.0 && half_length > 0.0,
        };
        if !ok {
            return Err(Error::param(
                "shape",
                "size parameters must be strictly positive",
            ));
        }
        Ok(Self { kind, pose })
    }

    pub fn sphere(center: Vec3, radius: f64) -> Result<Self> {
        Self::new(
            ShapeKind::Sphere { radius },
            Pose::translation(center.x, center.y, center.z),
        )
    }

    pub fn aabb_box(center: Vec3, half_extents: [f64; 3]) -> Result<Self> {
        Self::new(
            ShapeKind::Box { half_extents },
            Pose::translation(center.x, center.y, center.z),
        )
    }

    pub fn capsule(a: Vec3, b: Vec3, radius: f64) -> Result<Self> {
        let axis = b - a;
        let len = axis.norm();
        if len <= 0.0 {
            return Err(Error::param("capsule", "endpoints must differ"));
        }
        let mid = (a + b) * 0.5;
        let rot =
            nalgebra::UnitQuaternion::rotation_between(&Vec3::z(), &axis).unwrap_or_else(|| {
                // antiparallel to z
                nalgebra::UnitQuaternion::from_axis_angle(&Vec3::x_axis(), crate::math::PI)
            });
        Self::new(
            ShapeKind::Capsule {
                radius,
                half_length: len * 0.5,
            },
            Pose::from_parts(nalgebra::Translation3::new(mid.x, mid.y, mid.z), rot),
        )
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation.vector
    }

    /// Exact signed distance: negative inside, positive outside.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let local = self.pose.inverse_transform_point(&(*p).into()).coords;
        match self.kind {
            ShapeKind::Sphere { radius } => local.norm() - radius,
            ShapeKind::Box { half_extents } => box_sdf(&local, &half_extents),
            ShapeKind::Capsule {
                radius,
                half_length,
            } => {
                let z = local.z.clamp(-half_length, half_length);
                let d = local - Vec3::new(0.0, 0.0, z);
                d.norm() - radius
            }
        }
    }

    /// World axis-aligned bounding box `(min, max)`.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let c = self.center();
        let ext = match self.kind {
            ShapeKind::Sphere { radius } => Vec3::repeat(radius),
            ShapeKind::Box { half_extents } => {
                let r = self.pose.rotation.to_rotation_matrix();
                let he = Vec3::from(half_extents);
                r.matrix().abs() * he
            }
            ShapeKind::Capsule {
                radius,
                half_length,
            } => {
                let axis = self.pose.rotation * Vec3::z();
                axis.abs() * half_length + Vec3::repeat(radius)
            }
        };
        (c - ext, c + ext)
    }

    /// Segment endpoints of a capsule in world frame.
    pub fn capsule_segment(&self) -> Option<(Vec3, Vec3, f64)> {
        match self.kind {
            ShapeKind::Capsule {
                radius,
                half_length,
            } => {
                let axis = self.pose.rotation * Vec3::z();
                let c = self.center();
                Some((c - axis * half_length, c + axis * half_length, radius))
            }
            _ => None,
        }
    }
}

fn box_sdf(p: &Vec3, he: &[f64; 3]) -> f64 {
    let q = Vec3::new(p.x.abs() - he[0], p.y.abs() - he[1], p.z.abs() - he[2]);
    let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

/// Signed distance to the workspace walls, i.e. to the complement of the open
/// box `(lo, hi)`. Positive inside the box.
pub fn wall_signed_distance(lo: &Vec3, hi: &Vec3, p: &Vec3) -> f64 {
    let center = (lo + hi) * 0.5;
    let he = (hi - lo) * 0.5;
    -box_sdf(&(p - center), &[he.x, he.y, he.z])
}

/// Closest distance between point `p` and segment `[a, b]`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let denom = ab.norm_squared();
    let t = if denom > 0.0 {
        ((p - a).dot(&ab) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    sqrt((p - (a + ab * t)).norm_squared())
}
