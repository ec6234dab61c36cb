//! Obstacle motion sources.

use alloc::vec::Vec;

use crate::math::{cos, sin, PI};
use crate::{Error, Pose, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Keyframe {
    pub t: f64,
    pub position: [f64; 3],
}

/// Parametric center paths. All are periodic and smooth.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "motion", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum ScriptedMotion {
    /// Back and forth between `from` and `to` with cosine easing.
    Line {
        from: [f64; 3],
        to: [f64; 3],
        period: f64,
    },
    /// Circle in the plane normal to world z.
    Circle {
        center: [f64; 3],
        radius: f64,
        period: f64,
        phase: f64,
    },
    /// `center + amplitude ∘ sin(2π f t + phase)` per axis, `f` in Hz.
    Lissajous {
        center: [f64; 3],
        amplitude: [f64; 3],
        frequency: [f64; 3],
        phase: [f64; 3],
    },
}

impl ScriptedMotion {
    pub fn position(&self, t: f64) -> Vec3 {
        match *self {
            ScriptedMotion::Line { from, to, period } => {
                let s = 0.5 * (1.0 - cos(2.0 * PI * t / period));
                Vec3::from(from) + (Vec3::from(to) - Vec3::from(from)) * s
            }
            ScriptedMotion::Circle {
                center,
                radius,
                period,
                phase,
            } => {
                let a = 2.0 * PI * t / period + phase;
                Vec3::from(center) + Vec3::new(cos(a), sin(a), 0.0) * radius
            }
            ScriptedMotion::Lissajous {
                center,
                amplitude,
                frequency,
                phase,
            } => Vec3::from_fn(|i, _| {
                center[i] + amplitude[i] * sin(2.0 * PI * frequency[i] * t + phase[i])
            }),
        }
    }

    /// Upper bound on the speed of [`Self::position`].
    pub fn max_speed(&self) -> f64 {
        match *self {
            ScriptedMotion::Line { from, to, period } => {
                PI * (Vec3::from(to) - Vec3::from(from)).norm() / period
            }
            ScriptedMotion::Circle { radius, period, .. } => 2.0 * PI * radius / period,
            ScriptedMotion::Lissajous {
                amplitude,
                frequency,
                ..
            } => Vec3::from_fn(|i, _| 2.0 * PI * amplitude[i] * frequency[i]).norm(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScriptedMotion::Line { period, .. } => period > 0.0,
            ScriptedMotion::Circle { radius, period, .. } => radius > 0.0 && period > 0.0,
            ScriptedMotion::Lissajous { frequency, .. } => frequency.iter().all(|f| *f >= 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("motion", "periods and radii must be positive"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum Trajectory {
    #[default]
    Static,
    /// Piecewise-linear center positions, held constant outside the keys.
    Keyframed {
        keys: Vec<Keyframe>,
    },
    Scripted {
        path: ScriptedMotion,
    },
    /// Driven by live commands; holds its last commanded pose.
    External,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        match self {
            Trajectory::Keyframed { keys } => {
                if keys.is_empty() {
                    return Err(Error::param("keys", "need at least one keyframe"));
                }
                if keys.windows(2).any(|w| !(w[1].t > w[0].t)) {
                    return Err(Error::param(
                        "keys",
                        "keyframe times must be strictly increasing",
                    ));
                }
                Ok(())
            }
            Trajectory::Scripted { path } => path.validate(),
            _ => Ok(()),
        }
    }

    /// Whether the pose can change without a live command.
    pub fn is_timed(&self) -> bool {
        matches!(
            self,
            Trajectory::Keyframed { .. } | Trajectory::Scripted { .. }
        )
    }

    /// Pose at time `t`. Only the translation of `base` is replaced; its
    /// orientation is kept. Static and external trajectories return `base`.
    pub fn pose_at(&self, base: &Pose, t: f64) -> Pose {
        let center = match self {
            Trajectory::Static | Trajectory::External => return *base,
            Trajectory::Scripted { path } => path.position(t),
            Trajectory::Keyframed { keys } => keyframe_position(keys, t),
        };
        let mut pose = *base;
        pose.translation.vector = center;
        pose
    }

    /// Upper bound on the center speed; 0 for untimed trajectories.
    pub fn max_speed(&self) -> f64 {
        match self {
            Trajectory::Static | Trajectory::External => 0.0,
            Trajectory::Scripted { path } => path.max_speed(),
            Trajectory::Keyframed { keys } => keys
                .windows(2)
                .map(|w| {
                    (Vec3::from(w[1].position) - Vec3::from(w[0].position)).norm()
                        / (w[1].t - w[0].t)
                })
                .fold(0.0, f64::max),
        }
    }
}

fn keyframe_position(keys: &[Keyframe], t: f64) -> Vec3 {
    let first = &keys[0];
    if t <= first.t {
        return first.position.into();
    }
    for w in keys.windows(2) {
        if t <= w[1].t {
            let s = (t - w[0].t) / (w[1].t - w[0].t);
            return Vec3::from(w[0].position) * (1.0 - s) + Vec3::from(w[1].position) * s;
        }
    }
    keys[keys.len() - 1].position.into()
}
