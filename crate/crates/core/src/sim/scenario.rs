use alloc::string::String;
use alloc::vec::Vec;

use crate::filter::FilterConfig;
use crate::grid::{GridDims, WorldBounds};
use crate::kinematics::RobotModel;
use crate::math::round;
use crate::psf::SolverSettings;
use crate::shapes::ObstacleShape;
use crate::sim::trajectory::Trajectory;
use crate::{Error, Pose, Result};

/// An obstacle and the source of its motion. `shape.pose` is the pose at
/// `t = 0` (and the fixed orientation for moving obstacles).
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSpec {
    pub shape: ObstacleShape,
    pub trajectory: Trajectory,
}

impl ObstacleSpec {
    pub fn fixed(shape: ObstacleShape) -> Self {
        Self {
            shape,
            trajectory: Trajectory::Static,
        }
    }

    pub fn at(&self, t: f64) -> ObstacleShape {
        ObstacleShape {
            kind: self.shape.kind,
            pose: self.trajectory.pose_at(&self.shape.pose, t),
        }
    }
}

/// Nominal velocity source. Cartesian modes track the end effector with
/// damped least squares.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum NominalSpec {
    /// `v = gain (q_target − q)`; `q_target` defaults to `q0`.
    HoldQ {
        #[cfg_attr(feature = "serde", serde(default))]
        q_target: Option<Vec<f64>>,
        #[cfg_attr(feature = "serde", serde(default = "default_gain"))]
        gain: f64,
    },
    /// Visit waypoints in order, advancing within `tolerance` meters.
    EeWaypoints {
        waypoints: Vec<[f64; 3]>,
        #[cfg_attr(feature = "serde", serde(default = "default_gain"))]
        gain: f64,
        #[cfg_attr(feature = "serde", serde(default = "default_speed"))]
        speed: f64,
        #[cfg_attr(feature = "serde", serde(default = "default_tolerance"))]
        tolerance: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        cycle: bool,
    },
    /// Drive the end effector at the center of obstacle `obstacle`.
    AdversarialTowardObstacle {
        obstacle: usize,
        #[cfg_attr(feature = "serde", serde(default = "default_gain"))]
        gain: f64,
        #[cfg_attr(feature = "serde", serde(default = "default_speed"))]
        speed: f64,
    },
    /// Track targets set by live commands; hold until the first one.
    External {
        #[cfg_attr(feature = "serde", serde(default = "default_gain"))]
        gain: f64,
        #[cfg_attr(feature = "serde", serde(default = "default_speed"))]
        speed: f64,
    },
}

#[cfg(feature = "serde")]
fn default_gain() -> f64 {
    2.0
}

#[cfg(feature = "serde")]
fn default_speed() -> f64 {
    0.5
}

#[cfg(feature = "serde")]
fn default_tolerance() -> f64 {
    0.03
}

impl NominalSpec {
    pub fn validate(&self, dof: usize, obstacles: usize) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be positive"))
            }
        };
        match self {
            NominalSpec::HoldQ { q_target, gain } => {
                positive("gain", *gain)?;
                if let Some(q) = q_target {
                    if q.len() != dof {
                        return Err(Error::DimensionMismatch {
                            expected: dof,
                            got: q.len(),
                        });
                    }
                }
            }
            NominalSpec::EeWaypoints {
                waypoints,
                gain,
                speed,
                tolerance,
                ..
            } => {
                if waypoints.is_empty() {
                    return Err(Error::param("waypoints", "need at least one waypoint"));
                }
                positive("gain", *gain)?;
                positive("speed", *speed)?;
                positive("tolerance", *tolerance)?;
            }
            NominalSpec::AdversarialTowardObstacle {
                obstacle,
                gain,
                speed,
            } => {
                if *obstacle >= obstacles {
                    return Err(Error::param("obstacle", "index out of range"));
                }
                positive("gain", *gain)?;
                positive("speed", *speed)?;
            }
            NominalSpec::External { gain, speed } => {
                positive("gain", *gain)?;
                positive("speed", *speed)?;
            }
        }
        Ok(())
    }

    /// Whether this mode has a Cartesian goal for the CLF row.
    pub fn tracks_target(&self) -> bool {
        matches!(
            self,
            NominalSpec::EeWaypoints { .. } | NominalSpec::External { .. }
        )
    }
}

/// Everything needed to run an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub robot: RobotModel,
    pub q0: Vec<f64>,
    pub obstacles: Vec<ObstacleSpec>,
    pub bounds: WorldBounds,
    pub dims: GridDims,
    /// Sampling resolution ε, meters.
    pub epsilon: f64,
    /// Dense-cloud resolution δ, meters.
    pub delta: f64,
    /// Control ticks per second.
    pub control_rate: f64,
    /// Episode length, seconds.
    pub duration: f64,
    pub nominal: NominalSpec,
    pub config: FilterConfig,
    pub solver: SolverSettings,
    pub seed: u64,
    /// Add the soft CLF row when the nominal mode has a Cartesian target.
    pub use_clf: bool,
}

impl Scenario {
    /// A scenario with the default grid, gains and resolution.
    pub fn new(name: &str, robot: RobotModel, q0: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            robot,
            q0,
            obstacles: Vec::new(),
            bounds: WorldBounds::default(),
            dims: GridDims::default(),
            epsilon: 0.1,
            delta: 0.01,
            control_rate: 50.0,
            duration: 10.0,
            nominal: NominalSpec::HoldQ {
                q_target: None,
                gain: 2.0,
            },
            config: FilterConfig::default(),
            solver: SolverSettings::default(),
            seed: 0,
            use_clf: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        let n = self.robot.dof();
        if self.q0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.q0.len(),
            });
        }
        for (q, j) in self.q0.iter().zip(&self.robot.joints) {
            if !(*q >= j.q_min && *q <= j.q_max) {
                return Err(Error::param("q0", "must lie within the joint limits"));
            }
        }
        if !(10.0..=200.0).contains(&self.control_rate) {
            return Err(Error::param("control_rate", "must be within [10, 200] Hz"));
        }
        if !(self.delta > 0.0 && self.epsilon > self.delta) {
            return Err(Error::param("epsilon", "need epsilon > delta > 0"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::param("duration", "must be positive"));
        }
        for o in &self.obstacles {
            o.trajectory.validate()?;
        }
        self.nominal.validate(n, self.obstacles.len())?;
        self.config.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.control_rate
    }

    pub fn ticks(&self) -> usize {
        round(self.duration * self.control_rate) as usize
    }

    /// Obstacle shapes at time `t`, with live overrides where present.
    pub fn obstacles_at(&self, t: f64, overrides: &[Option<Pose>]) -> Vec<ObstacleShape> {
        self.obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| match overrides.get(i).copied().flatten() {
                Some(pose) => ObstacleShape {
                    kind: o.shape.kind,
                    pose,
                },
                None => o.at(t),
            })
            .collect()
    }

    /// Whether any obstacle can move during the episode.
    pub fn is_dynamic(&self) -> bool {
        self.obstacles.iter().any(|o| o.trajectory.is_timed())
    }
}
