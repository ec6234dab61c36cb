//! The JSON scenario format.
//!
//! Lengths are meters, times seconds, angles radians, rates hertz. The
//! `units` section must say so explicitly; it exists so that a file written
//! for other units fails loudly instead of running at the wrong scale.

use std::path::Path;

use psfguard_core::filter::FilterConfig;
use psfguard_core::grid::{GridDims, WorldBounds};
use psfguard_core::kinematics::{fr3_ready, model_by_name, RobotModel};
use psfguard_core::nalgebra::{Quaternion, Translation3, UnitQuaternion};
use psfguard_core::psf::SolverSettings;
use psfguard_core::shapes::{ObstacleShape, ShapeKind};
use psfguard_core::sim::{NominalSpec, ObstacleSpec, Scenario, Trajectory};
use psfguard_core::Pose;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub units: Units,
    pub robot: RobotSection,
    #[serde(default)]
    pub obstacles: Vec<ObstacleEntry>,
    pub grid: GridSection,
    pub sampling: SamplingSection,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    pub nominal: NominalSpec,
    pub episode: EpisodeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub length: String,
    pub time: String,
    pub angle: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "m".into(),
            time: "s".into(),
            angle: "rad".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSection {
    /// A built-in model name.
    pub model: String,
    /// Initial joint positions; the model's ready posture when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub shape: ShapeKind,
    /// Pose at `t = 0`.
    pub position: [f64; 3],
    /// Unit quaternion `[w, x, y, z]`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<[f64; 4]>,
    #[serde(default)]
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsEntry {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub bounds: BoundsEntry,
    /// Voxels along x, y, z.
    pub dims: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSection {
    pub control_rate: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub use_clf: bool,
}

fn yes() -> bool {
    true
}

/// A load failure, anchored to the offending line when it can be found.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", anchor(*line, *column))]
pub struct FileError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    /// Dotted path of the offending key, when known.
    pub key: Option<String>,
    pub message: String,
}

fn anchor(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("line {l}, column {c}: "),
        (Some(l), None) => format!("line {l}: "),
        _ => String::new(),
    }
}

impl FileError {
    fn at_key(text: &str, key: &str, message: String) -> Self {
        let (line, column) =
            locate_key(text, key).map_or((None, None), |(l, c)| (Some(l), Some(c)));
        Self {
            line,
            column,
            key: Some(key.to_string()),
            message,
        }
    }
}

/// 1-based line and column of `"last"` for a dotted key `a.b.last`,
/// searching after each parent key in turn.
fn locate_key(text: &str, dotted: &str) -> Option<(usize, usize)> {
    let mut from = 0;
    let mut found = None;
    for part in dotted.split('.') {
        let needle = format!("\"{part}\"");
        let at = from + text[from..].find(&needle)?;
        found = Some(at);
        from = at + needle.len();
    }
    let at = found?;
    let line = text[..at].matches('\n').count() + 1;
    let column = at - text[..at].rfind('\n').map_or(0, |i| i + 1) + 1;
    Some((line, column))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, FileError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| FileError {
            line: Some(e.line()),
            column: Some(e.column()),
            key: None,
            message: e
                .to_string()
                .split(" at line ")
                .next()
                .unwrap_or_default()
                .to_string(),
        })?;
        if file.version != FORMAT_VERSION {
            return Err(FileError::at_key(
                text,
                "version",
                format!(
                    "unsupported version {} (expected {FORMAT_VERSION})",
                    file.version
                ),
            ));
        }
        let expect = Units::default();
        for (key, got, want) in [
            ("length", &file.units.length, &expect.length),
            ("time", &file.units.time, &expect.time),
            ("angle", &file.units.angle, &expect.angle),
        ] {
            if got != want {
                return Err(FileError::at_key(
                    text,
                    &format!("units.{key}"),
                    format!("units.{key} must be \"{want}\", got \"{got}\""),
                ));
            }
        }
        Ok(file)
    }

    pub fn to_scenario(&self) -> Result<Scenario, FileError> {
        let plain = |key: &str, message: String| FileError {
            line: None,
            column: None,
            key: Some(key.to_string()),
            message,
        };
        let robot = model_by_name(&self.robot.model).ok_or_else(|| {
            plain(
                "robot.model",
                format!("unknown robot model \"{}\"", self.robot.model),
            )
        })?;
        let q0 = self
            .robot
            .q0
            .clone()
            .unwrap_or_else(|| default_posture(&robot));
        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for (i, o) in self.obstacles.iter().enumerate() {
            let pose = pose_from_parts(o.position, o.orientation)
                .map_err(|m| plain(&format!("obstacles[{i}].orientation"), m))?;
            let shape = ObstacleShape::new(o.shape, pose)
                .map_err(|e| plain(&format!("obstacles[{i}].shape"), e.to_string()))?;
            obstacles.push(ObstacleSpec {
                shape,
                trajectory: o.trajectory.clone(),
            });
        }
        let bounds = WorldBounds::new(self.grid.bounds.min, self.grid.bounds.max)
            .map_err(|e| plain("grid.bounds", e.to_string()))?;
        let [nx, ny, nz] = self.grid.dims;
        let dims = GridDims::new(nx, ny, nz).map_err(|e| plain("grid.dims", e.to_string()))?;
        let mut s = Scenario::new(&self.name, robot, q0);
        s.obstacles = obstacles;
        s.bounds = bounds;
        s.dims = dims;
        s.epsilon = self.sampling.epsilon;
        s.delta = self.sampling.delta;
        s.control_rate = self.episode.control_rate;
        s.duration = self.episode.duration;
        s.seed = self.episode.seed;
        s.use_clf = self.episode.use_clf;
        s.nominal = self.nominal.clone();
        s.config = self.filter;
        s.solver = self.solver;
        s.validate().map_err(|e| plain("", e.to_string()))?;
        Ok(s)
    }

    /// The file describing `scenario`. Only built-in robot models can be
    /// written.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, FileError> {
        let plain = |key: &str, message: String| FileError {
            line: None,
            column: None,
            key: Some(key.to_string()),
            message,
        };
        match model_by_name(&scenario.robot.name) {
            Some(m) if m == scenario.robot => {}
            _ => {
                return Err(plain(
                    "robot.model",
                    format!("robot \"{}\" is not a built-in model", scenario.robot.name),
                ))
            }
        }
        let obstacles = scenario
            .obstacles
            .iter()
            .map(|o| {
                let orientation = (o.shape.pose.rotation != UnitQuaternion::identity())
                    .then(|| orientation_of(&o.shape.pose));
                ObstacleEntry {
                    shape: o.shape.kind,
                    position: o.shape.pose.translation.vector.into(),
                    orientation,
                    trajectory: o.trajectory.clone(),
                }
            })
            .collect();
        Ok(Self {
            version: FORMAT_VERSION,
            name: scenario.name.clone(),
            units: Units::default(),
            robot: RobotSection {
                model: scenario.robot.name.clone(),
                q0: Some(scenario.q0.clone()),
            },
            obstacles,
            grid: GridSection {
                bounds: BoundsEntry {
                    min: scenario.bounds.min,
                    max: scenario.bounds.max,
                },
                dims: scenario.dims.as_array(),
            },
            sampling: SamplingSection {
                epsilon: scenario.epsilon,
                delta: scenario.delta,
            },
            filter: scenario.config,
            solver: scenario.solver,
            nominal: scenario.nominal.clone(),
            episode: EpisodeSection {
                control_rate: scenario.control_rate,
                duration: scenario.duration,
                seed: scenario.seed,
                use_clf: scenario.use_clf,
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }
}

fn default_posture(robot: &RobotModel) -> Vec<f64> {
    if robot.name == "fr3_like" {
        fr3_ready()
    } else {
        robot.joints.iter().map(|j| j.mid()).collect()
    }
}

/// A pose from a position and an optional `[w, x, y, z]` quaternion.
pub fn pose_from_parts(position: [f64; 3], orientation: Option<[f64; 4]>) -> Result<Pose, String> {
    let rotation = match orientation {
        Some(q) => unit_quaternion(q)?,
        None => UnitQuaternion::identity(),
    };
    Ok(Pose::from_parts(Translation3::from(position), rotation))
}

/// `[w, x, y, z]` of a pose's rotation.
pub fn orientation_of(pose: &Pose) -> [f64; 4] {
    let r = pose.rotation;
    [r.w, r.i, r.j, r.k]
}

/// Near-unit quaternions are taken as given so that a written file reads
/// back bit-identically; others are rejected rather than silently rescaled.
fn unit_quaternion([w, x, y, z]: [f64; 4]) -> Result<UnitQuaternion<f64>, String> {
    let q = Quaternion::new(w, x, y, z);
    let n = q.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
        return Err(format!("quaternion norm {n} is not 1"));
    }
    Ok(UnitQuaternion::new_unchecked(q))
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario, FileError> {
    let file = ScenarioFile::parse(text)?;
    file.to_scenario().map_err(|mut e| {
        if e.line.is_none() {
            // validation errors name a field; point at its first mention
            let key = match (&e.key, e.message.split('`').nth(1)) {
                (Some(k), _) if !k.is_empty() => Some(k.clone()),
                (_, Some(name)) => Some(name.to_string()),
                _ => None,
            };
            if let Some((l, c)) = key
                .as_deref()
                .and_then(|k| locate_key(text, k.split('[').next().unwrap_or(k)))
            {
                e.line = Some(l);
                e.column = Some(c);
            }
        }
        e
    })
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: FileError,
    },
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: display.clone(),
        source,
    })?;
    parse_scenario(&text).map_err(|source| LoadError::Invalid {
        path: display,
        source,
    })
}
