//! The fixed closed-loop suite: seeded static clutter with an adversarial
//! nominal controller, and scripted moving spheres.
//!
//! Every scenario runs the 7-joint arm for 30 s at 50 Hz on a 64³ grid with
//! ε = 0.1 m and δ = 0.01 m. Placement is rejection-sampled so that each
//! episode starts with at least [`START_CLEARANCE`] between the arm and every
//! obstacle, and nothing comes near the pedestal or the shoulder, where no
//! joint motion can help.

use psfguard_core::grid::GridDims;
use psfguard_core::kinematics::{fr3_like, fr3_ready, RobotModel};
use psfguard_core::sampling::{generate_dense_cloud, world_cloud};
use psfguard_core::shapes::ObstacleShape;
use psfguard_core::sim::{NominalSpec, ObstacleSpec, Scenario, ScriptedMotion, Trajectory};
use psfguard_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SUITE_SIZE: usize = 10;
pub const START_CLEARANCE: f64 = 0.25;
pub const MAX_OBSTACLE_SPEED: f64 = 0.5;
/// Horizontal keep-out radius around the base axis.
pub const COLUMN_RADIUS: f64 = 0.2;
const SHOULDER: [f64; 3] = [0.0, 0.0, 0.333];

fn base(name: &str, seed: u64) -> Scenario {
    let mut s = Scenario::new(name, fr3_like(), fr3_ready());
    s.dims = GridDims::cube(64).expect("64 is a valid grid size");
    s.epsilon = 0.1;
    s.delta = 0.01;
    s.control_rate = 50.0;
    s.duration = 30.0;
    s.seed = seed;
    s
}

/// World points of the arm's moving links at the start posture.
fn start_cloud(model: &RobotModel, q: &[f64]) -> Vec<Vec3> {
    let cloud = generate_dense_cloud(model, 0.02).expect("built-in model has a surface");
    let poses = model
        .forward_kinematics(q)
        .expect("posture matches the model");
    world_cloud(&cloud, &poses, true)
}

fn clear_of(cloud: &[Vec3], shape: &ObstacleShape) -> bool {
    cloud
        .iter()
        .all(|p| shape.signed_distance(p) >= START_CLEARANCE)
}

/// Horizontal distance from the base axis minus the shape's bounding radius.
fn column_margin(shape: &ObstacleShape) -> f64 {
    let (lo, hi) = shape.aabb();
    let c = (lo + hi) / 2.0;
    let r = (hi - lo).norm() / 2.0;
    c.xy().norm() - r
}

fn inside(shape: &ObstacleShape, margin: f64) -> bool {
    let (lo, hi) = shape.aabb();
    let b = psfguard_core::grid::WorldBounds::default();
    (0..3).all(|a| lo[a] >= b.min[a] + margin && hi[a] <= b.max[a] - margin)
}

fn random_clutter(rng: &mut ChaCha8Rng) -> ObstacleShape {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let rho = rng.random_range(0.45..0.85);
    let c = Vec3::new(
        rho * angle.cos(),
        rho * angle.sin(),
        rng.random_range(0.15..1.3),
    );
    match rng.random_range(0..3) {
        0 => ObstacleShape::sphere(c, rng.random_range(0.05..0.15)),
        1 => ObstacleShape::aabb_box(
            c,
            [
                rng.random_range(0.04..0.12),
                rng.random_range(0.04..0.12),
                rng.random_range(0.04..0.12),
            ],
        ),
        _ => {
            let d = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let d = d.normalize() * rng.random_range(0.05..0.15);
            ObstacleShape::capsule(c - d, c + d, rng.random_range(0.03..0.08))
        }
    }
    .expect("sizes are positive")
}

/// A sphere the end effector can reach: 0.45–0.7 m from the shoulder,
/// outside the column.
fn random_target(rng: &mut ChaCha8Rng) -> ObstacleShape {
    loop {
        let d = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.4..0.6),
        );
        if d.norm() < 1e-3 {
            continue;
        }
        let c = Vec3::from(SHOULDER) + d.normalize() * rng.random_range(0.45..0.7);
        let s = ObstacleShape::sphere(c, rng.random_range(0.06..0.12)).expect("radius is positive");
        if c.z > 0.15 && column_margin(&s) >= COLUMN_RADIUS {
            return s;
        }
    }
}

/// Scenario `index` of the static suite: a reachable target sphere the
/// nominal controller drives the end effector into, plus two to four other
/// obstacles.
pub fn static_clutter(index: usize) -> Scenario {
    let seed = 1000 + index as u64;
    let mut s = base(&format!("clutter_{index:02}"), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = start_cloud(&s.robot, &s.q0);
    let ok = |shape: &ObstacleShape| {
        clear_of(&cloud, shape) && column_margin(shape) >= COLUMN_RADIUS && inside(shape, 0.1)
    };
    let target = loop {
        let t = random_target(&mut rng);
        if ok(&t) {
            break t;
        }
    };
    s.obstacles.push(ObstacleSpec::fixed(target));
    let extra = rng.random_range(2..=4);
    while s.obstacles.len() < 1 + extra {
        let o = random_clutter(&mut rng);
        if ok(&o) {
            s.obstacles.push(ObstacleSpec::fixed(o));
        }
    }
    s.nominal = NominalSpec::AdversarialTowardObstacle {
        obstacle: 0,
        gain: 2.0,
        speed: 0.5,
    };
    s
}

/// Scenario `index` of the dynamic suite: one sphere on a periodic path
/// through the arm's workspace, at most [`MAX_OBSTACLE_SPEED`], while the
/// arm holds its posture (even indices) or cycles between waypoints (odd).
pub fn moving_sphere(index: usize) -> Scenario {
    let seed = 2000 + index as u64;
    let mut s = base(&format!("crossing_{index:02}"), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = start_cloud(&s.robot, &s.q0);
    let (shape, path) = loop {
        let radius = rng.random_range(0.07..0.12);
        let speed = rng.random_range(0.2..0.45);
        let path = if index % 3 == 2 {
            let r = rng.random_range(0.45..0.7);
            let center = [0.0, 0.0, rng.random_range(0.35..1.0)];
            ScriptedMotion::Circle {
                center,
                radius: r,
                period: std::f64::consts::TAU * r / speed,
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }
        } else {
            // a chord crossing in front of the arm
            let a = rng.random_range(-0.6..0.6);
            let from = [
                rng.random_range(0.25..0.5),
                -0.8,
                rng.random_range(0.3..0.8),
            ];
            let to = [rng.random_range(0.25..0.5), 0.8, rng.random_range(0.3..0.8)];
            let (from, to) = if a < 0.0 { (to, from) } else { (from, to) };
            let len = (Vec3::from(to) - Vec3::from(from)).norm();
            ScriptedMotion::Line {
                from,
                to,
                period: std::f64::consts::PI * len / speed,
            }
        };
        let start = ObstacleShape::sphere(path.position(0.0), radius).expect("radius is positive");
        let along_ok = (0..400).all(|k| {
            let t = k as f64 * 0.05;
            let o = ObstacleShape::sphere(path.position(t), radius).expect("radius is positive");
            column_margin(&o) >= COLUMN_RADIUS && inside(&o, 0.1)
        });
        if path.max_speed() <= MAX_OBSTACLE_SPEED && along_ok && clear_of(&cloud, &start) {
            break (start, path);
        }
    };
    s.obstacles.push(ObstacleSpec {
        shape,
        trajectory: Trajectory::Scripted { path },
    });
    if index % 2 == 1 {
        s.nominal = NominalSpec::EeWaypoints {
            waypoints: vec![[0.45, -0.25, 0.55], [0.45, 0.25, 0.55], [0.35, 0.0, 0.75]],
            gain: 2.0,
            speed: 0.3,
            tolerance: 0.03,
            cycle: true,
        };
    }
    s
}

pub fn static_suite() -> Vec<Scenario> {
    (0..SUITE_SIZE).map(static_clutter).collect()
}

pub fn dynamic_suite() -> Vec<Scenario> {
    (0..SUITE_SIZE).map(moving_sphere).collect()
}
