use psfguard::catalog;
use psfguard::scenario_file::{parse_scenario, pose_from_parts, ScenarioFile};
use psfguard_core::kinematics::planar_two_link;
use psfguard_core::sim::{NominalSpec, Scenario};

const MINIMAL: &str = r#"{
  "version": 1,
  "units": { "length": "m", "time": "s", "angle": "rad" },
  "robot": { "model": "fr3_like" },
  "grid": { "bounds": { "min": [-1, -1, 0], "max": [1, 1, 2] }, "dims": [16, 16, 16] },
  "sampling": { "epsilon": 0.1, "delta": 0.01 },
  "nominal": { "mode": "hold_q", "gain": 2.0 },
  "episode": { "control_rate": 50, "duration": 1 }
}"#;

fn round_trip(s: &Scenario) -> String {
    ScenarioFile::from_scenario(s).unwrap().to_json()
}

#[test]
fn catalog_scenarios_round_trip_exactly() {
    for s in catalog::static_suite()
        .iter()
        .chain(&catalog::dynamic_suite())
    {
        let text = round_trip(s);
        let back = parse_scenario(&text).unwrap();
        assert_eq!(&back, s, "{}", s.name);
        assert_eq!(round_trip(&back), text);
    }
}

#[test]
fn rotated_obstacles_round_trip() {
    let mut s = catalog::static_clutter(4);
    let q = [0.9, 0.1, -0.3, 0.2];
    let n = q.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    s.obstacles[1].shape.pose = pose_from_parts([0.5, 0.5, 0.5], Some(q.map(|v| v / n))).unwrap();
    let text = round_trip(&s);
    assert!(text.contains("orientation"));
    assert_eq!(parse_scenario(&text).unwrap(), s);
}

#[test]
fn optional_sections_take_defaults() {
    let s = parse_scenario(MINIMAL).unwrap();
    assert_eq!(s.q0, psfguard_core::kinematics::fr3_ready());
    assert!(s.obstacles.is_empty());
    assert!(s.use_clf);
    assert_eq!(s.seed, 0);
    assert!(matches!(
        s.nominal,
        NominalSpec::HoldQ { q_target: None, .. }
    ));
}

#[test]
fn unknown_keys_name_their_line() {
    let text = MINIMAL.replace("\"delta\": 0.01", "\"delta\": 0.01, \"detla\": 0.02");
    let e = parse_scenario(&text).unwrap_err();
    assert_eq!(e.line, Some(6));
    assert!(e.to_string().contains("detla"), "{e}");
    assert!(e.to_string().starts_with("line 6"), "{e}");
}

#[test]
fn unknown_shape_fields_are_rejected() {
    let text = MINIMAL.replace(
        "\"grid\"",
        "\"obstacles\": [{ \"shape\": { \"kind\": \"sphere\", \"radius\": 0.1, \"height\": 1 }, \"position\": [0.5, 0, 0.5] }],\n  \"grid\"",
    );
    let e = parse_scenario(&text).unwrap_err();
    assert!(e.to_string().contains("height"), "{e}");
}

#[test]
fn unit_mismatch_is_named() {
    let text = MINIMAL.replace("\"angle\": \"rad\"", "\"angle\": \"deg\"");
    let e = parse_scenario(&text).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("units.angle"));
    assert_eq!(e.line, Some(3));
}

#[test]
fn unsupported_version_is_rejected() {
    let e = parse_scenario(&MINIMAL.replace("\"version\": 1", "\"version\": 2")).unwrap_err();
    assert!(e.to_string().contains("version"), "{e}");
    assert_eq!(e.line, Some(2));
}

#[test]
fn invalid_values_point_at_their_key() {
    let e = parse_scenario(&MINIMAL.replace("\"epsilon\": 0.1", "\"epsilon\": -0.1")).unwrap_err();
    assert!(e.line.is_some(), "{e}");
    let e = parse_scenario(&MINIMAL.replace("fr3_like", "ur5")).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("robot.model"));
    assert_eq!(e.line, Some(4));
}

#[test]
fn non_unit_quaternions_are_rejected() {
    assert!(pose_from_parts([0.0; 3], Some([1.0, 1.0, 0.0, 0.0])).is_err());
    assert!(pose_from_parts([0.0; 3], Some([1.0, 0.0, 0.0, 0.0])).is_ok());
}

#[test]
fn custom_robots_cannot_be_written() {
    let mut s = catalog::static_clutter(0);
    s.robot = planar_two_link(0.4, 0.3);
    s.robot.name = "custom".into();
    assert!(ScenarioFile::from_scenario(&s).is_err());
}
