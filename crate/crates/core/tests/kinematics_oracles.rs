use nalgebra::DVector;
use psfguard_core::kinematics::{fr3_like, planar_two_link, BodyPoint, RobotModel};
use psfguard_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_q(m: &RobotModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    m.joints
        .iter()
        .map(|j| rng.random_range(j.q_min..j.q_max))
        .collect()
}

#[test]
fn point_jacobian_matches_central_differences() {
    let m = fr3_like();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let q = random_q(&m, &mut rng);
        let p = BodyPoint::new(
            rng.random_range(1..m.links.len()),
            Vec3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            ),
        );
        let jac = m.point_jacobian(&q, &p).unwrap();
        let mut fd = jac.clone() * 0.0;
        for j in 0..m.dof() {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[j] += h;
            qm[j] -= h;
            let col = (m.body_point_position(&qp, &p).unwrap()
                - m.body_point_position(&qm, &p).unwrap())
                / (2.0 * h);
            fd.set_column(j, &col);
        }
        let rel = (&jac - &fd).norm() / jac.norm().max(1e-12);
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn jacobian_predicts_point_velocity() {
    let m = fr3_like();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = random_q(&m, &mut rng);
    let v: Vec<f64> = (0..m.dof()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let jac = m.point_jacobian(&q, &m.end_effector).unwrap();
    let dt = 1e-7;
    let q2: Vec<f64> = q.iter().zip(&v).map(|(a, b)| a + b * dt).collect();
    let moved = (m.body_point_position(&q2, &m.end_effector).unwrap()
        - m.body_point_position(&q, &m.end_effector).unwrap())
        / dt;
    let predicted = &jac * DVector::from_vec(v);
    assert!((Vec3::new(predicted[0], predicted[1], predicted[2]) - moved).norm() < 1e-5);
}

#[test]
fn planar_arm_matches_trigonometry() {
    let (l1, l2) = (0.4, 0.3);
    let m = planar_two_link(l1, l2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let q = random_q(&m, &mut rng);
        let tip = m.body_point_position(&q, &m.end_effector).unwrap();
        let expect = Vec3::new(
            l1 * q[0].cos() + l2 * (q[0] + q[1]).cos(),
            l1 * q[0].sin() + l2 * (q[0] + q[1]).sin(),
            0.0,
        );
        assert!((tip - expect).norm() <= 1e-12, "{q:?}");
    }
}
