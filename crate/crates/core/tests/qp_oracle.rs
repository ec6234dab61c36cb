use nalgebra::{DMatrix, DVector};
use psfguard_core::qp::{kkt_residuals, project, QpSettings, QpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive active-set enumeration: solve the equality-constrained
/// projection for every subset of rows and keep the feasible candidate with
/// the smallest objective.
fn brute_force(x0: &DVector<f64>, c: &DMatrix<f64>, d: &DVector<f64>) -> Option<DVector<f64>> {
    let rows = c.nrows();
    let m = x0.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << rows) {
        let idx: Vec<usize> = (0..rows).filter(|i| mask & (1 << i) != 0).collect();
        if idx.len() > m {
            continue;
        }
        let x = if idx.is_empty() {
            x0.clone()
        } else {
            let mut n = DMatrix::zeros(m, idx.len());
            for (k, &i) in idx.iter().enumerate() {
                n.set_column(k, &c.row(i).transpose());
            }
            let gram = n.transpose() * &n;
            let Some(lu) = gram.clone().try_inverse() else {
                continue;
            };
            if gram.determinant().abs() < 1e-12 {
                continue;
            }
            let rhs =
                DVector::from_iterator(idx.len(), idx.iter().map(|&i| d[i])) - n.transpose() * x0;
            x0 + &n * (lu * rhs)
        };
        let feasible = (0..rows).all(|i| c.row(i).dot(&x.transpose()) - d[i] >= -1e-9);
        if feasible {
            let obj = (&x - x0).norm_squared();
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

#[test]
fn matches_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut feasible = 0;
    for _ in 0..200 {
        let rows = rng.random_range(0..=3);
        let x0 = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let c = DMatrix::from_fn(rows, 2, |_, _| rng.random_range(-1.0..1.0));
        let d = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        let sol = project(&x0, &c, &d, &QpSettings::default());
        match brute_force(&x0, &c, &d) {
            Some(x) => {
                feasible += 1;
                assert_eq!(sol.status, QpStatus::Optimal);
                assert!((&sol.x - &x).amax() <= 1e-6, "{} vs {}", sol.x, x);
                let kkt = kkt_residuals(&x0, &c, &d, &sol.x, &sol.multipliers);
                assert!(kkt.stationarity <= 1e-6, "{kkt:?}");
                assert!(kkt.min_multiplier >= 0.0);
                assert!(kkt.complementarity <= 1e-6, "{kkt:?}");
            }
            None => assert_eq!(
                sol.status,
                QpStatus::Infeasible,
                "x0 {x0} c {c} d {d} x {}",
                sol.x
            ),
        }
    }
    assert!(feasible > 150);
}

#[test]
fn larger_random_problems_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let m = rng.random_range(2..=8);
        let rows = rng.random_range(1..=60);
        let x0 = DVector::from_fn(m, |_, _| rng.random_range(-3.0..3.0));
        let c = DMatrix::from_fn(rows, m, |_, _| rng.random_range(-1.0..1.0));
        // keep the origin strictly feasible so the problem always has a solution
        let d = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..-0.01));
        let sol = project(&x0, &c, &d, &QpSettings::default());
        assert_eq!(sol.status, QpStatus::Optimal);
        let kkt = kkt_residuals(&x0, &c, &d, &sol.x, &sol.multipliers);
        assert!(kkt.stationarity <= 1e-9, "{kkt:?}");
        assert!(kkt.min_multiplier >= 0.0);
        assert!(kkt.complementarity <= 1e-9);
        assert!(kkt.primal <= 1e-9);
    }
}
