mod common;

use nalgebra::{DMatrix, DVector};
use nonsparse::semiparam::KernelSmoother;
use nonsparse::simulate::{run_experiment, BetaType, ExperimentConfig};
use proptest::prelude::*;

#[test]
fn weights_sum_to_one_over_many_queries() {
    let e = common::kernel_weight_sum_error(1, 1000);
    assert!(e <= 1e-10, "{e:e}");
}

#[test]
fn constants_are_reproduced() {
    let e = common::constant_reproduction_error(2, 200);
    assert!(e <= 1e-10, "{e:e}");
}

#[test]
fn theta_is_shift_equivariant() {
    let e = common::shift_equivariance_error(3, 100);
    assert!(e <= 1e-8, "{e:e}");
}

#[test]
fn exact_rows_are_orthonormal() {
    let e = common::exact_orthonormality_error(4, 100);
    assert!(e <= 1e-8, "{e:e}");
}

#[test]
fn approximate_row_has_unit_norm_and_best_signs() {
    let e = common::approximate_checks(5, 100).unwrap();
    assert!(e <= 1e-8, "{e:e}");
}

#[test]
fn simulation_ignores_worker_count() {
    let mut cfg = ExperimentConfig::nonsparse_grid(BetaType::I, 0.1, &[0.98, 0.5]);
    cfg.replicates = 6;
    let one = run_experiment(&cfg, 11, Some(1)).unwrap();
    let four = run_experiment(&cfg, 11, Some(4)).unwrap();
    assert_eq!(one, four);
}

proptest! {
    #[test]
    fn weights_are_a_distribution(
        data in prop::collection::vec(-3.0f64..3.0, 20..80),
        h in 0.01f64..5.0,
        q in prop::collection::vec(-10.0f64..10.0, 2),
        order in prop::sample::select(vec![2usize, 4, 6]),
    ) {
        let n = data.len() / 2;
        let pts = DMatrix::from_row_slice(n, 2, &data[..2 * n]);
        let sm = KernelSmoother::new(pts, h, order).unwrap();
        let w = sm.weights(&q).unwrap();
        prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        if order == 2 {
            prop_assert!(w.weights.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn smoothing_is_linear(
        data in prop::collection::vec(-2.0f64..2.0, 30),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let pts = DMatrix::from_column_slice(30, 1, &data);
        let sm = KernelSmoother::new(pts, 0.5, 2).unwrap();
        let f = DVector::from_fn(30, |i, _| data[i].powi(2));
        let g = DVector::from_fn(30, |i, _| data[i].cos());
        let combo = &f * a + &g * b;
        let q = [0.3];
        let lhs = sm.smooth_at(&combo, &q).unwrap().0;
        let rhs = a * sm.smooth_at(&f, &q).unwrap().0 + b * sm.smooth_at(&g, &q).unwrap().0;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}
