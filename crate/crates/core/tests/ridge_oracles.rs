use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use mffqi::regression::{fit_krr, ridge_objective, RidgeProblem};

/// Plain gradient descent on the ridge objective with step `1/L`.
fn gradient_descent(g: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, iters: usize) -> DVector<f64> {
    let n = y.len() as f64;
    let h = (g * g) * (2.0 / n) + g * (2.0 * lambda);
    let lip = h.symmetric_eigen().eigenvalues.max();
    let mut a = DVector::zeros(y.len());
    for _ in 0..iters {
        let grad = (g * (g * &a - y)) * (2.0 / n) + (g * &a) * (2.0 * lambda);
        a -= grad / lip;
    }
    a
}

fn psd(b: &DMatrix<f64>) -> DMatrix<f64> {
    b * b.transpose()
}

#[test]
fn closed_form_matches_gradient_descent() {
    let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.3, 1.0, 0.1, 0.0, 0.4, 1.0]);
    let g = psd(&b);
    let y = DVector::from_vec(vec![0.5, -0.2, 0.9]);
    let lambda = 0.1;
    let alpha = fit_krr(&RidgeProblem { gram: g.clone(), targets: y.clone(), lambda }).unwrap();
    let gd = gradient_descent(&g, &y, lambda, 20_000);
    let (j_cf, j_gd) = (ridge_objective(&g, &y, lambda, &alpha), ridge_objective(&g, &y, lambda, &gd));
    assert!((j_cf - j_gd).abs() <= 1e-10 * j_cf, "{j_cf} vs {j_gd}");
    assert!(j_cf <= j_gd);
}

#[test]
fn zero_targets_give_zero_coefficients() {
    let g = psd(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]));
    let alpha = fit_krr(&RidgeProblem { gram: g, targets: DVector::zeros(2), lambda: 0.3 }).unwrap();
    assert!(alpha.iter().all(|&a| a == 0.0));
}

proptest! {
    #[test]
    fn closed_form_is_first_order_optimal(
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        targets in prop::collection::vec(-1.0f64..1.0, 4),
        log_lambda in -3.0f64..0.0,
    ) {
        let b = DMatrix::from_row_slice(4, 4, &entries);
        let g = psd(&b) + DMatrix::identity(4, 4) * 1e-3;
        let y = DVector::from_vec(targets);
        let lambda = 10f64.powf(log_lambda);
        let alpha = fit_krr(&RidgeProblem { gram: g.clone(), targets: y.clone(), lambda }).unwrap();
        let n = 4.0;
        let grad = (&g * (&g * &alpha - &y)) * (2.0 / n) + (&g * &alpha) * (2.0 * lambda);
        let scale = (&g * &y).norm().max(1e-12);
        prop_assert!(grad.norm() <= 1e-9 * scale, "gradient {} vs scale {}", grad.norm(), scale);
    }
}
