use regdist_core::pde_reduction::{
    pde_gradient_coefficient, pde_gradient_coefficient_unhalved, predicted_r2, r2_coefficient, unharmonize, SmoothDensity,
};
use regdist_core::{Expr, GeometryParams};

fn radii() -> Vec<f64> {
    (0..7).map(|k| 0.01 * 1.5f64.powi(k)).collect()
}

fn params() -> GeometryParams {
    GeometryParams::new(8, 2.0, 3.0).unwrap()
}

#[test]
fn generic_bump_matches_prediction() {
    let h = SmoothDensity::new(Expr::parse("1 + 0.5*exp(-(y1-0.3)^2-(y2+0.2)^2)").unwrap(), 2, 1.0, 8.0, (1.0, 1.5)).unwrap();
    let r = r2_coefficient(&h, &params(), &[0.0, 0.0], &radii()).unwrap();
    assert!(r.rel_err < 2e-2, "{r:?}");
    assert!((r.oracle_predicted - r.predicted).abs() < 1e-10 * r.predicted.abs());
}

fn power_family(c: f64) -> SmoothDensity {
    let g = Expr::parse("2 + y1*exp(-(y1^2+y2^2)/4)").unwrap();
    SmoothDensity::new(unharmonize(&g, c), 2, 2f64.powf(1.0 / (c + 1.0)), 12.0, (0.01, 100.0)).unwrap()
}

#[test]
fn harmonic_power_family_has_vanishing_r2_coefficient() {
    let p = params();
    let h = power_family(pde_gradient_coefficient(&p));
    let r = r2_coefficient(&h, &p, &[0.0, 0.0], &radii()).unwrap();
    assert!(r.predicted.abs() < 1e-12);
    assert!(r.rel_err < 1e-3, "{r:?}");
}

#[test]
fn unhalved_coefficient_leaves_a_nonzero_r2_term() {
    let p = params();
    let h = power_family(pde_gradient_coefficient_unhalved(&p));
    let r = r2_coefficient(&h, &p, &[0.0, 0.0], &radii()).unwrap();
    assert!(r.rel_err < 2e-2);
    assert!(predicted_r2(&h, &p, &[0.0, 0.0]).unwrap().abs() > 1e-2);
}
