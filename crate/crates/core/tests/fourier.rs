use regdist_core::linearized::{bessel_ft, observed_prefactor, transform_convention, KernelKind};
use regdist_core::oracle::radial_fourier;
use regdist_core::GeometryParams;

fn ratio_spread(d: usize) -> (f64, f64) {
    let mut ratios = Vec::new();
    for &a in &[2.0, 3.0, 4.0, 6.0] {
        for k in 0..=10 {
            let z = 0.1 * (50f64).powf(k as f64 / 10.0);
            let direct = radial_fourier(&|s: f64| (1.0 + s * s).powf(-0.5 * a), d, z).unwrap();
            ratios.push(direct / bessel_ft(a, d as f64, z).unwrap());
        }
    }
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    ((hi - lo) / mean.abs(), mean)
}

#[test]
fn bessel_form_matches_direct_transform_up_to_one_constant() {
    for d in [1usize, 3] {
        let (spread, kappa) = ratio_spread(d);
        assert!(spread < 1e-4, "d = {d}: spread {spread}");
        assert!((kappa / transform_convention(d as f64) - 1.0).abs() < 1e-4);
    }
}

#[test]
fn dilation_prefactor_is_h_to_the_d() {
    let p = GeometryParams::new(5, 1.0, 1.5).unwrap();
    for &h in &[0.25, 0.5] {
        let r = observed_prefactor(KernelKind::G, &p, h, 1.3, 1).unwrap();
        assert!((r / h - 1.0).abs() < 1e-6, "{r}");
    }
}
