use regdist_core::bmo::*;

fn assert_stable(label: &str, s: &RatioStudy) {
    assert!(s.sup_ratio.is_finite(), "{label}: {s:?}");
    assert_eq!(s.flagged, 0, "{label}: {s:?}");
    assert!(s.drift < 0.1, "{label}: {s:?}");
}

#[test]
fn log_norm_is_stable_under_refinement() {
    let f = BmoFunction::log_abs(1).unwrap();
    let coarse = bmo_norm(&f, 4, 4.0).unwrap().norm_estimate;
    let fine = bmo_norm(&f, 7, 4.0).unwrap().norm_estimate;
    assert!(fine.is_finite() && fine >= coarse);
    assert!((fine - coarse) / fine < 0.05);
}

#[test]
fn averages_inequality_on_log() {
    for dim in [1, 2] {
        let f = BmoFunction::log_abs(dim).unwrap();
        let norm = bmo_norm(&f, if dim == 1 { 6 } else { 3 }, 4.0).unwrap().norm_estimate;
        let pairs = sample_pairs(dim, 200, 11, 10.0, (0.01, 1.0));
        let s = averages_inequality_ratio(&f, &pairs, norm).unwrap();
        assert_stable("averages", &s);
    }
}

#[test]
fn averages_ratio_across_radius_decades() {
    let f = BmoFunction::log_abs(1).unwrap();
    let norm = bmo_norm(&f, 6, 4.0).unwrap().norm_estimate;
    let mut sups = Vec::new();
    for (i, range) in [(0.001, 0.01), (0.01, 0.1), (0.1, 1.0)].into_iter().enumerate() {
        let pairs = sample_pairs(1, 200, 20 + i as u64, 10.0, range);
        sups.push(averages_inequality_ratio(&f, &pairs, norm).unwrap().sup_ratio);
    }
    assert!(sups.iter().all(|s| s.is_finite() && *s < 10.0), "{sups:?}");
}

#[test]
fn doubling_chain_jumps_are_bounded() {
    let f = BmoFunction::log_abs(1).unwrap();
    let norm = bmo_norm(&f, 6, 4.0).unwrap().norm_estimate;
    for x in [0.0, 0.3, -2.0] {
        assert!(chain_jump_ratio(&f, &[x], 0.01, 12, norm) <= 1.0);
    }
}

#[test]
fn kernel_moments_on_truncated_log() {
    let f = BmoFunction::truncated_log(1, 5.0).unwrap();
    let norm = bmo_norm(&f, 6, 4.0).unwrap().norm_estimate;
    let points = sample_kernel_points(1, 4000, 5, (1e-2, 1.0), 1e3);
    let study = kernel_moment_ratio(&f, 2, 1.0, &points, norm).unwrap();
    assert_stable("local", &study.local);
    assert_stable("global", &study.global);
    let product = product_moment_ratio(&[(&f, norm), (&f, norm), (&f, norm)], 1.0, &points).unwrap();
    assert_stable("product", &product);
}

#[test]
fn kernel_ratio_bounded_as_height_shrinks() {
    let f = BmoFunction::truncated_log(1, 5.0).unwrap();
    let norm = bmo_norm(&f, 6, 4.0).unwrap().norm_estimate;
    for (i, range) in [(1e-2, 1e-1), (1e-1, 1.0)].into_iter().enumerate() {
        let points = sample_kernel_points(1, 100, 40 + i as u64, range, 1e3);
        let s = kernel_moment_ratio(&f, 2, 1.0, &points, norm).unwrap();
        assert!(s.local.sup_ratio.is_finite() && s.global.sup_ratio.is_finite());
    }
}

#[test]
fn constant_kernel_moment_matches_flat_mass() {
    let f = BmoFunction::new(regdist_core::Field::constant(-2.0), 2).unwrap();
    let p = KernelPoint { x0: vec![3.0, -1.0], delta: 0.05 };
    let v = kernel_moment(&[&f], 0.5, &p).unwrap();
    let mass = regdist_core::special::flat_kernel_mass(2.0, 0.5);
    assert!((v / (2.0 * mass * 0.05f64.powf(-0.5)) - 1.0).abs() < 1e-8);
}

#[test]
fn norm_invariances() {
    for (name, f) in corpus(1).unwrap() {
        let base = bmo_norm(&f, 6, 4.0).unwrap().norm_estimate;
        let shifted = bmo_norm(&f.shift_value(3.25), 6, 4.0).unwrap().norm_estimate;
        assert!((shifted - base).abs() <= 1e-9 * base.max(1.0), "{name}");
    }
    // f(2·) on B(0, R) sees the same balls as f on B(0, 2R).
    let f = BmoFunction::truncated_log(1, 5.0).unwrap();
    let a = bmo_norm(&f.dilate(2.0), 6, 2.0).unwrap().norm_estimate;
    let b = bmo_norm(&f, 6, 4.0).unwrap().norm_estimate;
    assert!((a - b).abs() < 1e-8 * b);
    let log = BmoFunction::log_abs(1).unwrap();
    let a = bmo_norm(&log.dilate(2.0), 6, 4.0).unwrap().norm_estimate;
    let b = bmo_norm(&log, 6, 4.0).unwrap().norm_estimate;
    assert!((a - b).abs() < 1e-8 * b);
}
