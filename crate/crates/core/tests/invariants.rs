use proptest::prelude::*;
use regdist_core::geometry::point_cloud;
use regdist_core::linearized::{asymptotic_constants, cg_recurrence_form, constant_scales, family_criterion, Verdict};
use regdist_core::potentials::{flat_smooth_distance, smooth_distance};
use regdist_core::special::{gamma_fn, ledger};
use regdist_core::GeometryParams;

fn geometry() -> impl Strategy<Value = (usize, f64, f64)> {
    (5usize..12)
        .prop_flat_map(|n| (Just(n), 0.2..(n as f64 - 2.2)))
        .prop_flat_map(|(n, d)| (Just(n), Just(d), 0.1..6.0f64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_recurrence(x in 0.05..30.0f64) {
        let lhs = gamma_fn(x + 1.0).unwrap();
        let rhs = x * gamma_fn(x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
    }

    #[test]
    fn magic_exponent_kills_both_leading_constants(n in 5usize..14, frac in 0.05..0.95f64) {
        let d = frac * (n as f64 - 2.0);
        let p = GeometryParams::magic(n, d).unwrap();
        let c = asymptotic_constants(&p);
        let (sf, sg) = constant_scales(&p);
        prop_assert!(c.cf.abs() <= 1e-12 * sf);
        if let Some(cg) = c.cg {
            prop_assert!(cg.abs() <= 1e-12 * sg);
        }
        prop_assert_eq!(family_criterion(&p).unwrap(), Verdict::MagicDegenerate);
    }

    #[test]
    fn unit_dimension_kills_leading_constants(n in 4usize..14, alpha in 0.1..6.0f64) {
        let p = GeometryParams::new(n, 1.0, alpha).unwrap();
        let c = asymptotic_constants(&p);
        let (sf, sg) = constant_scales(&p);
        prop_assert!(c.cf.abs() <= 1e-12 * sf);
        if let Some(cg) = c.cg {
            prop_assert!(cg.abs() <= 1e-12 * sg);
        }
    }

    #[test]
    fn recurrence_form_of_cg_agrees((n, d, alpha) in geometry()) {
        let p = GeometryParams::new(n, d, alpha).unwrap();
        if let (Some(cg), Some(alt)) = (asymptotic_constants(&p).cg, cg_recurrence_form(&p)) {
            let (_, sg) = constant_scales(&p);
            prop_assert!((cg - alt).abs() <= 1e-10 * sg, "{} vs {}", cg, alt);
        }
    }

    #[test]
    fn flat_distance_is_homogeneous((n, d, alpha) in geometry(), delta in 0.01..10.0f64, lambda in 0.1..10.0f64, rho in 0.1..10.0f64) {
        let p = GeometryParams::new(n, d, alpha).unwrap();
        let base = flat_smooth_distance(&p, rho, delta);
        prop_assert!((flat_smooth_distance(&p, rho, lambda * delta) - lambda * base).abs() <= 1e-12 * lambda * base);
        let heavier = flat_smooth_distance(&p, lambda * rho, delta);
        prop_assert!((heavier - lambda.powf(-1.0 / alpha) * base).abs() <= 1e-12 * base);
    }

    #[test]
    fn ledger_is_positive_where_defined((n, d, alpha) in geometry()) {
        let l = ledger(&GeometryParams::new(n, d, alpha).unwrap());
        for v in [l.c1, l.c2, l.c3].into_iter().flatten() {
            prop_assert!(v > 0.0 && v.is_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smooth_distance_is_translation_invariant(
        nodes in prop::collection::vec(prop::array::uniform3(-1.0..1.0f64), 3..12),
        shift in prop::array::uniform3(-50.0..50.0f64),
        alpha in 0.3..3.0f64,
    ) {
        let weights = vec![1.0 / nodes.len() as f64; nodes.len()];
        let p = GeometryParams::new(3, 0.5, alpha).unwrap();
        let base = point_cloud(3, 0.5, nodes.iter().map(|v| v.to_vec()).collect(), weights.clone(), Some(0.1)).unwrap();
        let moved_nodes = nodes.iter().map(|v| (0..3).map(|i| v[i] + shift[i]).collect()).collect();
        let moved = point_cloud(3, 0.5, moved_nodes, weights, Some(0.1)).unwrap();
        let x = [3.0, -2.0, 2.5];
        let xs: Vec<f64> = (0..3).map(|i| x[i] + shift[i]).collect();
        let a = smooth_distance(&base, &p, &x).unwrap();
        let b = smooth_distance(&moved, &p, &xs).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a, "{} vs {}", a, b);
    }
}
