use regdist_core::geometry::flat_measure;
use regdist_core::potentials::{distributional_laplacian_check, measure_integral, newton_potential, BumpTest};
use regdist_core::quad::gauss_legendre;
use regdist_core::{Field, GeometryParams};
use std::f64::consts::PI;

fn setup() -> (GeometryParams, regdist_core::DiscreteMeasure, BumpTest) {
    let p = GeometryParams::new(4, 1.0, 1.0).unwrap();
    let f = Field::parse("1 + 0.5*exp(-y1^2)").unwrap().with_limit(1.0).with_core_radius(7.0);
    let m = flat_measure(1, 4, f, 8.0, 0.05).unwrap();
    let b = BumpTest {
        centre: vec![0.2, 0.1, -0.1, 0.05],
        radius: 1.0,
    };
    (p, m, b)
}

fn composite(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let (u, w) = gauss_legendre(5);
    let h = (b - a) / panels as f64;
    let mut out = Vec::new();
    for k in 0..panels {
        let c = a + (k as f64 + 0.5) * h;
        for (ui, wi) in u.iter().zip(&w) {
            out.push((c + 0.5 * h * ui, 0.5 * h * wi));
        }
    }
    out
}

fn rhs(m: &regdist_core::DiscreteMeasure, b: &BumpTest) -> f64 {
    let mass = measure_integral(m, &|y: &[f64]| b.value(y), &b.centre, b.radius);
    -2.0 * PI * PI * 2.0 * mass
}

// The potential of a line depends only on the axial coordinate and the
// distance to the line, so ∫ u Δφ reduces to a 2-d integral against the
// spherical average of Δφ.
#[test]
fn cylindrical_quadrature_confirms_the_identity() {
    let (p, m, b) = setup();
    let reach = 1.0 + b.centre[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let xs = composite(b.centre[0] - 1.0, b.centre[0] + 1.0, 8);
    let rs = composite(0.0, reach, 8);
    let zs = composite(-1.0, 1.0, 8);
    let ts = composite(0.0, 2.0 * PI, 16);
    let mut lhs = 0.0;
    for &(x1, wx) in &xs {
        for &(rho, wr) in &rs {
            let mut avg = 0.0;
            for &(z, wz) in &zs {
                for &(t, wt) in &ts {
                    let q = (1.0 - z * z).sqrt();
                    avg += wz * wt * b.laplacian(&[x1, rho * q * t.cos(), rho * q * t.sin(), rho * z]);
                }
            }
            if avg != 0.0 {
                lhs += wx * wr * rho * rho * avg * newton_potential(&m, &p, None, &[x1, rho, 0.0, 0.0]).unwrap();
            }
        }
    }
    let r = rhs(&m, &b);
    assert!((lhs - r).abs() < 1e-5 * r.abs(), "{lhs} vs {r}");
}

#[test]
fn monte_carlo_agrees_within_its_error_bar() {
    let (p, m, b) = setup();
    let one = Field::constant(1.0);
    let c = distributional_laplacian_check(&m, &p, &one, &b, 40_000, 3).unwrap();
    assert!((c.lhs - c.rhs).abs() < 4.0 * c.std_err, "{c:?}");
    assert!((c.rhs - rhs(&m, &b)).abs() < 1e-12 * c.rhs.abs());
}
