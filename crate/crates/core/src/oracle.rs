//! Quadrature evaluations that do not go through the closed forms. They are
//! slow and only meant for cross-checks.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::geometry::GeometryParams;
use crate::quad::{adaptive, exp_sinh, oscillatory_tail};
use crate::special::ConstantsLedger;

const REL: f64 = 1e-15;

/// `∫_0^∞ t^{x-1} e^{-t} dt`, shifted into `[1, 2)` by the recurrence so the
/// integrand stays bounded at zero.
pub fn gamma_quadrature(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid("x", "gamma requires a finite positive argument"));
    }
    let mut shift = 1.0;
    let mut y = x;
    while y < 1.0 {
        shift /= y;
        y += 1.0;
    }
    let v = exp_sinh(|t| t.powf(y - 1.0) * (-t).exp(), REL).value;
    Ok(v * shift)
}

/// Unit sphere area from the Gaussian integral `π^{k/2} = V(S^{k-1}) ∫_0^∞ r^{k-1} e^{-r²} dr`.
pub fn sphere_area_quadrature(k: f64) -> f64 {
    let radial = exp_sinh(|r| r.powf(k - 1.0) * (-r * r).exp(), REL).value;
    PI.powf(0.5 * k) / radial
}

/// `∫_0^∞ s^power (1 + s²)^{-p/2} ds`; requires `power > -1` and `p > power + 1`.
pub fn radial_moment(power: f64, p: f64) -> Result<f64> {
    if !(power > -1.0) || !(p > power + 1.0) {
        return Err(invalid("p", "radial moment diverges"));
    }
    Ok(exp_sinh(|s| s.powf(power) * (1.0 + s * s).powf(-0.5 * p), REL).value)
}

/// `∫_{R^k} (1+|s|²)^{-(k+β)/2} ds` by radial quadrature.
pub fn kernel_mass_quadrature(k: f64, beta: f64) -> Result<f64> {
    Ok(sphere_area_quadrature(k) * radial_moment(k - 1.0, k + beta)?)
}

/// `K_ν(z) = ∫_0^∞ e^{-z cosh t} cosh(νt) dt`.
pub fn bessel_k_integral(nu: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(invalid("z", "argument must be positive"));
    }
    // Past `upper` the integrand is below e^{-740} relative to its peak.
    let upper = ((740.0 + nu.abs() * 50.0) / z + 1.0).acosh() + 1.0;
    let f = |t: f64| (-z * t.cosh() + nu.abs() * t).exp() * 0.5 * (1.0 + (-2.0 * nu.abs() * t).exp());
    Ok(adaptive(f, 0.0, upper, 1e-300, 1e-14, 2000).value)
}

/// Oracle value with the magnitude of the terms it was assembled from, so
/// differences that cancel to zero can still be compared on a sensible scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub scale: f64,
}

impl OracleValue {
    fn plain(v: f64) -> Self {
        OracleValue { value: v, scale: v.abs() }
    }

    fn difference(a: f64, b: f64) -> Self {
        OracleValue {
            value: a - b,
            scale: a.abs() + b.abs(),
        }
    }

    /// `|other - value| / scale`, or the absolute gap when the scale is zero.
    pub fn rel_gap(&self, other: f64) -> f64 {
        let gap = (other - self.value).abs();
        if self.scale > 0.0 {
            gap / self.scale
        } else {
            gap
        }
    }
}

/// Every ledger constant recomputed from quadrature. Entries are `None`
/// exactly where the closed-form ledger marks them undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerOracle {
    pub entries: Vec<(&'static str, Option<OracleValue>)>,
}

impl LedgerOracle {
    pub fn get(&self, name: &str) -> Option<OracleValue> {
        self.entries.iter().find(|(k, _)| *k == name).and_then(|(_, v)| *v)
    }
}

pub fn ledger_oracle(params: &GeometryParams) -> Result<LedgerOracle> {
    let n = params.n() as f64;
    let d = params.d();
    let a = params.alpha();
    let m = n - d - 2.0;
    let g = |x: f64| gamma_quadrature(x);

    let c1 = kernel_mass_quadrature(d, m)?;
    let c2 = kernel_mass_quadrature(d, a)?;
    let c3 = c2.powf(-m / a) * c1;
    let area = sphere_area_quadrature(d);
    let c1_tilde = if n - d > 4.0 { Some(area * radial_moment(d + 1.0, n - 2.0)?) } else { None };
    let c2_tilde = if a > 2.0 { Some(area * radial_moment(d + 1.0, d + a)?) } else { None };
    let c_pde = match (c1_tilde, c2_tilde) {
        (Some(t1), Some(t2)) if a != m => {
            let ratio = t1 / t2 * c2 / c1;
            Some(0.5 * (a / m - 1.0) / (1.0 - ratio))
        }
        _ => None,
    };

    let cf = OracleValue::difference(g(0.5 * (n - 1.0))? * g(0.5 * (a + 2.0))?, g(0.5 * (n - d))? * g(0.5 * (d + a + 1.0))?);
    let cg = if n > 3.0 && d + a > 1.0 {
        Some(OracleValue::difference(g(0.5 * (n - 3.0))? * g(0.5 * a)?, g(0.5 * m)? * g(0.5 * (d + a - 1.0))?))
    } else {
        None
    };
    let cf_prime = OracleValue::difference(
        g(0.5 * (n - 1.0))? / (2.0 - n),
        -g(0.5 * (n - d))? * g(0.5 * (d + a + 1.0))? / ((d + a) * g(0.5 * (a + 2.0))?),
    );
    let cg_prime = if n > 4.0 && d + a > 1.0 && d + a != 2.0 {
        Some(OracleValue::difference(
            g(0.5 * (n - 3.0))? / (4.0 - n),
            g(0.5 * (d + a - 1.0))? * g(0.5 * m)? / ((2.0 - d - a) * g(0.5 * a)?),
        ))
    } else {
        None
    };

    Ok(LedgerOracle {
        entries: vec![
            ("c1", Some(OracleValue::plain(c1))),
            ("c2", Some(OracleValue::plain(c2))),
            ("c3", Some(OracleValue::plain(c3))),
            ("c1_tilde", c1_tilde.map(OracleValue::plain)),
            ("c2_tilde", c2_tilde.map(OracleValue::plain)),
            ("c_pde", c_pde.map(OracleValue::plain)),
            ("c_pde_laplacian", c_pde.map(|c| OracleValue::plain(2.0 * c))),
            ("c_f", Some(cf)),
            ("c_g", cg),
            ("c_f_prime", Some(cf_prime)),
            ("c_g_prime", cg_prime),
        ],
    })
}

/// Largest relative gap between a closed-form ledger and its oracle, with
/// the name of the worst entry. Errors if the two disagree on definedness.
pub fn compare_ledger(ledger: &ConstantsLedger, oracle: &LedgerOracle) -> Result<(f64, &'static str)> {
    let mut worst = (0.0, "");
    for (name, value) in ledger.entries() {
        match (value, oracle.get(name)) {
            (Some(v), Some(o)) => {
                let gap = o.rel_gap(v);
                if !(gap <= worst.0) {
                    worst = (gap, name);
                }
            }
            (None, None) => {}
            _ => return Err(invalid("ledger", format!("{name} defined on one side only"))),
        }
    }
    Ok(worst)
}

/// `J_0(x) = (1/π) ∫_0^π cos(x sin θ) dθ` by the trapezoid rule, which is
/// spectrally accurate for this periodic integrand.
pub fn bessel_j0(x: f64) -> f64 {
    let panels = (2.0 * x.abs()) as usize + 40;
    let h = PI / panels as f64;
    let mut s = 0.5 * (1.0 + 1.0);
    for k in 1..panels {
        s += (x * (k as f64 * h).sin()).cos();
    }
    s / panels as f64
}

/// Fourier transform `∫_{R^d} f(|y|) e^{-iζ·y} dy` of a radial profile,
/// for `d ∈ {1, 2, 3}` and `ζ > 0`.
pub fn radial_fourier(profile: &dyn Fn(f64) -> f64, d: usize, zeta: f64) -> Result<f64> {
    if !(zeta > 0.0) {
        return Err(invalid("zeta", "frequency must be positive"));
    }
    let half = PI / zeta;
    let panels = 80;
    let tol = 1e-15;
    match d {
        1 => Ok(2.0 * oscillatory_tail(|r| profile(r) * (zeta * r).cos(), 0.0, half, panels, tol)),
        2 => Ok(2.0 * PI * oscillatory_tail(|r| profile(r) * bessel_j0(zeta * r) * r, 0.0, half, panels, tol)),
        3 => Ok(4.0 * PI / zeta * oscillatory_tail(|r| profile(r) * r * (zeta * r).sin(), 0.0, half, panels, tol)),
        _ => Err(invalid("d", "direct transforms are available for d = 1, 2, 3")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_by_quadrature() {
        assert_relative_eq!(gamma_quadrature(0.5).unwrap(), PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gamma_quadrature(5.0).unwrap(), 24.0, max_relative = 1e-13);
        assert_relative_eq!(gamma_quadrature(0.1).unwrap(), 9.513_507_698_668_732, max_relative = 1e-13);
    }

    #[test]
    fn sphere_area_by_quadrature() {
        assert_relative_eq!(sphere_area_quadrature(1.0), 2.0, max_relative = 1e-13);
        assert_relative_eq!(sphere_area_quadrature(3.0), 4.0 * PI, max_relative = 1e-13);
    }

    #[test]
    fn bessel_integral_matches_half_order() {
        for &z in &[0.05, 1.0, 6.0] {
            let exact = (PI / (2.0 * z)).sqrt() * (-z).exp();
            assert_relative_eq!(bessel_k_integral(0.5, z).unwrap(), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn j0_reference() {
        assert_relative_eq!(bessel_j0(1.0), 0.765_197_686_557_966_6, max_relative = 1e-14);
        assert_relative_eq!(bessel_j0(10.0), -0.245_935_764_451_348_3, max_relative = 1e-12);
    }

    #[test]
    fn transforms_of_lorentzian() {
        // (1+y²)^{-1} in one dimension and (1+|y|²)^{-1} in three.
        let f = |r: f64| 1.0 / (1.0 + r * r);
        for &z in &[0.1, 1.0, 4.0] {
            assert_relative_eq!(radial_fourier(&f, 1, z).unwrap(), PI * (-z).exp(), max_relative = 1e-9);
            assert_relative_eq!(radial_fourier(&f, 3, z).unwrap(), 2.0 * PI * PI * (-z).exp() / z, max_relative = 1e-8);
        }
        // Gaussian in two dimensions.
        let g = |r: f64| (-r * r).exp();
        assert_relative_eq!(radial_fourier(&g, 2, 1.5).unwrap(), PI * (-1.5f64 * 1.5 / 4.0).exp(), max_relative = 1e-9);
    }

    #[test]
    fn ledger_oracle_agrees() {
        let p = GeometryParams::new(8, 2.0, 3.0).unwrap();
        let l = crate::special::ledger(&p);
        let o = ledger_oracle(&p).unwrap();
        let (gap, name) = compare_ledger(&l, &o).unwrap();
        assert!(gap < 1e-10, "{name}: {gap}");
    }
}
