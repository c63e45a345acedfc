//! Special functions and the constants ledger.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::geometry::GeometryParams;

/// Gamma function for positive arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid("x", format!("gamma requires a finite positive argument, got {x}")));
    }
    Ok(statrs::function::gamma::gamma(x))
}

pub(crate) fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Surface area of the unit sphere `S^{k-1}` in `R^k`.
pub fn sphere_area(k: u32) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k", "sphere dimension index must be at least 1"));
    }
    Ok(sphere_area_real(k as f64))
}

/// `2 π^{k/2} / Γ(k/2)` for real `k > 0`.
pub(crate) fn sphere_area_real(k: f64) -> f64 {
    2.0 * PI.powf(0.5 * k) / gamma(0.5 * k)
}

/// Volume of the unit ball in `R^k` for real `k > 0`.
pub fn unit_ball_volume(k: f64) -> f64 {
    PI.powf(0.5 * k) / gamma(0.5 * k + 1.0)
}

/// `∫_{R^k} (1 + |s|²)^{-(k+β)/2} ds` for real `k, β > 0`.
///
/// This is the constant relating Riesz-type potentials of order `k + β`
/// over a flat `k`-plane to the height above it.
pub fn flat_kernel_mass(k: f64, beta: f64) -> f64 {
    sphere_area_real(k) * 0.5 * (ln_gamma(0.5 * k) + ln_gamma(0.5 * beta) - ln_gamma(0.5 * (k + beta))).exp()
}

// Taylor coefficients of 1/Γ(1+x) about 0.
const RGAM: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Returns `(gam1, gam2, 1/Γ(1+μ), 1/Γ(1-μ))` for `|μ| ≤ 1/2`, where
/// `gam1 = (1/Γ(1-μ) - 1/Γ(1+μ)) / (2μ)` and `gam2` is their mean.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let gampl = 1.0 / gamma(1.0 + mu);
    let gammi = 1.0 / gamma(1.0 - mu);
    let gam2 = 0.5 * (gammi + gampl);
    let gam1 = if mu.abs() < 0.1 {
        let m2 = mu * mu;
        let mut s = 0.0;
        let mut p = 1.0;
        for j in (1..RGAM.len()).step_by(2) {
            s += RGAM[j] * p;
            p *= m2;
        }
        -s
    } else {
        (gammi - gampl) / (2.0 * mu)
    };
    (gam1, gam2, gampl, gammi)
}

/// Modified Bessel function of the second kind `K_ν(z)` for real order and
/// `z > 0`, by Temme's series for small `z` and Steed's continued fraction
/// otherwise, followed by forward recurrence in the order.
pub fn bessel_k(nu: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(invalid("z", format!("bessel_k requires z > 0, got {z}")));
    }
    if !nu.is_finite() {
        return Err(invalid("b", "order must be finite"));
    }
    Ok(bessel_k_unchecked(nu.abs(), z))
}

fn bessel_k_unchecked(nu: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-17;
    let nl = (nu + 0.5).floor() as i64;
    let mu = nu - nl as f64;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut kmu, mut k1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < 1e-300 { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < 1e-300 { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..500 {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            let del1 = c * (p - fi * ff);
            sum1 += del1;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        kmu = sum;
        k1 = sum1 * xi2;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 1..10_000 {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        kmu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        k1 = kmu * (mu + x + 0.5 - h) * xi;
    }
    for i in 1..=nl {
        let next = (mu + i as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    kmu
}

/// Leading small-argument asymptotics of `K_b(z)`:
/// one term `Γ(b)/2 (2/z)^b`, two terms adding `Γ(b)/(2(1-b)) (2/z)^{b-2}`.
pub fn bessel_k_small_z(b: f64, z: f64, terms: u32) -> Result<f64> {
    if !(b > 0.0) {
        return Err(invalid("b", "small-argument expansion requires b > 0"));
    }
    if !(z > 0.0) {
        return Err(invalid("z", "small-argument expansion requires z > 0"));
    }
    let g = gamma(b);
    let lead = 0.5 * g * (2.0 / z).powf(b);
    match terms {
        1 => Ok(lead),
        2 => {
            if b == 1.0 {
                return Err(invalid("terms", "the two-term expansion is singular at b = 1"));
            }
            Ok(lead + g / (2.0 * (1.0 - b)) * (2.0 / z).powf(b - 2.0))
        }
        _ => Err(invalid("terms", "only one or two terms are available")),
    }
}

/// Closed-form constants attached to a geometry; `None` marks a constant that
/// is undefined for the given parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsLedger {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c1_tilde: Option<f64>,
    pub c2_tilde: Option<f64>,
    /// Coefficient of the gradient term in the reduced equation when the
    /// Taylor quadratic form is written without the factor 1/2. Defined for
    /// `n - d > 4`, `α > 2` and non-magic `α`.
    pub c_pde: Option<f64>,
    /// Same coefficient expressed against the true Laplacian.
    pub c_pde_laplacian: Option<f64>,
    pub c_f: Option<f64>,
    pub c_g: Option<f64>,
    pub c_f_prime: Option<f64>,
    pub c_g_prime: Option<f64>,
}

impl ConstantsLedger {
    pub fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c1_tilde", self.c1_tilde),
            ("c2_tilde", self.c2_tilde),
            ("c_pde", self.c_pde),
            ("c_pde_laplacian", self.c_pde_laplacian),
            ("c_f", self.c_f),
            ("c_g", self.c_g),
            ("c_f_prime", self.c_f_prime),
            ("c_g_prime", self.c_g_prime),
        ]
    }

    /// `c1 / c2` as a ratio of Gamma values.
    pub fn c1_over_c2(params: &GeometryParams) -> f64 {
        let n = params.n() as f64;
        let (d, a) = (params.d(), params.alpha());
        (ln_gamma(0.5 * (n - d - 2.0)) + ln_gamma(0.5 * (d + a)) - ln_gamma(0.5 * (n - 2.0)) - ln_gamma(0.5 * a)).exp()
    }
}

/// Moment `V(S^{d-1}) ∫_0^∞ s^{d+1} (1+s²)^{-p/2} ds`, defined for `p > d + 2`.
fn second_moment(d: f64, p: f64) -> Option<f64> {
    if p - d - 2.0 > 0.0 {
        Some(sphere_area_real(d) * 0.5 * (ln_gamma(0.5 * (d + 2.0)) + ln_gamma(0.5 * (p - d - 2.0)) - ln_gamma(0.5 * p)).exp())
    } else {
        None
    }
}

pub fn ledger(params: &GeometryParams) -> ConstantsLedger {
    let n = params.n() as f64;
    let d = params.d();
    let a = params.alpha();
    let m = n - d - 2.0;
    let g = gamma;

    let c1 = flat_kernel_mass(d, m);
    let c2 = flat_kernel_mass(d, a);
    let c3 = c2.powf(-m / a) * c1;
    let c1_tilde = second_moment(d, n - 2.0);
    let c2_tilde = second_moment(d, d + a);
    let c_pde = match (c1_tilde, c2_tilde) {
        (Some(_), Some(_)) if a != m => Some(-(0.5 - 1.0 / m)),
        _ => None,
    };

    let c_f = g(0.5 * (n - 1.0)) * g(0.5 * (a + 2.0)) - g(0.5 * (n - d)) * g(0.5 * (d + a + 1.0));
    let c_g = if n > 3.0 && d + a > 1.0 {
        Some(g(0.5 * (n - 3.0)) * g(0.5 * a) - g(0.5 * m) * g(0.5 * (d + a - 1.0)))
    } else {
        None
    };
    let c_f_prime = g(0.5 * (n - 1.0)) / (2.0 - n) + g(0.5 * (n - d)) * g(0.5 * (d + a + 1.0)) / ((d + a) * g(0.5 * (a + 2.0)));
    let c_g_prime = if n > 4.0 && d + a > 1.0 && d + a != 2.0 {
        Some(g(0.5 * (n - 3.0)) / (4.0 - n) - g(0.5 * (d + a - 1.0)) * g(0.5 * m) / ((2.0 - d - a) * g(0.5 * a)))
    } else {
        None
    };

    ConstantsLedger {
        c1: Some(c1),
        c2: Some(c2),
        c3: Some(c3),
        c1_tilde,
        c2_tilde,
        c_pde,
        c_pde_laplacian: c_pde.map(|c| 2.0 * c),
        c_f: Some(c_f),
        c_g,
        c_f_prime: Some(c_f_prime),
        c_g_prime,
    }
}
