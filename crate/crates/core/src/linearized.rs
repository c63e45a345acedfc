//! Kernels of the equations linearized at the flat solution, their Fourier
//! transforms, and the constants deciding whether one-parameter families of
//! perturbations can exist.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{norm, Field, GeometryParams};
use crate::oracle::radial_fourier;
use crate::potentials::{flat_tail, polar_integral};
use crate::quad::{adaptive_breaks, Estimate};
use crate::special::{bessel_k, gamma, ledger, ConstantsLedger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `c₁/c₂ (1+s²)^{-(d+α)/2} - (1+s²)^{-(n-2)/2}`.
    Ker,
    /// `(1+s²/h²)^{-(n-2)/2} - c₁/c₂ (1+s²/h²)^{-(d+α)/2}`.
    G,
    /// `(n-2)(1+s²/h²)^{-n/2} - c₁/c₂ (d+α)(n-d-2)/α (1+s²/h²)^{-(d+α+2)/2}`.
    F,
}

/// Radial profile written as `Σ coef · (1 + (s/h)²)^{-a/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialKernelProfile {
    pub kind: KernelKind,
    pub params: GeometryParams,
    pub h: f64,
    /// `(coef, a)` pairs.
    pub terms: Vec<(f64, f64)>,
}

impl RadialKernelProfile {
    pub fn new(kind: KernelKind, params: &GeometryParams, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("h", "scale must be positive"));
        }
        let n = params.n() as f64;
        let (d, a) = (params.d(), params.alpha());
        let ratio = ConstantsLedger::c1_over_c2(params);
        let terms = match kind {
            KernelKind::Ker => {
                if h != 1.0 {
                    return Err(invalid("h", "the flat kernel has no scale parameter"));
                }
                vec![(ratio, d + a), (-1.0, n - 2.0)]
            }
            KernelKind::G => vec![(1.0, n - 2.0), (-ratio, d + a)],
            KernelKind::F => vec![(n - 2.0, n), (-ratio * (d + a) * params.magic_alpha() / a, d + a + 2.0)],
        };
        Ok(RadialKernelProfile {
            kind,
            params: *params,
            h,
            terms,
        })
    }

    pub fn evaluate(&self, s: f64) -> f64 {
        let u = 1.0 + (s / self.h) * (s / self.h);
        self.terms.iter().map(|&(c, a)| c * u.powf(-0.5 * a)).sum()
    }
}

pub fn ker_profile(params: &GeometryParams) -> RadialKernelProfile {
    RadialKernelProfile::new(KernelKind::Ker, params, 1.0).expect("unit scale")
}

/// `∫_{R^d} Ker` with the quadrature part and the closed-form tails
/// reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelIntegral {
    pub value: f64,
    pub quadrature_error: f64,
    pub tail: f64,
    /// `∫ |first term| + ∫ |second term|`.
    pub scale: f64,
}

pub fn ker_integral(params: &GeometryParams) -> KernelIntegral {
    let profile = ker_profile(params);
    let d = params.d();
    let area = crate::special::sphere_area_real(d);
    let cutoff = 64.0;
    let mut breaks = vec![0.0, 0.5, 1.0];
    let mut b = 2.0;
    while b < cutoff {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(cutoff);
    let Estimate { value, error } = adaptive_breaks(|s: f64| s.powf(d - 1.0) * profile.evaluate(s), &breaks, 0.0, 1e-14, 4000);
    let tail: f64 = profile.terms.iter().map(|&(c, a)| c * flat_tail(d, a, 1.0, cutoff)).sum();
    let scale = profile
        .terms
        .iter()
        .map(|&(c, a)| c.abs() * crate::special::flat_kernel_mass(d, a - d))
        .sum();
    KernelIntegral {
        value: area * value + tail,
        quadrature_error: area * error,
        tail,
        scale,
    }
}

/// `2^{1-a/2} z^ν K_ν(z) / Γ(a/2)` with `ν = (a - d)/2`: up to a
/// convention factor `(2π)^{d/2}` this is the Fourier transform of
/// `(1+|y|²)^{-a/2}` on `R^d` at `|ζ| = z`. For `z ≤ 0` the limit
/// `2^{-d/2} Γ(ν)/Γ(a/2)` is returned, which requires `a > d`.
pub fn bessel_ft(a: f64, d: f64, z: f64) -> Result<f64> {
    if !(a > 0.0) || !(d > 0.0) {
        return Err(invalid("a", "exponent and dimension must be positive"));
    }
    let nu = 0.5 * (a - d);
    if z <= 0.0 {
        if nu <= 0.0 {
            return Err(Error::Undefined("zero-frequency limit needs a > d"));
        }
        return Ok(2f64.powf(-0.5 * d) * gamma(nu) / gamma(0.5 * a));
    }
    let k = bessel_k(nu, z)?;
    Ok(2f64.powf(1.0 - 0.5 * a) * z.powf(nu) * k / gamma(0.5 * a))
}

/// Convention constant relating [`bessel_ft`] to `∫ f(y) e^{-iζ·y} dy`.
pub fn transform_convention(d: f64) -> f64 {
    (2.0 * std::f64::consts::PI).powf(0.5 * d)
}

/// Transform of a scaled kernel in the one-dimensional Bessel form, so that
/// `kernel_ft(g_h, ζ) = kernel_ft(g_1, hζ)` and the zero-frequency limits
/// carry the signs of `C_g` and `C_f`.
pub fn kernel_ft(profile: &RadialKernelProfile, zeta: f64) -> Result<f64> {
    if profile.kind == KernelKind::Ker {
        return Err(invalid("profile", "the transform is defined for the scaled kernels"));
    }
    let z = profile.h * zeta.abs();
    profile.terms.iter().map(|&(c, a)| bessel_ft(a, 1.0, z).map(|v| c * v)).sum()
}

/// Ratio `F[k_h](ζ) / F[k_1](hζ)` of direct numerical transforms on `R^d`;
/// dilation predicts `h^d`.
pub fn observed_prefactor(kind: KernelKind, params: &GeometryParams, h: f64, zeta: f64, d: usize) -> Result<f64> {
    let scaled = RadialKernelProfile::new(kind, params, h)?;
    let unit = RadialKernelProfile::new(kind, params, 1.0)?;
    let a = radial_fourier(&|s| scaled.evaluate(s), d, zeta)?;
    let b = radial_fourier(&|s| unit.evaluate(s), d, h * zeta)?;
    Ok(a / b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    pub cf: f64,
    pub cg: Option<f64>,
    pub cf_prime: f64,
    pub cg_prime: Option<f64>,
}

pub fn asymptotic_constants(params: &GeometryParams) -> AsymptoticConstants {
    let l = ledger(params);
    AsymptoticConstants {
        cf: l.c_f.unwrap(),
        cg: l.c_g,
        cf_prime: l.c_f_prime.unwrap(),
        cg_prime: l.c_g_prime,
    }
}

/// Magnitudes of the two Gamma products whose difference is `C_f`, resp. `C_g`.
pub fn constant_scales(params: &GeometryParams) -> (f64, f64) {
    let n = params.n() as f64;
    let (d, a) = (params.d(), params.alpha());
    let m = n - d - 2.0;
    let sf = gamma(0.5 * (n - 1.0)) * gamma(0.5 * (a + 2.0)) + gamma(0.5 * (n - d)) * gamma(0.5 * (d + a + 1.0));
    let sg = if n > 3.0 && d + a > 1.0 {
        gamma(0.5 * (n - 3.0)) * gamma(0.5 * a) + gamma(0.5 * m) * gamma(0.5 * (d + a - 1.0))
    } else {
        f64::NAN
    };
    (sf, sg)
}

/// `C_g` rewritten through `Γ(z+1) = zΓ(z)` in terms of the products in `C_f`.
pub fn cg_recurrence_form(params: &GeometryParams) -> Option<f64> {
    let n = params.n() as f64;
    let (d, a) = (params.d(), params.alpha());
    if !(n > 3.0 && d + a > 1.0) {
        return None;
    }
    let p = gamma(0.5 * (n - 1.0)) * gamma(0.5 * (a + 2.0)) / (0.5 * (n - 3.0) * 0.5 * a);
    let q = gamma(0.5 * (n - d)) * gamma(0.5 * (d + a + 1.0)) / (0.5 * (n - d - 2.0) * 0.5 * (d + a - 1.0));
    Some(p - q)
}

/// `|(n-d-2)(d+α-1) - (n-3)α|`.
pub fn relation_residual(params: &GeometryParams) -> f64 {
    let n = params.n() as f64;
    let (d, a) = (params.d(), params.alpha());
    ((n - d - 2.0) * (d + a - 1.0) - (n - 3.0) * a).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: usize,
    pub d: f64,
    pub alpha: f64,
    pub cf: f64,
    pub cg: f64,
    pub relation_residual: f64,
    /// Both `|C_f|` and `|C_g|` are below `tol` relative to their terms.
    pub simultaneous_zero: bool,
    /// Row produced by root bisection rather than the grid.
    pub from_root: bool,
}

fn scan_row(params: &GeometryParams, tol: f64, from_root: bool) -> Option<ScanRow> {
    let c = asymptotic_constants(params);
    let cg = c.cg?;
    let (sf, sg) = constant_scales(params);
    Some(ScanRow {
        n: params.n(),
        d: params.d(),
        alpha: params.alpha(),
        cf: c.cf,
        cg,
        relation_residual: relation_residual(params),
        simultaneous_zero: c.cf.abs() <= tol * sf && cg.abs() <= tol * sg,
        from_root,
    })
}

/// Roots of `α ↦ C_f(n, d, α)` bracketed by consecutive grid values.
pub fn cf_roots(n: usize, d: f64, alpha_grid: &[f64]) -> Result<Vec<f64>> {
    let cf = |a: f64| -> Result<f64> { Ok(asymptotic_constants(&GeometryParams::new(n, d, a)?).cf) };
    let mut roots = Vec::new();
    for w in alpha_grid.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (mut flo, fhi) = (cf(lo)?, cf(hi)?);
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo * fhi > 0.0 || fhi == 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = cf(mid)?;
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm * flo < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if let Some(&last) = alpha_grid.last() {
        if cf(last)? == 0.0 {
            roots.push(last);
        }
    }
    Ok(roots)
}

/// Evaluates the constants over a grid and at every bisected root of `C_f`.
/// Parameter combinations that are not valid geometries are skipped.
pub fn degeneracy_scan(ns: &[usize], ds: &[f64], alpha_grid: &[f64], tol: f64) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &d in ds {
            if !(d < n as f64 - 2.0) {
                continue;
            }
            for &a in alpha_grid {
                if let Some(r) = GeometryParams::new(n, d, a).ok().and_then(|p| scan_row(&p, tol, false)) {
                    rows.push(r);
                }
            }
            for a in cf_roots(n, d, alpha_grid)? {
                if let Some(r) = scan_row(&GeometryParams::new(n, d, a)?, tol, true) {
                    rows.push(r);
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FamiliesExcluded,
    MagicDegenerate,
    D1Degenerate,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::FamiliesExcluded => "families_excluded",
            Verdict::MagicDegenerate => "magic_degenerate",
            Verdict::D1Degenerate => "d1_degenerate",
        }
    }
}

const VERDICT_TOL: f64 = 1e-12;

/// Case analysis of `hφ̂(C_g + h²C_g') = ψ̂(C_f + h²C_f')` for small `h`:
/// a nonzero `ψ̂` forces `C_f = 0`, then `φ̂ ≠ 0` forces `C_g = C_g' = C_f' = 0`,
/// and `φ̂ = 0` forces `C_f' = 0`; only magic `α` or `d = 1` escape.
pub fn family_criterion(params: &GeometryParams) -> Result<Verdict> {
    let m = params.magic_alpha();
    if (params.alpha() - m).abs() <= VERDICT_TOL * m {
        return Ok(Verdict::MagicDegenerate);
    }
    if params.d() == 1.0 {
        return Ok(Verdict::D1Degenerate);
    }
    let c = asymptotic_constants(params);
    let (sf, _) = constant_scales(params);
    let cf_zero = c.cf.abs() <= VERDICT_TOL * sf;
    let cfp_zero = c.cf_prime.abs() <= VERDICT_TOL * (c.cf_prime.abs() + 1.0);
    if cf_zero && cfp_zero {
        return Err(Error::Numerical(format!(
            "C_f and C_f' both vanish at non-magic α = {} with d = {}",
            params.alpha(),
            params.d()
        )));
    }
    Ok(Verdict::FamiliesExcluded)
}

/// Perturbation `φ` of a flat density, bounded, with a value at infinity
/// reached outside its core radius.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationTestFunction {
    pub field: Field,
    pub integrable: bool,
}

impl PerturbationTestFunction {
    pub fn new(field: Field) -> Result<Self> {
        let limit = field
            .limit
            .ok_or_else(|| invalid("phi", "the perturbation needs its value at infinity"))?;
        Ok(PerturbationTestFunction {
            integrable: limit == 0.0,
            field,
        })
    }

    /// `∫_{|y| < R} |φ|` for each radius, to watch an integrable `φ` settle.
    pub fn l1_norms(&self, d: usize, radii: &[f64]) -> Vec<f64> {
        let centre = vec![0.0; d];
        radii
            .iter()
            .map(|&r| polar_integral(d, &centre, r, 1.0, &[], &mut |y| self.field.eval(y).abs(), 1e-10))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalValue {
    pub value: f64,
    /// Sum of the magnitudes of the two integrals that cancel in `value`.
    pub scale: f64,
    pub normalized: f64,
}

/// `∫_{R^d} [c₁/c₂ δ^{d+2+α-n} |x-y|^{-(d+α)} - |x-y|^{-(n-2)}] φ(y) dy` for
/// `x` above the plane `R^d × {0}`.
pub fn flat_functional_eval(phi: &PerturbationTestFunction, params: &GeometryParams, x: &[f64]) -> Result<FunctionalValue> {
    let n = params.n();
    let d = params.d();
    if d.fract() != 0.0 || !(1.0..=3.0).contains(&d) {
        return Err(invalid("d", "the flat functional is evaluated for d = 1, 2, 3"));
    }
    let du = d as usize;
    if x.len() != n {
        return Err(invalid("x", format!("expected {n} coordinates")));
    }
    let delta = norm(&x[du..]);
    if !(delta > 0.0) {
        return Err(Error::OutsideValidity("point lies on the plane".into()));
    }
    let a = params.alpha();
    let nf = n as f64;
    let x0 = &x[..du];
    let c = ConstantsLedger::c1_over_c2(params) * delta.powf(d + 2.0 + a - nf);
    let r0 = norm(x0);
    let core = phi.field.core_radius;
    let r_out = (8.0 * delta.max(r0 + 1.0)).max(r0 + core + 1.0);
    let mut first = |y: &[f64]| -> f64 {
        let r2 = delta * delta + y.iter().zip(x0).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        c * r2.powf(-0.5 * (d + a)) * phi.field.eval(y)
    };
    let mut second = |y: &[f64]| -> f64 {
        let r2 = delta * delta + y.iter().zip(x0).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        r2.powf(-0.5 * (nf - 2.0)) * phi.field.eval(y)
    };
    let extra = [r0 - core, r0, r0 + core];
    let tol = 1e-13;
    let i1 = polar_integral(du, x0, r_out, delta, &extra, &mut first, tol);
    let i2 = polar_integral(du, x0, r_out, delta, &extra, &mut second, tol);
    let limit = phi.field.limit.unwrap_or(0.0);
    let t1 = i1 + limit * c * flat_tail(d, d + a, delta, r_out);
    let t2 = i2 + limit * flat_tail(d, nf - 2.0, delta, r_out);
    let value = t1 - t2;
    let scale = t1.abs() + t2.abs();
    Ok(FunctionalValue {
        value,
        scale,
        normalized: if scale > 0.0 { value / scale } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn bessel_ft_examples() {
        let v = bessel_ft(2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(v, (PI / 2.0).sqrt() * (-1.0f64).exp(), max_relative = 1e-13);
        for &a in &[2.0, 3.0, 5.5] {
            let lim = 2f64.powf(-0.5) * gamma(0.5 * (a - 1.0)) / gamma(0.5 * a);
            assert_relative_eq!(bessel_ft(a, 1.0, 0.0).unwrap(), lim, max_relative = 1e-14);
            assert_relative_eq!(bessel_ft(a, 1.0, 1e-7).unwrap(), lim, max_relative = 1e-5);
        }
        assert!(bessel_ft(2.0, 3.0, 0.0).is_err());
    }

    #[test]
    fn ker_integrates_to_zero() {
        for &(n, d, a) in &[(5, 1.0, 1.0), (8, 2.0, 3.0), (9, 3.0, 2.5), (6, 1.0, 0.4)] {
            let k = ker_integral(&GeometryParams::new(n, d, a).unwrap());
            assert!(k.value.abs() < 1e-9, "{n} {d} {a}: {k:?}");
        }
    }

    #[test]
    fn ker_decays_like_a_power() {
        let p = GeometryParams::new(7, 2.0, 1.5).unwrap();
        let k = ker_profile(&p);
        let e = (p.d() + p.alpha()).min(5.0);
        let c = (k.evaluate(1e3) * 1e3f64.powf(e)).abs();
        assert!((k.evaluate(1e4) * 1e4f64.powf(e)).abs() <= 1.01 * c);
    }

    #[test]
    fn magic_kernel_vanishes() {
        let p = GeometryParams::magic(8, 2.0).unwrap();
        let k = ker_profile(&p);
        for &s in &[0.0, 0.5, 3.0] {
            assert!(k.evaluate(s).abs() < 1e-14);
        }
        let g = RadialKernelProfile::new(KernelKind::G, &p, 1.0).unwrap();
        assert!(kernel_ft(&g, 0.0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn scaling_law() {
        let p = GeometryParams::new(8, 2.0, 3.0).unwrap();
        for kind in [KernelKind::G, KernelKind::F] {
            let unit = RadialKernelProfile::new(kind, &p, 1.0).unwrap();
            for &h in &[1e-3, 0.1, 1.0] {
                let scaled = RadialKernelProfile::new(kind, &p, h).unwrap();
                for &z in &[0.1, 1.0, 10.0] {
                    let a = kernel_ft(&scaled, z).unwrap();
                    let b = kernel_ft(&unit, h * z).unwrap();
                    assert_relative_eq!(a, b, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn small_h_signs_follow_the_constants() {
        let p = GeometryParams::new(8, 2.0, 3.0).unwrap();
        let c = asymptotic_constants(&p);
        let g = RadialKernelProfile::new(KernelKind::G, &p, 1e-6).unwrap();
        let f = RadialKernelProfile::new(KernelKind::F, &p, 1e-6).unwrap();
        assert_eq!(kernel_ft(&g, 1.0).unwrap().signum(), c.cg.unwrap().signum());
        assert_eq!(kernel_ft(&f, 1.0).unwrap().signum(), c.cf.signum());
    }

    #[test]
    fn verdict_examples() {
        let v = |n, d, a| family_criterion(&GeometryParams::new(n, d, a).unwrap()).unwrap();
        assert_eq!(v(8, 2.0, 3.0), Verdict::FamiliesExcluded);
        assert_eq!(v(8, 2.0, 4.0), Verdict::MagicDegenerate);
        assert_eq!(v(6, 1.0, 1.0), Verdict::D1Degenerate);
    }

    #[test]
    fn cf_root_is_magic_for_n8_d2() {
        let grid: Vec<f64> = (1..=40).map(|k| 0.25 * k as f64).collect();
        let roots = cf_roots(8, 2.0, &grid).unwrap();
        assert_eq!(roots.len(), 1);
        assert_relative_eq!(roots[0], 4.0, max_relative = 1e-12);
    }

    #[test]
    fn flat_functional_dichotomy() {
        let p = GeometryParams::new(5, 1.0, 1.3).unwrap();
        let c = PerturbationTestFunction::new(Field::constant(2.0)).unwrap();
        let x = [0.3, 0.7, 0.2, 0.0, 0.0];
        assert!(flat_functional_eval(&c, &p, &x).unwrap().normalized.abs() < 1e-9);
        let g = PerturbationTestFunction::new(Field::parse("exp(-y1^2)").unwrap().with_limit(0.0).with_core_radius(7.0)).unwrap();
        assert!(flat_functional_eval(&g, &p, &x).unwrap().normalized.abs() > 1e-6);
    }
}
