//! Second-order matching of the flat-plane density equation
//!
//! `r^{n-d-2} ∫ h |x-y|^{-(n-2)} dy = c₃ (r^α ∫ h^{α/(n-d-2)} |x-y|^{-(d+α)} dy)^{(n-d-2)/α}`
//!
//! at `x = (y₀, r, 0, …)`, the resulting equation `Δh + C h⁻¹|∇h|² = 0`, and
//! the power substitution that turns it into Laplace's equation.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::geometry::{flat_measure, Field, GeometryParams};
use crate::nt_limits::nt_extrapolate;
use crate::potentials::{riesz_potential, sphere_sum, PotentialRequest};
use crate::quad::exp_sinh;
use crate::special::{ledger, ConstantsLedger};

/// Positive `C²` density on `R^d` with symbolic derivatives.
#[derive(Debug, Clone)]
pub struct SmoothDensity {
    pub h: Expr,
    pub gradient: Vec<Expr>,
    pub hessian: Vec<Vec<Expr>>,
    pub dim: usize,
    /// Value at infinity, reached outside `core_radius`.
    pub limit: f64,
    pub core_radius: f64,
    pub lower: f64,
    pub upper: f64,
    /// Hölder exponent of the second derivatives.
    pub holder: f64,
}

impl SmoothDensity {
    pub fn new(h: Expr, dim: usize, limit: f64, core_radius: f64, bounds: (f64, f64)) -> Result<Self> {
        if h.arity() > dim {
            return Err(invalid("h", format!("expression uses {} variables but d = {dim}", h.arity())));
        }
        if !(bounds.0 > 0.0 && bounds.0 <= bounds.1 && bounds.1.is_finite()) {
            return Err(invalid("bounds", "need 0 < lower <= upper < ∞"));
        }
        if !(limit >= bounds.0 && limit <= bounds.1) {
            return Err(invalid("limit", "value at infinity lies outside the bounds"));
        }
        let gradient: Vec<Expr> = (0..dim).map(|i| h.diff(i)).collect();
        let hessian = gradient.iter().map(|g| (0..dim).map(|j| g.diff(j)).collect()).collect();
        Ok(SmoothDensity {
            h,
            gradient,
            hessian,
            dim,
            limit,
            core_radius,
            lower: bounds.0,
            upper: bounds.1,
            holder: 1.0,
        })
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.h.eval(y)
    }

    pub fn grad(&self, y: &[f64]) -> Vec<f64> {
        self.gradient.iter().map(|g| g.eval(y)).collect()
    }

    pub fn hess(&self, y: &[f64]) -> Vec<Vec<f64>> {
        self.hessian.iter().map(|row| row.iter().map(|e| e.eval(y)).collect()).collect()
    }

    pub fn laplacian(&self, y: &[f64]) -> f64 {
        (0..self.dim).map(|i| self.hessian[i][i].eval(y)).sum()
    }

    /// Largest gap between the symbolic derivatives and central differences.
    pub fn self_consistency(&self, y: &[f64]) -> f64 {
        let step = 1e-4;
        let mut worst: f64 = 0.0;
        let mut yp = y.to_vec();
        let g = self.grad(y);
        let hs = self.hess(y);
        for i in 0..self.dim {
            yp[i] = y[i] + step;
            let fp = self.value(&yp);
            let gp = self.grad(&yp);
            yp[i] = y[i] - step;
            let fm = self.value(&yp);
            let gm = self.grad(&yp);
            yp[i] = y[i];
            worst = worst.max(((fp - fm) / (2.0 * step) - g[i]).abs());
            for j in 0..self.dim {
                worst = worst.max(((gp[j] - gm[j]) / (2.0 * step) - hs[i][j]).abs());
            }
        }
        worst
    }

    /// Checks `lower ≤ h ≤ upper` at the given points.
    pub fn check_bounds(&self, points: &[Vec<f64>]) -> Result<()> {
        for p in points {
            let v = self.value(p);
            if !(v >= self.lower && v <= self.upper) {
                return Err(invalid("h", format!("value {v} at {p:?} escapes the bounds")));
            }
        }
        Ok(())
    }

    fn field(&self) -> Field {
        Field::new(self.h.clone()).with_limit(self.limit).with_core_radius(self.core_radius)
    }

    fn power_field(&self, q: f64) -> Field {
        Field::new(self.h.powf(q)).with_limit(self.limit.powf(q)).with_core_radius(self.core_radius)
    }
}

fn check_hypotheses(params: &GeometryParams, h: &SmoothDensity) -> Result<()> {
    if !(params.alpha() > 2.0) {
        return Err(invalid("alpha", "the reduction needs α > 2"));
    }
    if !(params.n() as f64 - params.d() > 4.0) {
        return Err(invalid("n", "the reduction needs n - d > 4"));
    }
    if params.d() != h.dim as f64 {
        return Err(invalid("d", "density dimension differs from the geometry"));
    }
    Ok(())
}

/// Both sides of the flat density equation at `x = (y₀, r, 0, …)`.
pub fn fsolution_sides(h: &SmoothDensity, params: &GeometryParams, y0: &[f64], r: f64) -> Result<(f64, f64)> {
    check_hypotheses(params, h)?;
    if !(r > 0.0) {
        return Err(Error::OutsideValidity("r must be positive".into()));
    }
    let n = params.n();
    let d = h.dim;
    let a = params.alpha();
    let m = params.magic_alpha();
    let c3 = ledger(params).c3.unwrap();
    let truncation = h.core_radius + 1.0;
    let hm = flat_measure(d, n, h.field(), truncation, truncation / 4.0)?;
    let qm = flat_measure(d, n, h.power_field(a / m), truncation, truncation / 4.0)?;
    let mut x = vec![0.0; n];
    x[..d].copy_from_slice(y0);
    x[d] = r;
    let lhs = r.powf(m) * riesz_potential(&hm, PotentialRequest::new(n as f64 - 2.0), &x)?;
    let inner = r.powf(a) * riesz_potential(&qm, PotentialRequest::new(d as f64 + a), &x)?;
    Ok((lhs, c3 * inner.powf(m / a)))
}

/// `Δh + C h⁻¹|∇h|²` with `C = -(1 - 2/(n-d-2))`.
pub fn pde_gradient_coefficient(params: &GeometryParams) -> f64 {
    -(1.0 - 2.0 / params.magic_alpha())
}

/// Gradient coefficient as it appears when the Taylor quadratic form omits
/// the factor ½: `-(½ - 1/(n-d-2))`.
pub fn pde_gradient_coefficient_unhalved(params: &GeometryParams) -> f64 {
    -(0.5 - 1.0 / params.magic_alpha())
}

pub fn pde_residual_with(h: &SmoothDensity, c: f64, y0: &[f64]) -> f64 {
    let g = h.grad(y0);
    let g2: f64 = g.iter().map(|v| v * v).sum();
    h.laplacian(y0) + c * g2 / h.value(y0)
}

pub fn pde_residual(h: &SmoothDensity, params: &GeometryParams, y0: &[f64]) -> f64 {
    pde_residual_with(h, pde_gradient_coefficient(params), y0)
}

/// `g = h^{C+1}` (or `log h` when `C = -1`) with
/// `Δg = multiplier(y) · (Δh + C h⁻¹|∇h|²)` and `multiplier > 0` when `C > -1`.
#[derive(Debug, Clone)]
pub struct Harmonized {
    pub g: Expr,
    pub c: f64,
    h: Expr,
}

impl Harmonized {
    pub fn multiplier(&self, y: &[f64]) -> f64 {
        let hv = self.h.eval(y);
        if self.c == -1.0 {
            1.0 / hv
        } else {
            let b = self.c + 1.0;
            b * hv.powf(b - 1.0)
        }
    }
}

pub fn harmonize(h: &SmoothDensity, c: f64) -> Harmonized {
    let g = if c == -1.0 { h.h.ln() } else { h.h.powf(c + 1.0) };
    Harmonized { g, c, h: h.h.clone() }
}

/// Inverse of [`harmonize`]: `h = g^{1/(C+1)}`, or `e^g` when `C = -1`.
pub fn unharmonize(g: &Expr, c: f64) -> Expr {
    if c == -1.0 {
        g.exp()
    } else {
        g.powf(1.0 / (c + 1.0))
    }
}

/// `M_ij = ∫_{R^d} z_i z_j (1+|z|²)^{-p/2} dz` as a product of a numerical
/// radial integral and a numerical angular average.
pub fn quadratic_form_oracle(d: usize, p: f64) -> Result<Vec<Vec<f64>>> {
    if !(p > d as f64 + 2.0) {
        return Err(invalid("p", "second moments need p > d + 2"));
    }
    let radial = exp_sinh(|s| s.powf(d as f64 + 1.0) * (1.0 + s * s).powf(-0.5 * p), 1e-15).value;
    let centre = vec![0.0; d];
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            m[i][j] = radial * sphere_sum(d, &centre, 1.0, &mut |t| t[i] * t[j]);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R2Report {
    pub numeric: f64,
    /// `(1/(2d)) [c̃₁Δh - (c₁/c₂) c̃₂ (Δh + (q-1) h⁻¹|∇h|²)]`, `q = α/(n-d-2)`.
    pub predicted: f64,
    /// Same coefficient assembled from the brute-force moment matrices.
    pub oracle_predicted: f64,
    /// `|numeric - predicted|` over the summed magnitudes of the predicted
    /// contributions.
    pub rel_err: f64,
    pub fit_residual: f64,
    pub ill_conditioned: bool,
}

fn quad_form(m: &[Vec<f64>], a: &[Vec<f64>]) -> f64 {
    m.iter().zip(a).map(|(mr, ar)| mr.iter().zip(ar).map(|(u, v)| u * v).sum::<f64>()).sum()
}

/// Predicted `r²` coefficient of `lhs - rhs` from the closed-form constants.
pub fn predicted_r2(h: &SmoothDensity, params: &GeometryParams, y0: &[f64]) -> Result<f64> {
    Ok(predicted_terms(h, params, y0)?.iter().sum())
}

/// The three contributions `c̃₁Δh`, `-(c₁/c₂)c̃₂Δh` and the gradient term,
/// each divided by `2d`.
fn predicted_terms(h: &SmoothDensity, params: &GeometryParams, y0: &[f64]) -> Result<[f64; 3]> {
    check_hypotheses(params, h)?;
    let l = ledger(params);
    let (t1, t2) = (l.c1_tilde.unwrap(), l.c2_tilde.unwrap());
    let ratio = ConstantsLedger::c1_over_c2(params);
    let q = params.alpha() / params.magic_alpha();
    let lap = h.laplacian(y0);
    let g2: f64 = h.grad(y0).iter().map(|v| v * v).sum();
    let hv = h.value(y0);
    let k = 2.0 * h.dim as f64;
    Ok([t1 * lap / k, -ratio * t2 * lap / k, -ratio * t2 * (q - 1.0) * g2 / hv / k])
}

fn oracle_r2(h: &SmoothDensity, params: &GeometryParams, y0: &[f64]) -> Result<f64> {
    let d = h.dim;
    let n = params.n() as f64;
    let a = params.alpha();
    let m1 = quadratic_form_oracle(d, n - 2.0)?;
    let m2 = quadratic_form_oracle(d, d as f64 + a)?;
    let hess = h.hess(y0);
    let half: Vec<Vec<f64>> = hess.iter().map(|r| r.iter().map(|v| 0.5 * v).collect()).collect();
    let g = h.grad(y0);
    let outer: Vec<Vec<f64>> = g.iter().map(|u| g.iter().map(|v| u * v).collect()).collect();
    let q = a / params.magic_alpha();
    let hv = h.value(y0);
    let ratio = ConstantsLedger::c1_over_c2(params);
    let rhs = quad_form(&m2, &half) + 0.5 * (q - 1.0) / hv * quad_form(&m2, &outer);
    Ok(quad_form(&m1, &half) - ratio * rhs)
}

/// Fits `(lhs - rhs)/r² = A + B r + C r²` over `radii` and compares `A`
/// with the predicted coefficient.
pub fn r2_coefficient(h: &SmoothDensity, params: &GeometryParams, y0: &[f64], radii: &[f64]) -> Result<R2Report> {
    let terms = predicted_terms(h, params, y0)?;
    let predicted: f64 = terms.iter().sum();
    let oracle_predicted = oracle_r2(h, params, y0)?;
    let mut values = Vec::with_capacity(radii.len());
    for &r in radii {
        let (lhs, rhs) = fsolution_sides(h, params, y0, r)?;
        values.push((r, (lhs - rhs) / (r * r)));
    }
    let fit = nt_extrapolate(&values)?;
    let scale = terms.iter().map(|t| t.abs()).sum::<f64>();
    let rel_err = if scale > 0.0 {
        (fit.limit - predicted).abs() / scale
    } else {
        fit.limit.abs()
    };
    Ok(R2Report {
        numeric: fit.limit,
        predicted,
        oracle_predicted,
        rel_err,
        fit_residual: fit.fit_residual,
        ill_conditioned: fit.low_confidence,
    })
}

/// `(c̃₁/c̃₂)(c₂/c₁)`, equal to `(α-2)/(n-d-4)`.
pub fn ledger_ratio(params: &GeometryParams) -> Option<f64> {
    let l = ledger(params);
    Some(l.c1_tilde? / l.c2_tilde? * l.c2? / l.c1?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn harmonic_power(params: &GeometryParams) -> SmoothDensity {
        let c = pde_gradient_coefficient(params);
        let g = Expr::parse("2 + y1*exp(-(y1^2+y2^2)/4)").unwrap();
        SmoothDensity::new(unharmonize(&g, c), 2, 2f64.powf(1.0 / (c + 1.0)), 12.0, (0.1, 10.0)).unwrap()
    }

    #[test]
    fn constant_density_balances() {
        let p = GeometryParams::new(8, 2.0, 3.0).unwrap();
        let h = SmoothDensity::new(Expr::constant(1.5), 2, 1.5, 0.0, (1.0, 2.0)).unwrap();
        let c1 = ledger(&p).c1.unwrap();
        for &r in &[0.1, 0.5] {
            let (l, rr) = fsolution_sides(&h, &p, &[0.2, 0.1], r).unwrap();
            assert_relative_eq!(l, 1.5 * c1, max_relative = 1e-10);
            assert_relative_eq!(rr, 1.5 * c1, max_relative = 1e-10);
        }
        assert_eq!(predicted_r2(&h, &p, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn hypotheses_enforced() {
        let h = SmoothDensity::new(Expr::constant(1.0), 1, 1.0, 0.0, (0.5, 2.0)).unwrap();
        assert!(fsolution_sides(&h, &GeometryParams::new(6, 1.0, 1.5).unwrap(), &[0.0], 0.1).is_err());
        assert!(fsolution_sides(&h, &GeometryParams::new(5, 1.0, 3.0).unwrap(), &[0.0], 0.1).is_err());
    }

    #[test]
    fn moment_oracle_reduces_by_one_over_d() {
        for &(d, p) in &[(1usize, 6.0), (2, 6.0), (2, 5.0), (3, 9.0)] {
            let m = quadratic_form_oracle(d, p).unwrap();
            let closed = crate::special::sphere_area_real(d as f64)
                * crate::oracle::radial_moment(d as f64 + 1.0, p).unwrap()
                / d as f64;
            for i in 0..d {
                assert_relative_eq!(m[i][i], closed, max_relative = 1e-12);
                for j in 0..d {
                    if i != j {
                        assert!(m[i][j].abs() < 1e-14 * closed);
                    }
                }
            }
        }
    }

    #[test]
    fn harmonic_power_family_has_zero_residual() {
        let p = GeometryParams::new(8, 2.0, 3.0).unwrap();
        let c = pde_gradient_coefficient(&p);
        let g = Expr::parse("2 + y1").unwrap();
        let h = SmoothDensity::new(unharmonize(&g, c), 2, 2.0, 0.0, (1e-3, 1e3)).unwrap();
        for y in [[0.0, 0.0], [0.7, -0.3], [-1.2, 2.0]] {
            assert!(pde_residual(&h, &p, &y).abs() < 1e-12);
            assert!(predicted_r2(&h, &p, &y).unwrap().abs() < 1e-12);
        }
        let bounded = harmonic_power(&p);
        assert!(pde_residual(&bounded, &p, &[0.0, 0.0]).abs() < 1e-12);
        assert!(pde_residual(&bounded, &p, &[0.7, -0.3]).abs() > 1e-3);
    }

    #[test]
    fn harmonize_round_trip() {
        let g = Expr::parse("2 + y1").unwrap();
        for c in [-1.0, -0.25, -0.5] {
            let h = SmoothDensity::new(unharmonize(&g, c), 1, 2.0, 0.0, (1e-3, 1e3)).unwrap();
            let back = harmonize(&h, c);
            for y in [-0.5, 0.0, 1.5] {
                assert_relative_eq!(back.g.eval(&[y]), 2.0 + y, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn harmonize_laplacian_is_a_positive_multiple_of_the_residual() {
        let h = SmoothDensity::new(Expr::parse("1 + 0.5*exp(-y1^2-y2^2)").unwrap(), 2, 1.0, 8.0, (1.0, 1.5)).unwrap();
        let c = -0.5;
        let hz = harmonize(&h, c);
        let g = SmoothDensity::new(hz.g.clone(), 2, 1.0, 8.0, (0.5, 2.0)).unwrap();
        for y in [[0.3, 0.1], [1.0, -0.8], [0.0, 0.0]] {
            let res = pde_residual_with(&h, c, &y);
            assert_relative_eq!(g.laplacian(&y), hz.multiplier(&y) * res, max_relative = 1e-10);
            assert!(hz.multiplier(&y) > 0.0);
        }
    }

    #[test]
    fn symbolic_derivatives_are_consistent() {
        let h = SmoothDensity::new(Expr::parse("1 + 0.5*exp(-y1^2-y2^2)*cos(y1)").unwrap(), 2, 1.0, 8.0, (0.4, 1.6)).unwrap();
        assert!(h.self_consistency(&[0.3, -0.2]) < 1e-6);
    }

    #[test]
    fn ratio_identity() {
        for &(n, d, a) in &[(8, 2.0, 3.0), (9, 3.0, 2.5), (7, 1.0, 5.0)] {
            let p = GeometryParams::new(n, d, a).unwrap();
            assert_relative_eq!(ledger_ratio(&p).unwrap(), (a - 2.0) / (n as f64 - d - 4.0), max_relative = 1e-12);
        }
    }
}
