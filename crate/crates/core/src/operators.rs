//! Finite-difference Laplacian, the operator `L = -div(D^{d+1-n} ∇·)` applied
//! to the smooth distance, and the pointwise identity `ΔD^γ + γ·L D = 0`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{distance_to_support, DiscreteMeasure, GeometryParams};
use crate::potentials::{riesz_unchecked, PotentialRequest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdStencil {
    pub h: f64,
    /// Consistency order of the central stencil, 2 or 4.
    pub order: u32,
    /// Number of Richardson extrapolation steps (0 for the plain stencil).
    pub richardson_levels: u32,
}

impl FdStencil {
    pub fn new(h: f64, order: u32, richardson_levels: u32) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("h", "step must be positive"));
        }
        if order != 2 && order != 4 {
            return Err(invalid("order", "stencil order must be 2 or 4"));
        }
        if richardson_levels > 4 {
            return Err(invalid("richardson_levels", "at most 4 extrapolation steps"));
        }
        Ok(FdStencil {
            h,
            order,
            richardson_levels,
        })
    }

    /// Order 2, `h = δ/20`, two extrapolation steps.
    pub fn default_for(delta: f64) -> Self {
        FdStencil {
            h: delta / 20.0,
            order: 2,
            richardson_levels: 2,
        }
    }

    /// Rejects stencils reaching closer than `δ/10` of the support scale.
    pub fn validate(&self, delta: f64) -> Result<()> {
        if self.h > delta / 10.0 {
            return Err(invalid(
                "h",
                format!("step {} exceeds a tenth of the distance {delta} to the support", self.h),
            ));
        }
        Ok(())
    }
}

/// Finite-difference value with the difference between the two most refined
/// estimates as error indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdValue {
    pub value: f64,
    pub error: f64,
}

fn second_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64, order: u32, f0: f64) -> f64 {
    let mut y = x.to_vec();
    let mut s = 0.0;
    for i in 0..x.len() {
        let xi = x[i];
        y[i] = xi + h;
        let p1 = f(&y);
        y[i] = xi - h;
        let m1 = f(&y);
        if order == 2 {
            s += (p1 - 2.0 * f0 + m1) / (h * h);
        } else {
            y[i] = xi + 2.0 * h;
            let p2 = f(&y);
            y[i] = xi - 2.0 * h;
            let m2 = f(&y);
            s += (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
        }
        y[i] = xi;
    }
    s
}

fn first_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64, order: u32) -> Vec<f64> {
    let mut y = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let xi = x[i];
        y[i] = xi + h;
        let p1 = f(&y);
        y[i] = xi - h;
        let m1 = f(&y);
        g[i] = if order == 2 {
            (p1 - m1) / (2.0 * h)
        } else {
            y[i] = xi + 2.0 * h;
            let p2 = f(&y);
            y[i] = xi - 2.0 * h;
            let m2 = f(&y);
            (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
        };
        y[i] = xi;
    }
    g
}

/// Richardson tableau over step sizes `h, h/2, …` for a stencil whose error
/// expands in even powers starting at `h^order`. Returns the most refined
/// entry and its distance to the previous diagonal entry.
fn richardson(levels: &[Vec<f64>], order: u32) -> (Vec<f64>, f64) {
    let mut table: Vec<Vec<f64>> = levels.to_vec();
    let mut last_diff = 0.0;
    if table.len() == 1 {
        return (table.pop().unwrap(), 0.0);
    }
    let mut power = order as i32;
    while table.len() > 1 {
        let factor = 2f64.powi(power);
        let next: Vec<Vec<f64>> = table
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(fine, coarse)| fine + (fine - coarse) / (factor - 1.0)).collect())
            .collect();
        last_diff = table
            .last()
            .unwrap()
            .iter()
            .zip(next.last().unwrap())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        table = next;
        power += 2;
    }
    (table.pop().unwrap(), last_diff)
}

fn step_ladder(stencil: &FdStencil) -> Vec<f64> {
    let count = stencil.richardson_levels.max(1) + 1;
    (0..count).map(|k| stencil.h / 2f64.powi(k as i32)).collect()
}

/// Laplacian of `f` at `x` by central differences with Richardson
/// extrapolation.
pub fn fd_laplacian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], stencil: &FdStencil) -> FdValue {
    let f0 = f(x);
    let hs = step_ladder(stencil);
    let levels: Vec<Vec<f64>> = hs.iter().map(|&h| vec![second_difference(f, x, h, stencil.order, f0)]).collect();
    if stencil.richardson_levels == 0 {
        return FdValue {
            value: levels[0][0],
            error: (levels[0][0] - levels[1][0]).abs(),
        };
    }
    let (v, e) = richardson(&levels, stencil.order);
    FdValue { value: v[0], error: e }
}

/// Gradient of `f` at `x` with the same extrapolation scheme.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], stencil: &FdStencil) -> (Vec<f64>, f64) {
    let hs = step_ladder(stencil);
    let levels: Vec<Vec<f64>> = hs.iter().map(|&h| first_difference(f, x, h, stencil.order)).collect();
    if stencil.richardson_levels == 0 {
        let e = levels[0].iter().zip(&levels[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        return (levels[0].clone(), e);
    }
    richardson(&levels, stencil.order)
}

fn potential_field<'a>(measure: &'a DiscreteMeasure, params: &'a GeometryParams) -> impl Fn(&[f64]) -> f64 + 'a {
    let p = params.d() + params.alpha();
    move |y: &[f64]| riesz_unchecked(measure, PotentialRequest::new(p), y)
}

fn check(measure: &DiscreteMeasure, params: &GeometryParams, x: &[f64], stencil: &FdStencil) -> Result<f64> {
    if params.n() != measure.ambient_dim() {
        return Err(invalid("n", "geometry and measure disagree on the ambient dimension"));
    }
    let delta = distance_to_support(measure, x)?;
    stencil.validate(delta)?;
    Ok(delta)
}

/// Everything needed for the operator and the identity at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorSample {
    pub delta: f64,
    pub d_value: f64,
    pub grad_norm_sq: f64,
    pub lap_d: FdValue,
    pub lap_d_gamma: FdValue,
    /// `L D = -D^{γ-1} [ΔD + (γ-1) D^{-1} |∇D|²]`.
    pub l_d: f64,
    /// Local magnitude `D^{γ-2} |∇D|²`.
    pub local_scale: f64,
}

pub fn operator_sample(measure: &DiscreteMeasure, params: &GeometryParams, x: &[f64], stencil: &FdStencil) -> Result<OperatorSample> {
    let delta = check(measure, params, x, stencil)?;
    let a = params.alpha();
    let g = params.gamma();
    let pot = potential_field(measure, params);
    let dist = |y: &[f64]| pot(y).powf(-1.0 / a);
    let dgam = |y: &[f64]| pot(y).powf(-g / a);
    let d_value = dist(x);
    let lap_d = fd_laplacian(&dist, x, stencil);
    let (grad, _) = fd_gradient(&dist, x, stencil);
    let grad_norm_sq: f64 = grad.iter().map(|v| v * v).sum();
    let lap_d_gamma = fd_laplacian(&dgam, x, stencil);
    let l_d = -d_value.powf(g - 1.0) * (lap_d.value + (g - 1.0) * grad_norm_sq / d_value);
    Ok(OperatorSample {
        delta,
        d_value,
        grad_norm_sq,
        lap_d,
        lap_d_gamma,
        l_d,
        local_scale: d_value.powf(g - 2.0) * grad_norm_sq,
    })
}

/// `L D` at `x` from finite differences of `D`.
pub fn apply_l(measure: &DiscreteMeasure, params: &GeometryParams, x: &[f64], stencil: &FdStencil) -> Result<f64> {
    Ok(operator_sample(measure, params, x, stencil)?.l_d)
}

/// `L D` from the conservative stencil
/// `-Σ_i [A_{i+½}(D_{i+1} - D_i) - A_{i-½}(D_i - D_{i-1})] / h²`, `A = D^{γ-1}`.
pub fn apply_l_divergence(measure: &DiscreteMeasure, params: &GeometryParams, x: &[f64], h: f64) -> Result<f64> {
    let delta = distance_to_support(measure, x)?;
    if h > delta / 10.0 {
        return Err(invalid("h", "step exceeds a tenth of the distance to the support"));
    }
    let a = params.alpha();
    let g = params.gamma();
    let pot = potential_field(measure, params);
    let dist = |y: &[f64]| pot(y).powf(-1.0 / a);
    let d0 = dist(x);
    let mut y = x.to_vec();
    let mut s = 0.0;
    for i in 0..x.len() {
        let xi = x[i];
        y[i] = xi + h;
        let dp = dist(&y);
        y[i] = xi - h;
        let dm = dist(&y);
        y[i] = xi + 0.5 * h;
        let ap = dist(&y).powf(g - 1.0);
        y[i] = xi - 0.5 * h;
        let am = dist(&y).powf(g - 1.0);
        y[i] = xi;
        s += ap * (dp - d0) - am * (d0 - dm);
    }
    Ok(-s / (h * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lap_d_gamma: f64,
    pub l_d: f64,
    /// `|ΔD^γ + γ L D| / (|ΔD^γ| + |γ L D| + |γ| D^{γ-2}|∇D|²)`.
    pub residual: f64,
    pub local_scale: f64,
}

pub fn identity_check(measure: &DiscreteMeasure, params: &GeometryParams, x: &[f64], stencil: &FdStencil) -> Result<IdentityReport> {
    let s = operator_sample(measure, params, x, stencil)?;
    let g = params.gamma();
    let num = (s.lap_d_gamma.value + g * s.l_d).abs();
    let den = s.lap_d_gamma.value.abs() + (g * s.l_d).abs() + g.abs() * s.local_scale;
    Ok(IdentityReport {
        lap_d_gamma: s.lap_d_gamma.value,
        l_d: s.l_d,
        residual: num / den,
        local_scale: s.local_scale,
    })
}

/// `|ΔD^γ|` relative to the local scale under successive halving of a plain
/// order-2 stencil, with the observed convergence order between levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub steps: Vec<f64>,
    pub normalized: Vec<f64>,
    pub orders: Vec<f64>,
}

pub fn magic_refinement(measure: &DiscreteMeasure, params: &GeometryParams, x: &[f64], h0: f64, levels: usize) -> Result<RefinementStudy> {
    let delta = distance_to_support(measure, x)?;
    if h0 > delta / 10.0 {
        return Err(invalid("h", "initial step exceeds a tenth of the distance to the support"));
    }
    let a = params.alpha();
    let g = params.gamma();
    let pot = potential_field(measure, params);
    let dgam = |y: &[f64]| pot(y).powf(-g / a);
    let dist = |y: &[f64]| pot(y).powf(-1.0 / a);
    let fine = FdStencil::new(h0 / 8.0, 4, 2)?;
    let (grad, _) = fd_gradient(&dist, x, &fine);
    let d0 = dist(x);
    let scale = d0.powf(g - 2.0) * grad.iter().map(|v| v * v).sum::<f64>();
    let f0 = dgam(x);
    let mut steps = Vec::with_capacity(levels);
    let mut normalized = Vec::with_capacity(levels);
    for k in 0..levels {
        let h = h0 / 2f64.powi(k as i32);
        steps.push(h);
        normalized.push(second_difference(&dgam, x, h, 2, f0).abs() / scale);
    }
    let orders = normalized.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(RefinementStudy {
        steps,
        normalized,
        orders,
    })
}

/// Range of `δ^{n-d-1} D^{-n+d+1}`, the normalized ellipticity weight.
pub fn ellipticity_check(measure: &DiscreteMeasure, params: &GeometryParams, points: &[Vec<f64>]) -> Result<(f64, f64)> {
    let e = params.n() as f64 - params.d() - 1.0;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for x in points {
        let delta = distance_to_support(measure, x)?;
        let dval = crate::potentials::smooth_distance(measure, params, x)?;
        let r = (delta / dval).powf(e);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{flat_measure, Field};
    use approx::assert_relative_eq;

    #[test]
    fn laplacian_of_quadratic_and_fundamental_solution() {
        let st = FdStencil::new(1e-2, 2, 2).unwrap();
        let q = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>();
        let v = fd_laplacian(&q, &[0.3, -0.2, 1.0, 0.5], &st);
        assert!((v.value - 8.0).abs() < 1e-8);
        let fund = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>().powf(-1.0);
        let v = fd_laplacian(&fund, &[0.3, -0.2, 1.0, 0.5], &st);
        assert!(v.value.abs() < 1e-7);
    }

    #[test]
    fn stencil_validation() {
        assert!(FdStencil::new(0.1, 3, 0).is_err());
        assert!(FdStencil::new(0.2, 2, 0).unwrap().validate(1.0).is_err());
        assert!(FdStencil::default_for(1.0).validate(1.0).is_ok());
    }

    #[test]
    fn flat_plane_solves_the_equation() {
        let p = GeometryParams::new(5, 1.0, 0.7).unwrap();
        let m = flat_measure(1, 5, Field::constant(1.0), 4.0, 0.1).unwrap();
        let x = [0.2, 0.5, 0.3, 0.0, -0.4];
        let st = FdStencil::default_for(crate::geometry::norm(&x[1..]));
        let s = operator_sample(&m, &p, &x, &st).unwrap();
        assert!(s.l_d.abs() < 1e-8 * s.local_scale);
        let coarse = apply_l_divergence(&m, &p, &x, st.h).unwrap() / s.local_scale;
        let fine = apply_l_divergence(&m, &p, &x, st.h / 2.0).unwrap() / s.local_scale;
        assert!(coarse.abs() < 1e-2);
        assert_relative_eq!(coarse / fine, 4.0, max_relative = 0.05);
        let (lo, hi) = ellipticity_check(&m, &p, &[x.to_vec()]).unwrap();
        let c2 = crate::special::ledger(&p).c2.unwrap();
        assert_relative_eq!(lo, c2.powf(3.0 / 0.7), max_relative = 1e-8);
        assert_relative_eq!(hi, lo);
    }
}
