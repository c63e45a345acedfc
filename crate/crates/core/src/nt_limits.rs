//! Boundary values of potentials along non-tangential cones.
//!
//! For a density point `y₀` of a planar measure, `δ(x)^β ∫ |x-y|^{-d-β} dμ(y)`
//! tends to `c(d, β) f(y₀)` as `x → y₀` inside any cone
//! `{x : dist(x, E) ≥ η |x - y₀|}`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{distance_to_support, dist, norm, DiscreteMeasure, Field, GeometryParams, SupportKind};
use crate::potentials::{riesz_unchecked, PotentialRequest};
use crate::special::{flat_kernel_mass, ledger};

/// Cone of aperture `eta` at the support point `y0`. Samples are taken along
/// the steepest admissible direction `η·normal + √(1-η²)·tangent`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeSpec {
    pub y0: Vec<f64>,
    pub normal: Vec<f64>,
    pub tangent: Vec<f64>,
    pub eta: f64,
    pub radius: f64,
    pub radii: Vec<f64>,
}

impl ConeSpec {
    pub fn new(y0: Vec<f64>, normal: Vec<f64>, tangent: Vec<f64>, eta: f64, radius: f64, radii: Vec<f64>) -> Result<Self> {
        if normal.len() != y0.len() || tangent.len() != y0.len() {
            return Err(invalid("normal", "cone vectors must live in the ambient space"));
        }
        if (norm(&normal) - 1.0).abs() > 1e-12 || (norm(&tangent) - 1.0).abs() > 1e-12 {
            return Err(invalid("normal", "normal and tangent must be unit vectors"));
        }
        if normal.iter().zip(&tangent).map(|(a, b)| a * b).sum::<f64>().abs() > 1e-12 {
            return Err(invalid("tangent", "tangent must be orthogonal to the normal"));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(invalid("eta", "aperture must lie in (0, 1]"));
        }
        if radii.iter().any(|&r| !(r > 0.0 && r < radius)) {
            return Err(invalid("radii", "radii must lie in (0, R)"));
        }
        if radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("radii", "radii must be strictly decreasing"));
        }
        Ok(ConeSpec {
            y0,
            normal,
            tangent,
            eta,
            radius,
            radii,
        })
    }

    /// Unit direction making angle `asin(η)` with the tangent plane.
    pub fn direction(&self) -> Vec<f64> {
        let t = (1.0 - self.eta * self.eta).max(0.0).sqrt();
        self.normal.iter().zip(&self.tangent).map(|(n, s)| self.eta * n + t * s).collect()
    }
}

/// Default radii `scale · 2^{-k}` for `k = 4..=10`.
pub fn default_radii(scale: f64) -> Vec<f64> {
    (4..=10).map(|k| scale * 0.5f64.powi(k)).collect()
}

/// Points `y₀ + r v`, each verified to satisfy `dist(x, E) ≥ η |x - y₀|`.
pub fn samples_along(measure: &DiscreteMeasure, y0: &[f64], v: &[f64], eta: f64, radii: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let x: Vec<f64> = y0.iter().zip(v).map(|(a, b)| a + r * b).collect();
        let delta = match distance_to_support(measure, &x) {
            Ok(dl) => dl,
            Err(Error::OutsideValidity(_)) => 0.0,
            Err(e) => return Err(e),
        };
        if delta < eta * dist(&x, y0) * (1.0 - 1e-12) {
            return Err(Error::OutsideValidity(format!(
                "point at radius {r} leaves the cone: distance {delta:e} below {eta} × {:e}",
                dist(&x, y0)
            )));
        }
        out.push(x);
    }
    Ok(out)
}

pub fn cone_samples(measure: &DiscreteMeasure, spec: &ConeSpec) -> Result<Vec<Vec<f64>>> {
    samples_along(measure, &spec.y0, &spec.direction(), spec.eta, &spec.radii)
}

/// Least-squares fit `F(r) = L + a r + b r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NtFit {
    pub limit: f64,
    pub slope: f64,
    pub curvature: f64,
    /// Root-mean-square residual of the fit.
    pub fit_residual: f64,
    /// Set when the data oscillate by more than the fit can explain.
    pub low_confidence: bool,
}

pub fn nt_extrapolate(values: &[(f64, f64)]) -> Result<NtFit> {
    if values.len() < 4 {
        return Err(invalid("values", "extrapolation needs at least four radii"));
    }
    if values.iter().any(|&(r, f)| !(r > 0.0) || !f.is_finite()) {
        return Err(invalid("values", "radii must be positive and values finite"));
    }
    let scale = values.iter().map(|v| v.0).fold(0.0, f64::max);
    // Normal equations in the scaled variable r / scale.
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &(r, f) in values {
        let t = r / scale;
        let row = [1.0, t, t * t];
        for i in 0..3 {
            atb[i] += row[i] * f;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let coef = solve3(ata, atb).ok_or_else(|| Error::Numerical("radii do not determine a quadratic fit".into()))?;
    let mut ss = 0.0;
    let mut max_res: f64 = 0.0;
    for &(r, f) in values {
        let t = r / scale;
        let res = f - (coef[0] + coef[1] * t + coef[2] * t * t);
        ss += res * res;
        max_res = max_res.max(res.abs());
    }
    let rms = (ss / values.len() as f64).sqrt();
    let mut sorted: Vec<(f64, f64)> = values.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let diffs: Vec<f64> = sorted.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let monotone = diffs.iter().all(|&v| v >= 0.0) || diffs.iter().all(|&v| v <= 0.0);
    let noise_floor = 1e-9 * coef[0].abs().max(f64::MIN_POSITIVE);
    Ok(NtFit {
        limit: coef[0],
        slope: coef[1] / scale,
        curvature: coef[2] / (scale * scale),
        fit_residual: rms,
        low_confidence: !monotone && max_res > noise_floor,
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        a.swap(c, piv);
        b.swap(c, piv);
        if a[c][c].abs() < 1e-300 {
            return None;
        }
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// `C(d, β) = V(S^{d-1}) · ½ Γ(d/2) Γ(β/2) / Γ((d+β)/2)`.
pub fn nt_constant(d: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid("beta", "exponent must be positive"));
    }
    if !(d > 0.0) {
        return Err(invalid("d", "dimension must be positive"));
    }
    Ok(flat_kernel_mass(d, beta))
}

/// Support point, unit normal and unit tangent of a flat or graph measure
/// above the parameter point `y`.
pub fn support_frame(measure: &DiscreteMeasure, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = measure.ambient_dim();
    let d = measure.dim() as usize;
    if !matches!(measure.kind(), SupportKind::FlatPlane | SupportKind::Graph) {
        return Err(invalid("measure", "boundary recovery needs a flat or graph measure"));
    }
    if y.len() != d {
        return Err(invalid("y0", format!("expected {d} parameter coordinates")));
    }
    let mut p = vec![0.0; n];
    measure.embed(y, &mut p);
    // Tangent columns by central differences, orthonormalized.
    let step = 1e-5;
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut yp = y.to_vec();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for j in 0..d {
        yp[j] = y[j] + step;
        measure.embed(&yp, &mut a);
        yp[j] = y[j] - step;
        measure.embed(&yp, &mut b);
        yp[j] = y[j];
        let col: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * step)).collect();
        frame.push(col);
    }
    let mut e = vec![0.0; n];
    e[d] = 1.0;
    frame.push(e);
    for i in 0..frame.len() {
        for j in 0..i {
            let proj: f64 = frame[i].iter().zip(&frame[j]).map(|(u, v)| u * v).sum();
            let prev = frame[j].clone();
            frame[i].iter_mut().zip(&prev).for_each(|(u, v)| *u -= proj * v);
        }
        let len = norm(&frame[i]);
        frame[i].iter_mut().for_each(|u| *u /= len);
    }
    let normal = frame.pop().unwrap();
    Ok((p, normal, frame.swap_remove(0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    pub recovered: f64,
    pub reference: f64,
    pub rel_err: f64,
    pub fit: NtFit,
    /// `(r, δ(x)^β · potential / C(d, β))` along the cone.
    pub trace: Vec<(f64, f64)>,
}

/// Recovers the density at the parameter point `y0` from the boundary
/// behaviour of the order-`d+β` potential inside the cone of aperture `eta`.
pub fn density_recovery(measure: &DiscreteMeasure, y0: &[f64], beta: f64, eta: f64, radii: &[f64]) -> Result<Recovery> {
    let constant = nt_constant(measure.dim(), beta)?;
    let (p, normal, tangent) = support_frame(measure, y0)?;
    let spec = ConeSpec::new(p, normal, tangent, eta, 2.0 * radii.iter().cloned().fold(0.0, f64::max), radii.to_vec())?;
    let points = cone_samples(measure, &spec)?;
    let order = measure.dim() + beta;
    let mut trace = Vec::with_capacity(points.len());
    for (x, &r) in points.iter().zip(radii) {
        let delta = distance_to_support(measure, x)?;
        let pot = riesz_unchecked(measure, PotentialRequest::new(order), x);
        trace.push((r, delta.powf(beta) * pot / constant));
    }
    let fit = nt_extrapolate(&trace)?;
    let reference = measure.density().eval(y0);
    Ok(Recovery {
        recovered: fit.limit,
        reference,
        rel_err: (fit.limit - reference).abs() / reference.abs(),
        fit,
        trace,
    })
}

/// Density `h = (c₂ f)^{(n-d-2)/α} / c₁` paired with `f`.
pub fn paired_density(f: &Field, params: &GeometryParams) -> Field {
    let l = ledger(params);
    let (c1, c2) = (l.c1.unwrap(), l.c2.unwrap());
    let q = params.magic_alpha() / params.alpha();
    let expr = f.expr.scale(c2).powf(q).scale(1.0 / c1);
    Field {
        limit: f.limit.map(|v| (c2 * v).powf(q) / c1),
        core_radius: f.core_radius,
        expr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelationCheck {
    pub h_limit: f64,
    pub f_limit: f64,
    /// `|c₁ h - (c₂ f)^{(n-d-2)/α}| / (c₁ h)`.
    pub residual: f64,
}

/// Recovers `h` with exponent `n-d-2` from `h_measure` and `f` with exponent
/// `α` from `f_measure` at `y0` and checks `c₁ h = (c₂ f)^{(n-d-2)/α}`.
pub fn density_relation_check(
    h_measure: &DiscreteMeasure,
    f_measure: &DiscreteMeasure,
    params: &GeometryParams,
    y0: &[f64],
    eta: f64,
    radii: &[f64],
) -> Result<RelationCheck> {
    let l = ledger(params);
    let (c1, c2) = (l.c1.unwrap(), l.c2.unwrap());
    let m = params.magic_alpha();
    let h = density_recovery(h_measure, y0, m, eta, radii)?.recovered;
    let f = density_recovery(f_measure, y0, params.alpha(), eta, radii)?.recovered;
    let lhs = c1 * h;
    let rhs = (c2 * f).powf(m / params.alpha());
    Ok(RelationCheck {
        h_limit: h,
        f_limit: f,
        residual: (lhs - rhs).abs() / lhs.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::flat_measure;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn extrapolation_examples() {
        let v: Vec<(f64, f64)> = default_radii(1.0).iter().map(|&r| (r, 3.0)).collect();
        let f = nt_extrapolate(&v).unwrap();
        assert_relative_eq!(f.limit, 3.0, max_relative = 1e-14);
        assert!(f.slope.abs() < 1e-10 && f.curvature.abs() < 1e-8);
        let v: Vec<(f64, f64)> = default_radii(1.0).iter().map(|&r| (r, 1.0 + r)).collect();
        let f = nt_extrapolate(&v).unwrap();
        assert_relative_eq!(f.limit, 1.0, max_relative = 1e-12);
        assert_relative_eq!(f.slope, 1.0, max_relative = 1e-9);
        let c1 = 2.0 * PI / 3.0;
        let v: Vec<(f64, f64)> = default_radii(0.16).iter().map(|&r| (r, c1 * (1.0 + r * r.ln()))).collect();
        assert!((nt_extrapolate(&v).unwrap().limit - c1).abs() < 1e-3 * c1);
        assert!(nt_extrapolate(&v[..3]).is_err());
    }

    #[test]
    fn constant_examples() {
        assert_relative_eq!(nt_constant(1.0, 1.0).unwrap(), PI, max_relative = 1e-14);
        assert_relative_eq!(nt_constant(2.0, 2.0).unwrap(), PI, max_relative = 1e-14);
        assert!(nt_constant(1.0, 0.0).is_err());
    }

    #[test]
    fn cone_membership() {
        let m = flat_measure(2, 5, Field::constant(1.0), 4.0, 0.5).unwrap();
        let y0 = vec![0.0; 5];
        let normal = vec![0.0, 0.0, 1.0, 0.0, 0.0];
        let tangent = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let spec = ConeSpec::new(y0.clone(), normal.clone(), tangent.clone(), 1.0, 1.0, vec![0.5, 0.25]).unwrap();
        for x in cone_samples(&m, &spec).unwrap() {
            assert_eq!(x[0], 0.0);
        }
        let spec = ConeSpec::new(y0.clone(), normal, tangent.clone(), 0.5, 1.0, vec![0.5, 0.25]).unwrap();
        let v = spec.direction();
        assert_relative_eq!(v[2], 0.5, max_relative = 1e-15);
        assert!(cone_samples(&m, &spec).is_ok());
        assert!(samples_along(&m, &y0, &tangent, 0.5, &[0.5]).is_err());
    }

    #[test]
    fn constant_density_recovered_at_every_radius() {
        let m = flat_measure(1, 4, Field::constant(1.0), 4.0, 0.5).unwrap();
        let r = density_recovery(&m, &[0.3], 1.0, 0.6, &default_radii(1.0)).unwrap();
        for &(_, v) in &r.trace {
            assert_relative_eq!(v, 1.0, max_relative = 1e-9);
        }
        assert!(r.rel_err < 1e-9);
    }
}
