//! Riesz-type potentials of discrete and planar measures, the smooth distance
//! `D_{α,μ}` and the Newtonian potential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{distance_to_support, norm, raw_distance, DiscreteMeasure, Field, GeometryParams, Shape};
use crate::quad::{adaptive_breaks, exp_sinh, gauss_legendre};
use crate::special::{flat_kernel_mass, ledger, sphere_area_real};

/// Relative tolerance of the planar quadrature.
pub const PLANAR_REL_TOL: f64 = 1e-12;
/// The quadrature ball has radius `TRUNCATION_FACTOR · max(δ, |x₀| + 1)`.
pub const TRUNCATION_FACTOR: f64 = 8.0;

/// A potential `∫ w(y) |x - y|^{-p} dμ(y)` with exponent `p > d`.
#[derive(Debug, Clone, Copy)]
pub struct PotentialRequest<'a> {
    pub exponent: f64,
    pub weight: Option<&'a Field>,
}

impl<'a> PotentialRequest<'a> {
    pub fn new(exponent: f64) -> Self {
        PotentialRequest {
            exponent,
            weight: None,
        }
    }

    pub fn weighted(exponent: f64, weight: &'a Field) -> Self {
        PotentialRequest {
            exponent,
            weight: Some(weight),
        }
    }
}

pub fn riesz_potential(measure: &DiscreteMeasure, req: PotentialRequest<'_>, x: &[f64]) -> Result<f64> {
    if !(req.exponent > measure.d) {
        return Err(invalid(
            "p",
            format!("exponent {} must exceed the dimension {}", req.exponent, measure.d),
        ));
    }
    distance_to_support(measure, x)?;
    Ok(riesz_unchecked(measure, req, x))
}

pub(crate) fn riesz_unchecked(measure: &DiscreteMeasure, req: PotentialRequest<'_>, x: &[f64]) -> f64 {
    match measure.shape {
        Shape::Flat | Shape::Graph { .. } => planar_potential(measure, req, x),
        _ => node_potential(measure, req, x),
    }
}

fn node_potential(measure: &DiscreteMeasure, req: PotentialRequest<'_>, x: &[f64]) -> f64 {
    let n = measure.n;
    let half = -0.5 * req.exponent;
    // Neumaier summation in node order.
    let mut sum = 0.0;
    let mut comp = 0.0;
    for i in 0..measure.len() {
        let p = &measure.positions[i * n..(i + 1) * n];
        let r2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let mut term = measure.weights[i] * r2.powf(half);
        if let Some(w) = req.weight {
            term *= w.eval(p);
        }
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `V(S^{d-1}) ∫_R^∞ ρ^{d-1} (h² + ρ²)^{-p/2} dρ` in closed form.
pub fn flat_tail(d: f64, p: f64, h: f64, r: f64) -> f64 {
    let s = r / h;
    let a = 0.5 * (p - d);
    let b = 0.5 * d;
    let v0 = 1.0 / (1.0 + s * s);
    let full = flat_kernel_mass(d, p - d);
    full * h.powf(d - p) * statrs::function::beta::beta_reg(a, b, v0)
}

/// Integral of `f` over the sphere of radius `rho` about `centre` in `R^d`
/// (`d = 1, 2, 3`), refined until successive rules agree.
pub(crate) fn sphere_sum(d: usize, centre: &[f64], rho: f64, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let mut y = centre.to_vec();
    match d {
        1 => {
            y[0] = centre[0] + rho;
            let a = f(&y);
            y[0] = centre[0] - rho;
            a + f(&y)
        }
        2 => {
            let mut m = 16usize;
            let mut sum = 0.0;
            let mut abs = 0.0;
            for k in 0..m {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                y[0] = centre[0] + rho * t.cos();
                y[1] = centre[1] + rho * t.sin();
                let v = f(&y);
                sum += v;
                abs += v.abs();
            }
            let mut prev = sum * 2.0 * std::f64::consts::PI / m as f64;
            while m < 8192 {
                for k in 0..m {
                    let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
                    y[0] = centre[0] + rho * t.cos();
                    y[1] = centre[1] + rho * t.sin();
                    let v = f(&y);
                    sum += v;
                    abs += v.abs();
                }
                m *= 2;
                let cur = sum * 2.0 * std::f64::consts::PI / m as f64;
                let scale = abs * 2.0 * std::f64::consts::PI / m as f64;
                if (cur - prev).abs() <= 1e-14 * scale {
                    return cur;
                }
                prev = cur;
            }
            prev
        }
        3 => {
            let mut prev = f64::NAN;
            let mut cur = 0.0;
            for &(nu, nphi) in &[(8usize, 16usize), (16, 32), (32, 64), (64, 128), (128, 256)] {
                let (u, wu) = gauss_legendre(nu);
                let mut sum = 0.0;
                let mut abs = 0.0;
                for (ui, wi) in u.iter().zip(&wu) {
                    let s = (1.0 - ui * ui).max(0.0).sqrt();
                    for k in 0..nphi {
                        let t = 2.0 * std::f64::consts::PI * k as f64 / nphi as f64;
                        y[0] = centre[0] + rho * s * t.cos();
                        y[1] = centre[1] + rho * s * t.sin();
                        y[2] = centre[2] + rho * ui;
                        let v = wi * f(&y);
                        sum += v;
                        abs += v.abs();
                    }
                }
                let w = 2.0 * std::f64::consts::PI / nphi as f64;
                cur = sum * w;
                if (cur - prev).abs() <= 1e-14 * abs * w {
                    return cur;
                }
                prev = cur;
            }
            cur
        }
        _ => unreachable!("planar measures have d <= 3"),
    }
}

/// `∫_{|y - centre| < r_out} g(y) dy` over `R^d` in polar coordinates, with
/// radial panels refined geometrically around the scale `scale`.
pub(crate) fn polar_integral(
    d: usize,
    centre: &[f64],
    r_out: f64,
    scale: f64,
    extra_breaks: &[f64],
    g: &mut dyn FnMut(&[f64]) -> f64,
    rel_tol: f64,
) -> f64 {
    let mut breaks = vec![0.0];
    let mut b = 0.25 * scale;
    while b < r_out {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.extend(extra_breaks.iter().copied().filter(|&v| v > 0.0 && v < r_out));
    breaks.push(r_out);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * r_out);
    let radial = |rho: f64| -> f64 {
        if rho == 0.0 {
            return if d == 1 { 2.0 * g(centre) } else { 0.0 };
        }
        rho.powi(d as i32 - 1) * sphere_sum(d, centre, rho, g)
    };
    let mut radial = radial;
    adaptive_breaks(&mut radial, &breaks, 0.0, rel_tol, 4000).value
}

fn planar_potential(measure: &DiscreteMeasure, req: PotentialRequest<'_>, x: &[f64]) -> f64 {
    let d = measure.planar_dim().expect("planar measure");
    let n = measure.n;
    let p = req.exponent;
    let x0 = &x[..d];
    let hperp = norm(&x[d..]);
    let delta = raw_distance(measure, x);
    let core = measure
        .density
        .core_radius
        .max(req.weight.map_or(0.0, |w| w.core_radius));
    let r0 = norm(x0);
    let r_out = (TRUNCATION_FACTOR * delta.max(r0 + 1.0)).max(r0 + core + 1.0);
    let graph = matches!(measure.shape, Shape::Graph { .. });
    let mut pos = vec![0.0; n];
    let mut integrand = |y: &[f64]| -> f64 {
        measure.embed(y, &mut pos);
        let r2: f64 = pos.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let mut v = measure.density.eval(y) * r2.powf(-0.5 * p);
        if graph {
            v *= measure.area_factor(y);
        }
        if let Some(w) = req.weight {
            v *= w.eval(&pos);
        }
        v
    };
    let extra = [r0 - core, r0, r0 + core];
    let inner = polar_integral(d, x0, r_out, delta, &extra, &mut integrand, PLANAR_REL_TOL);

    let weight_limit = match req.weight {
        Some(w) => w.limit,
        None => Some(1.0),
    };
    let tail = match (measure.density.limit, weight_limit) {
        (Some(a), Some(b)) => a * b * flat_tail(d as f64, p, hperp, r_out),
        _ => {
            let mut shell = |u: f64| -> f64 {
                let rho = r_out + u;
                rho.powi(d as i32 - 1) * sphere_sum(d, x0, rho, &mut integrand)
            };
            exp_sinh(&mut shell, 1e-10).value
        }
    };
    inner + tail
}

fn check_params(measure: &DiscreteMeasure, params: &GeometryParams) -> Result<()> {
    if params.n() != measure.n {
        return Err(invalid("n", "geometry and measure disagree on the ambient dimension"));
    }
    if (params.d() - measure.d).abs() > 1e-12 * params.d() {
        return Err(invalid("d", "geometry and measure disagree on the dimension"));
    }
    Ok(())
}

/// `D_{α,μ}(x) = (∫ |x - y|^{-d-α} dμ(y))^{-1/α}`.
pub fn smooth_distance(measure: &DiscreteMeasure, params: &GeometryParams, x: &[f64]) -> Result<f64> {
    check_params(measure, params)?;
    let s = riesz_potential(measure, PotentialRequest::new(params.d() + params.alpha()), x)?;
    Ok(s.powf(-1.0 / params.alpha()))
}

/// Newtonian potential `u_f(x) = ∫ f(y) |x - y|^{-(n-2)} dμ(y)`.
pub fn newton_potential(measure: &DiscreteMeasure, params: &GeometryParams, weight: Option<&Field>, x: &[f64]) -> Result<f64> {
    check_params(measure, params)?;
    riesz_potential(
        measure,
        PotentialRequest {
            exponent: params.n() as f64 - 2.0,
            weight,
        },
        x,
    )
}

/// Closed form of `D_{α,μ}` over the plane with constant density `rho`.
pub fn flat_smooth_distance(params: &GeometryParams, rho: f64, delta: f64) -> f64 {
    let c2 = ledger(params).c2.unwrap();
    (rho * c2).powf(-1.0 / params.alpha()) * delta
}

/// Closed form of the Newtonian potential over the plane with constant density.
pub fn flat_newton_potential(params: &GeometryParams, rho: f64, delta: f64) -> f64 {
    let c1 = ledger(params).c1.unwrap();
    rho * c1 * delta.powf(-(params.n() as f64 - params.d() - 2.0))
}

/// Range of `D(x) / dist(x, E)` over the given points.
pub fn equivalence_dist_check(measure: &DiscreteMeasure, params: &GeometryParams, points: &[Vec<f64>]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for x in points {
        let delta = distance_to_support(measure, x)?;
        let r = smooth_distance(measure, params, x)? / delta;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Radial test function `(1 - |x - c|²/ρ²)³` supported in `B(c, ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpTest {
    pub centre: Vec<f64>,
    pub radius: f64,
}

impl BumpTest {
    pub fn value(&self, x: &[f64]) -> f64 {
        let s = self.scaled(x);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - s).powi(3)
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let s = self.scaled(x);
        if s >= 1.0 {
            return 0.0;
        }
        let n = x.len() as f64;
        -6.0 / (self.radius * self.radius) * (n * (1.0 - s).powi(2) - 4.0 * s * (1.0 - s))
    }

    fn scaled(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.centre).map(|(a, b)| (a - b) * (a - b)).sum();
        r2 / (self.radius * self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacianCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    /// Monte-Carlo standard error of `lhs`.
    pub std_err: f64,
}

/// `∫_E g dμ` for `g` supported in the ball `B(centre, radius)`.
pub fn measure_integral(measure: &DiscreteMeasure, g: &dyn Fn(&[f64]) -> f64, centre: &[f64], radius: f64) -> f64 {
    match measure.planar_dim() {
        Some(d) => {
            let n = measure.n;
            let graph = matches!(measure.shape, Shape::Graph { .. });
            let mut pos = vec![0.0; n];
            let mut integrand = |y: &[f64]| -> f64 {
                measure.embed(y, &mut pos);
                let mut v = measure.density.eval(y) * g(&pos);
                if graph {
                    v *= measure.area_factor(y);
                }
                v
            };
            let c0 = &centre[..d];
            let reach = radius + norm(&centre[d..]);
            polar_integral(d, c0, reach + radius, radius, &[], &mut integrand, 1e-12)
        }
        None => (0..measure.len()).map(|i| measure.weights[i] * g(measure.node(i))).sum(),
    }
}

const MC_CHUNK: usize = 20_000;

/// Monte-Carlo check of `Δu_f = -|S^{n-1}| (n - 2) f dμ` in the sense of
/// distributions: compares `∫ u_f Δφ dx` with `-|S^{n-1}|(n-2) ∫ φ f dμ`.
pub fn distributional_laplacian_check(
    measure: &DiscreteMeasure,
    params: &GeometryParams,
    f: &Field,
    test: &BumpTest,
    samples: usize,
    seed: u64,
) -> Result<LaplacianCheck> {
    check_params(measure, params)?;
    let n = measure.n;
    if test.centre.len() != n || !(test.radius > 0.0) {
        return Err(invalid("test_fn", "bump centre must lie in R^n with positive radius"));
    }
    if samples == 0 {
        return Err(invalid("mc_samples", "need at least one sample"));
    }
    let p = n as f64 - 2.0;
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            let mut x = vec![0.0; n];
            for _ in 0..count {
                loop {
                    for i in 0..n {
                        x[i] = test.centre[i] + test.radius * (2.0 * rng.random::<f64>() - 1.0);
                    }
                    if test.scaled(&x) < 1.0 {
                        break;
                    }
                }
                let lap = test.laplacian(&x);
                let v = if lap == 0.0 || raw_distance(measure, &x) <= measure.validity_floor() {
                    0.0
                } else {
                    lap * riesz_unchecked(measure, PotentialRequest::weighted(p, f), &x)
                };
                s1 += v;
                s2 += v * v;
            }
            (s1, s2, count)
        })
        .collect();
    let (s1, s2, cnt) = parts
        .iter()
        .fold((0.0, 0.0, 0usize), |acc, v| (acc.0 + v.0, acc.1 + v.1, acc.2 + v.2));
    let vol = crate::special::unit_ball_volume(n as f64) * test.radius.powi(n as i32);
    let mean = s1 / cnt as f64;
    let var = (s2 / cnt as f64 - mean * mean).max(0.0);
    let lhs = vol * mean;
    let std_err = vol * (var / cnt as f64).sqrt();
    let mass = measure_integral(measure, &|y: &[f64]| test.value(y) * f.eval(y), &test.centre, test.radius);
    let rhs = -sphere_area_real(n as f64) * (n as f64 - 2.0) * mass;
    let rel_err = if rhs != 0.0 {
        (lhs - rhs).abs() / rhs.abs()
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(LaplacianCheck {
        lhs,
        rhs,
        rel_err,
        std_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cantor_measure, flat_measure};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn flat_tail_matches_quadrature() {
        for &(d, p, h, r) in &[(1.0, 2.0, 1.0, 3.0), (2.0, 5.0, 0.3, 10.0), (3.0, 3.5, 2.0, 1.0)] {
            let direct = crate::quad::adaptive(
                |rho: f64| sphere_area_real(d) * rho.powf(d - 1.0) * (h * h + rho * rho).powf(-0.5 * p),
                r,
                1e4,
                0.0,
                1e-13,
                500,
            )
            .value
                + sphere_area_real(d) * 1e4f64.powf(d - p) / (p - d);
            assert_relative_eq!(flat_tail(d, p, h, r), direct, max_relative = 1e-6);
        }
    }

    #[test]
    fn line_in_r4_inverse_square() {
        let m = flat_measure(1, 4, Field::constant(1.0), 5.0, 0.1).unwrap();
        let v = riesz_potential(&m, PotentialRequest::new(2.0), &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((v - PI).abs() < 1e-6);
        assert!(riesz_potential(&m, PotentialRequest::new(1.0), &[0.0, 1.0, 0.0, 0.0]).is_err());
        let zero = Field::constant(0.0);
        let v = riesz_potential(&m, PotentialRequest::weighted(2.0, &zero), &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn flat_distance_closed_forms() {
        let p = GeometryParams::new(4, 1.0, 1.0).unwrap();
        let m = flat_measure(1, 4, Field::constant(1.0), 5.0, 0.1).unwrap();
        let dd = smooth_distance(&m, &p, &[0.3, 0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(dd, 1.0 / PI, max_relative = 1e-10);
        let p = GeometryParams::new(7, 2.0, 1.5).unwrap();
        let m = flat_measure(2, 7, Field::constant(2.0), 5.0, 0.25).unwrap();
        let x = [1.0, -2.0, 0.1, 0.2, 0.0, 0.0, 0.3];
        let delta = norm(&x[2..]);
        assert_relative_eq!(
            smooth_distance(&m, &p, &x).unwrap(),
            flat_smooth_distance(&p, 2.0, delta),
            max_relative = 1e-10
        );
        assert_relative_eq!(
            newton_potential(&m, &p, None, &x).unwrap(),
            flat_newton_potential(&p, 2.0, delta),
            max_relative = 1e-10
        );
    }

    #[test]
    fn three_dimensional_plane() {
        let p = GeometryParams::new(7, 3.0, 0.7).unwrap();
        let m = flat_measure(3, 7, Field::constant(1.0), 3.0, 0.5).unwrap();
        let x = [0.5, 0.0, -0.2, 0.0, 0.4, 0.0, 0.0];
        assert_relative_eq!(smooth_distance(&m, &p, &x).unwrap(), flat_smooth_distance(&p, 1.0, 0.4), max_relative = 1e-10);
    }

    #[test]
    fn cantor_far_field_is_point_mass() {
        let m = cantor_measure(3, 0.25, 2, 8, 1).unwrap();
        let centroid = [0.5, 0.0, 0.0];
        let x = [0.5, 30.0, 40.0];
        let u = riesz_potential(&m, PotentialRequest::new(1.0), &x).unwrap();
        let r = crate::geometry::dist(&x, &centroid);
        assert!((u * r - 1.0).abs() < 1e-2);
    }

    #[test]
    fn variable_density_matches_direct_sum() {
        // Compare the planar quadrature with a fine midpoint sum on the line.
        let f = Field::parse("1 + 0.5*exp(-y1^2)").unwrap().with_limit(1.0).with_core_radius(7.0);
        let m = flat_measure(1, 4, f.clone(), 5.0, 0.1).unwrap();
        let x = [0.7, 0.0, 0.6, 0.0];
        let v = riesz_potential(&m, PotentialRequest::new(2.5), &x).unwrap();
        let steps = 400_000;
        let lim = 400.0;
        let h = 2.0 * lim / steps as f64;
        let mut s = 0.0;
        for i in 0..steps {
            let y = -lim + (i as f64 + 0.5) * h;
            s += f.eval(&[y]) * ((y - 0.7).powi(2) + 0.36).powf(-1.25) * h;
        }
        s += 2.0 * lim.powf(-1.5) / 1.5;
        assert_relative_eq!(v, s, max_relative = 1e-7);
    }

    #[test]
    fn bump_laplacian_matches_finite_difference() {
        let b = BumpTest {
            centre: vec![0.1, 0.0, -0.2, 0.3],
            radius: 1.2,
        };
        let x = [0.3, 0.2, 0.1, 0.0];
        let h = 1e-4;
        let mut fd = 0.0;
        for i in 0..4 {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            fd += (b.value(&p) - 2.0 * b.value(&x) + b.value(&m)) / (h * h);
        }
        assert_relative_eq!(b.laplacian(&x), fd, max_relative = 1e-6);
    }
}
