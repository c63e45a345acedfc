//! Empirical BMO diagnostics on `R^d`, `d ∈ {1, 2}`: dyadic estimates of the
//! norm and sup-ratio studies for the ball-average and kernel-moment
//! inequalities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{dist, norm, Field};
use crate::potentials::{flat_tail, polar_integral};
use crate::quad::adaptive_breaks;
use crate::special::unit_ball_volume;

const ANGULAR_POINTS: usize = 64;

/// Test function with the points where it may be singular, so quadrature
/// can place breakpoints there.
#[derive(Debug, Clone)]
pub struct BmoFunction {
    pub field: Field,
    pub dim: usize,
    pub singular: Vec<Vec<f64>>,
}

impl BmoFunction {
    pub fn new(field: Field, dim: usize) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(invalid("d", "BMO diagnostics are implemented for d = 1, 2"));
        }
        Ok(BmoFunction {
            field,
            dim,
            singular: Vec::new(),
        })
    }

    pub fn with_singularity(mut self, p: Vec<f64>) -> Self {
        self.singular.push(p);
        self
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.field.eval(y)
    }

    /// `log|y|`, singular at the origin.
    pub fn log_abs(dim: usize) -> Result<Self> {
        let src = if dim == 1 { "ln(abs(y1))" } else { "0.5*ln(y1^2+y2^2)" };
        Ok(BmoFunction::new(Field::parse(src)?, dim)?.with_singularity(vec![0.0; dim]))
    }

    /// `clamp(log|y|, -level, level)`.
    pub fn truncated_log(dim: usize, level: f64) -> Result<Self> {
        let inner = if dim == 1 { "ln(abs(y1))" } else { "0.5*ln(y1^2+y2^2)" };
        let src = format!("max(-{level}, min({level}, {inner}))");
        let field = Field::parse(&src)?.with_limit(level).with_core_radius(level.exp());
        Ok(BmoFunction::new(field, dim)?.with_singularity(vec![0.0; dim]))
    }

    /// `exp(-|y|²)`.
    pub fn bump(dim: usize) -> Result<Self> {
        let src = if dim == 1 { "exp(-y1^2)" } else { "exp(-(y1^2+y2^2))" };
        let field = Field::parse(src)?.with_limit(0.0).with_core_radius(6.0);
        BmoFunction::new(field, dim)
    }

    /// `Σ_{k<terms} cos(2^k y₁)`.
    pub fn lacunary(dim: usize, terms: u32) -> Result<Self> {
        let src: Vec<String> = (0..terms).map(|k| format!("cos({}*y1)", 1u64 << k)).collect();
        BmoFunction::new(Field::parse(&src.join("+"))?, dim)
    }

    /// Same function precomposed with `y ↦ λy`.
    pub fn dilate(&self, lambda: f64) -> Self {
        BmoFunction {
            field: Field {
                expr: self.field.expr.dilate(lambda),
                limit: self.field.limit,
                core_radius: self.field.core_radius / lambda,
            },
            dim: self.dim,
            singular: self.singular.iter().map(|p| p.iter().map(|v| v / lambda).collect()).collect(),
        }
    }

    pub fn shift_value(&self, c: f64) -> Self {
        BmoFunction {
            field: Field {
                expr: self.field.expr.add(&crate::expr::Expr::constant(c)),
                limit: self.field.limit.map(|l| l + c),
                core_radius: self.field.core_radius,
            },
            dim: self.dim,
            singular: self.singular.clone(),
        }
    }
}

/// `∫_{B(centre, radius)} g`.
fn ball_integral(f: &BmoFunction, centre: &[f64], radius: f64, g: &dyn Fn(f64) -> f64) -> f64 {
    match f.dim {
        1 => {
            let (a, b) = (centre[0] - radius, centre[0] + radius);
            let mut breaks = vec![a];
            breaks.extend(f.singular.iter().map(|p| p[0]).filter(|&s| s > a && s < b));
            breaks.push(b);
            breaks.sort_by(f64::total_cmp);
            adaptive_breaks(|y: f64| g(f.eval(&[y])), &breaks, 1e-13 * radius, 1e-11, 2000).value
        }
        _ => {
            let mut breaks = vec![0.0];
            breaks.extend(f.singular.iter().map(|p| dist(p, centre)).filter(|&s| s > 0.0 && s < radius));
            breaks.push(radius);
            breaks.sort_by(f64::total_cmp);
            let h = 2.0 * std::f64::consts::PI / ANGULAR_POINTS as f64;
            let radial = |rho: f64| -> f64 {
                let mut s = 0.0;
                for k in 0..ANGULAR_POINTS {
                    let t = (k as f64 + 0.5) * h;
                    let y = [centre[0] + rho * t.cos(), centre[1] + rho * t.sin()];
                    s += g(f.eval(&y));
                }
                s * h * rho
            };
            adaptive_breaks(radial, &breaks, 1e-13 * radius * radius, 1e-10, 2000).value
        }
    }
}

/// Average `m_B f` over the ball.
pub fn ball_average(f: &BmoFunction, centre: &[f64], radius: f64) -> f64 {
    ball_integral(f, centre, radius, &|v| v) / (unit_ball_volume(f.dim as f64) * radius.powi(f.dim as i32))
}

/// Named test functions: constant, truncated log, bump, lacunary sum, log.
pub fn corpus(dim: usize) -> Result<Vec<(&'static str, BmoFunction)>> {
    Ok(vec![
        ("constant", BmoFunction::new(Field::constant(5.0), dim)?),
        ("truncated_log", BmoFunction::truncated_log(dim, 5.0)?),
        ("bump", BmoFunction::bump(dim)?),
        ("lacunary", BmoFunction::lacunary(dim, 6)?),
        ("log", BmoFunction::log_abs(dim)?),
    ])
}

/// `|B|⁻¹ ∫_B |f - m_B f|`.
pub fn mean_oscillation(f: &BmoFunction, centre: &[f64], radius: f64) -> f64 {
    let m = ball_average(f, centre, radius);
    ball_integral(f, centre, radius, &|v| gap(v, m)) / (unit_ball_volume(f.dim as f64) * radius.powi(f.dim as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmoEstimate {
    pub depth: u32,
    pub domain_radius: f64,
    pub norm_estimate: f64,
    pub balls: usize,
    pub worst_centre: Vec<f64>,
    pub worst_radius: f64,
}

/// Balls of radius `R 2^{-j}`, `j = 0..=depth`, centred on the grid of
/// spacing equal to the radius inside `B(0, R)`.
pub fn dyadic_balls(dim: usize, depth: u32, radius: f64) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    for j in 0..=depth {
        let rho = radius * 0.5f64.powi(j as i32);
        let k = 1i64 << j;
        match dim {
            1 => {
                for a in -k..=k {
                    out.push((vec![a as f64 * rho], rho));
                }
            }
            _ => {
                for a in -k..=k {
                    for b in -k..=k {
                        let c = vec![a as f64 * rho, b as f64 * rho];
                        if norm(&c) <= radius * (1.0 + 1e-12) {
                            out.push((c, rho));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Supremum of the mean oscillation over [`dyadic_balls`].
pub fn bmo_norm(f: &BmoFunction, depth: u32, radius: f64) -> Result<BmoEstimate> {
    if !(radius > 0.0) {
        return Err(invalid("radius", "domain radius must be positive"));
    }
    let balls = dyadic_balls(f.dim, depth, radius);
    let osc: Vec<f64> = balls.par_iter().map(|(c, r)| mean_oscillation(f, c, *r)).collect();
    let mut best = 0;
    for i in 1..osc.len() {
        if osc[i] > osc[best] {
            best = i;
        }
    }
    Ok(BmoEstimate {
        depth,
        domain_radius: radius,
        norm_estimate: osc[best],
        balls: balls.len(),
        worst_centre: balls[best].0.clone(),
        worst_radius: balls[best].1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallPair {
    pub x: Vec<f64>,
    pub r: f64,
    pub x0: Vec<f64>,
    pub r0: f64,
}

/// Radical inverse of `index` in `base`; coordinates of a Halton point.
fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut out = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        out += f * (i % base) as f64;
        i /= base;
    }
    out
}

fn log_lerp(lo: f64, hi: f64, t: f64) -> f64 {
    (lo.ln() + t * (hi / lo).ln()).exp()
}

fn direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    if dim == 1 {
        vec![if rng.random::<bool>() { 1.0 } else { -1.0 }]
    } else {
        let t = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        vec![t.cos(), t.sin()]
    }
}

/// Pairs from a Halton design: `r₀` log-uniform in `r0_range`, `r/r₀` and
/// `|x - x₀|/r₀` log-uniform in `[2, 100]`, `|x₀|` log-uniform in
/// `[1e-4, spread]`. Directions are drawn from `seed`. The first `k` pairs
/// of a design are the `k`-pair design, so doubling extends it.
pub fn sample_pairs(dim: usize, count: usize, seed: u64, spread: f64, r0_range: (f64, f64)) -> Vec<BallPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let r0 = log_lerp(r0_range.0, r0_range.1, halton(i, 2));
            let r = r0 * log_lerp(2.0, 100.0, halton(i, 3));
            let sep = r0 * log_lerp(2.0, 100.0, halton(i, 5));
            let rad = log_lerp(1e-4, spread, halton(i, 7));
            let x0: Vec<f64> = direction(&mut rng, dim).into_iter().map(|u| rad * u).collect();
            let dir = direction(&mut rng, dim);
            let x = x0.iter().zip(&dir).map(|(a, u)| a + sep * u).collect();
            BallPair { x, r, x0, r0 }
        })
        .collect()
}

/// `|m_{B(x,r)} f - m_{B(x₀,r₀)} f|` against `‖f‖ (ln(r/r₀) + ln(|x-x₀|/r₀))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioStudy {
    pub sup_ratio: f64,
    /// Sup over the first half of the samples.
    pub half_sup_ratio: f64,
    /// `(sup - half_sup) / sup`.
    pub drift: f64,
    pub samples: usize,
    /// Samples with a vanishing right-hand side and a nonzero left-hand side.
    pub flagged: usize,
}

fn ratio_study(ratios: &[Option<f64>]) -> RatioStudy {
    let flagged = ratios.iter().filter(|r| r.is_none()).count();
    let vals: Vec<f64> = ratios.iter().map(|r| r.unwrap_or(0.0)).collect();
    let half = vals.len() / 2;
    let sup = vals.iter().cloned().fold(0.0, f64::max);
    let half_sup = vals[..half].iter().cloned().fold(0.0, f64::max);
    RatioStudy {
        sup_ratio: sup,
        half_sup_ratio: half_sup,
        drift: if sup > 0.0 { (sup - half_sup) / sup } else { 0.0 },
        samples: vals.len(),
        flagged,
    }
}

/// Relative size below which differences of averages are quadrature noise.
const NOISE: f64 = 1e-10;

fn safe_ratio(lhs: f64, rhs: f64) -> Option<f64> {
    if rhs > 0.0 {
        Some(lhs / rhs)
    } else if lhs.abs() <= NOISE {
        Some(0.0)
    } else {
        None
    }
}

/// `|a - b|`, snapped to zero when it is at the noise level of `a` and `b`.
fn gap(a: f64, b: f64) -> f64 {
    let g = (a - b).abs();
    if g <= NOISE * a.abs().max(b.abs()) {
        0.0
    } else {
        g
    }
}

pub fn averages_inequality_ratio(f: &BmoFunction, pairs: &[BallPair], bmo: f64) -> Result<RatioStudy> {
    if pairs.iter().any(|p| !(p.r > p.r0 && p.r0 > 0.0)) {
        return Err(invalid("pairs", "need r > r0 > 0"));
    }
    let ratios: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|p| {
            let lhs = gap(ball_average(f, &p.x, p.r), ball_average(f, &p.x0, p.r0));
            let rhs = bmo * ((p.r / p.r0).ln() + (dist(&p.x, &p.x0) / p.r0).ln());
            safe_ratio(lhs, rhs)
        })
        .collect();
    Ok(ratio_study(&ratios))
}

/// Largest `|m_{B_i} f - m_{B_{i-1}} f| / (2^d ‖f‖)` along balls of radii
/// `r₀ 2^i` about `x`.
pub fn chain_jump_ratio(f: &BmoFunction, x: &[f64], r0: f64, steps: usize, bmo: f64) -> f64 {
    let avgs: Vec<f64> = (0..=steps).map(|i| ball_average(f, x, r0 * 2f64.powi(i as i32))).collect();
    let bound = 2f64.powi(f.dim as i32) * bmo;
    avgs.windows(2).map(|w| safe_ratio(gap(w[1], w[0]), bound).unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
}

/// Evaluation point above the plane: projection `x0` and height `delta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelPoint {
    pub x0: Vec<f64>,
    pub delta: f64,
}

/// `∫_{R^d} Π|f_i(y)| |x-y|^{-(d+β)} dy` for bounded functions that are
/// constant in modulus outside their core radii.
pub fn kernel_moment(fs: &[&BmoFunction], beta: f64, p: &KernelPoint) -> Result<f64> {
    let dim = fs[0].dim;
    let mut limit = 1.0;
    let mut core: f64 = 0.0;
    for f in fs {
        limit *= f
            .field
            .limit
            .ok_or_else(|| invalid("f", "kernel moments need the value at infinity"))?
            .abs();
        core = core.max(f.field.core_radius);
    }
    let d = dim as f64;
    let r0 = norm(&p.x0);
    let r_out = (8.0 * p.delta.max(r0 + 1.0)).max(r0 + core + 1.0);
    let mut extra: Vec<f64> = fs
        .iter()
        .flat_map(|f| f.singular.iter().map(|s| dist(s, &p.x0)))
        .collect();
    extra.extend([r0 - core, r0 + core]);
    let delta2 = p.delta * p.delta;
    let mut g = |y: &[f64]| -> f64 {
        let r2 = delta2 + y.iter().zip(&p.x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let prod: f64 = fs.iter().map(|f| f.eval(y).abs()).product();
        prod * r2.powf(-0.5 * (d + beta))
    };
    let inner = polar_integral(dim, &p.x0, r_out, p.delta, &extra, &mut g, 1e-10);
    Ok(inner + limit * flat_tail(d, d + beta, p.delta, r_out))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMomentStudy {
    /// Against `(1 + δ^{-(d+β)}) (‖f‖^m + |m_{B(x₀,1)} f|^m)`.
    pub local: RatioStudy,
    /// Against `(1 + δ^{-(d+β)}) (1 + ln⁺|x₀|)^m (‖f‖^m + |m_{B(0,1)} f|^m)`.
    pub global: RatioStudy,
}

/// Sup-ratio of `∫|f|^m |x-y|^{-(d+β)}` over its two upper bounds.
pub fn kernel_moment_ratio(f: &BmoFunction, m: u32, beta: f64, points: &[KernelPoint], bmo: f64) -> Result<KernelMomentStudy> {
    if m == 0 || !(beta > 0.0) {
        return Err(invalid("m", "need m >= 1 and beta > 0"));
    }
    let fs: Vec<&BmoFunction> = (0..m).map(|_| f).collect();
    let d = f.dim as f64;
    let origin = vec![0.0; f.dim];
    let origin_avg = ball_average(f, &origin, 1.0).abs();
    let mi = m as i32;
    let rows: Vec<Result<(Option<f64>, Option<f64>)>> = points
        .par_iter()
        .map(|p| {
            let lhs = kernel_moment(&fs, beta, p)?;
            let weight = 1.0 + p.delta.powf(-(d + beta));
            let local = weight * (bmo.powi(mi) + ball_average(f, &p.x0, 1.0).abs().powi(mi));
            let log = 1.0 + norm(&p.x0).ln().max(0.0);
            let global = weight * log.powi(mi) * (bmo.powi(mi) + origin_avg.powi(mi));
            Ok((safe_ratio(lhs, local), safe_ratio(lhs, global)))
        })
        .collect();
    let rows: Vec<(Option<f64>, Option<f64>)> = rows.into_iter().collect::<Result<_>>()?;
    let local: Vec<Option<f64>> = rows.iter().map(|r| r.0).collect();
    let global: Vec<Option<f64>> = rows.iter().map(|r| r.1).collect();
    Ok(KernelMomentStudy {
        local: ratio_study(&local),
        global: ratio_study(&global),
    })
}

/// Sup-ratio of `∫|f₁⋯f_m| |x-y|^{-(d+β)}` over
/// `(1 + δ^{-(d+β)}) (1 + ln⁺|x₀|)^m Π (‖f_i‖^m + |m_{B(0,1)} f_i|^m)^{1/m}`.
pub fn product_moment_ratio(fs: &[(&BmoFunction, f64)], beta: f64, points: &[KernelPoint]) -> Result<RatioStudy> {
    if fs.is_empty() {
        return Err(invalid("fs", "need at least one function"));
    }
    let m = fs.len() as i32;
    let d = fs[0].0.dim as f64;
    let origin = vec![0.0; fs[0].0.dim];
    let factor: f64 = fs
        .iter()
        .map(|(f, b)| (b.powi(m) + ball_average(f, &origin, 1.0).abs().powi(m)).powf(1.0 / m as f64))
        .product();
    let funcs: Vec<&BmoFunction> = fs.iter().map(|(f, _)| *f).collect();
    let ratios: Vec<Result<Option<f64>>> = points
        .par_iter()
        .map(|p| {
            let lhs = kernel_moment(&funcs, beta, p)?;
            let log = 1.0 + norm(&p.x0).ln().max(0.0);
            let rhs = (1.0 + p.delta.powf(-(d + beta))) * log.powi(m) * factor;
            Ok(safe_ratio(lhs, rhs))
        })
        .collect();
    let ratios: Vec<Option<f64>> = ratios.into_iter().collect::<Result<_>>()?;
    Ok(ratio_study(&ratios))
}

/// Points from a Halton design: `δ` log-uniform in `delta_range`, `|x₀|`
/// log-uniform in `[1e-3, x0_max]`, directions drawn from `seed`.
pub fn sample_kernel_points(dim: usize, count: usize, seed: u64, delta_range: (f64, f64), x0_max: f64) -> Vec<KernelPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let delta = log_lerp(delta_range.0, delta_range.1, halton(i, 2));
            let rad = log_lerp(1e-3, x0_max, halton(i, 3));
            let x0 = direction(&mut rng, dim).into_iter().map(|u| rad * u).collect();
            KernelPoint { x0, delta }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_has_zero_norm() {
        let f = BmoFunction::new(Field::constant(5.0), 1).unwrap();
        assert_eq!(bmo_norm(&f, 4, 2.0).unwrap().norm_estimate, 0.0);
        let f = BmoFunction::new(Field::constant(5.0), 2).unwrap();
        assert!(bmo_norm(&f, 2, 2.0).unwrap().norm_estimate < 1e-12);
    }

    #[test]
    fn log_oscillation_on_centred_interval() {
        // ∫_0^1 |ln y + 1| dy = 2/e.
        let f = BmoFunction::log_abs(1).unwrap();
        for &r in &[0.01, 1.0, 50.0] {
            assert_relative_eq!(mean_oscillation(&f, &[0.0], r), 2.0 / std::f64::consts::E, max_relative = 1e-9);
        }
    }

    #[test]
    fn linear_function_grows_with_radius() {
        let f = BmoFunction::new(Field::parse("y1").unwrap(), 1).unwrap();
        let a = bmo_norm(&f, 3, 1.0).unwrap().norm_estimate;
        let b = bmo_norm(&f, 3, 4.0).unwrap().norm_estimate;
        assert_relative_eq!(a, 0.5, max_relative = 1e-10);
        assert_relative_eq!(b / a, 4.0, max_relative = 1e-10);
    }

    #[test]
    fn norm_is_monotone_in_depth() {
        let f = BmoFunction::log_abs(1).unwrap();
        let mut prev = 0.0;
        for depth in 0..5 {
            let e = bmo_norm(&f, depth, 3.0).unwrap().norm_estimate;
            assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn constant_gives_zero_lhs() {
        let f = BmoFunction::new(Field::constant(2.0), 1).unwrap();
        let pairs = sample_pairs(1, 20, 1, 5.0, (0.01, 1.0));
        let s = averages_inequality_ratio(&f, &pairs, 0.0).unwrap();
        assert_eq!(s.sup_ratio, 0.0);
        assert_eq!(s.flagged, 0);
    }

    #[test]
    fn constant_kernel_moment_closed_form() {
        let f = BmoFunction::new(Field::constant(3.0), 1).unwrap();
        let p = KernelPoint { x0: vec![0.4], delta: 0.2 };
        let v = kernel_moment(&[&f], 1.0, &p).unwrap();
        assert_relative_eq!(v, 3.0 * std::f64::consts::PI / 0.2, max_relative = 1e-9);
    }
}
