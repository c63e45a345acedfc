//! Numerical quadrature used throughout the crate.
//!
//! Adaptive Gauss–Kronrod for smooth finite panels, double-exponential rules
//! for endpoint singularities and half-lines, Gauss–Legendre nodes for tensor
//! rules, and Wynn's epsilon algorithm for alternating panel sums.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Value together with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Single 15-point Kronrod panel with the embedded 7-point Gauss rule.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Estimate {
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

struct Panel {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`
/// or after `max_panels` subdivisions.
pub fn adaptive<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Estimate {
    adaptive_breaks(f, &[a, b], abs_tol, rel_tol, max_panels)
}

/// Globally adaptive integration over the panels `[breaks[i], breaks[i+1]]`
/// sharing one error budget `max(abs_tol, rel_tol·|I|)`.
pub fn adaptive_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Estimate {
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let est = gk15(&mut f, w[0], w[1]);
            value += est.value;
            error += est.error;
            heap.push(Panel { a: w[0], b: w[1], est });
        }
    }
    let mut panels = heap.len();
    while error > abs_tol.max(rel_tol * value.abs()) && panels < max_panels {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let left = gk15(&mut f, worst.a, m);
        let right = gk15(&mut f, m, worst.b);
        value += left.value + right.value - worst.est.value;
        error += left.error + right.error - worst.est.error;
        heap.push(Panel { a: worst.a, b: m, est: left });
        heap.push(Panel { a: m, b: worst.b, est: right });
        panels += 1;
    }
    let mut all: Vec<Panel> = heap.into_vec();
    all.sort_by(|p, q| p.a.total_cmp(&q.a));
    Estimate {
        value: all.iter().map(|p| p.est.value).sum(),
        error: all.iter().map(|p| p.est.error).sum(),
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Tanh-sinh rule on `[a, b]`; `f` receives `(x, distance to a, distance to b)`
/// so integrands singular at an endpoint can be evaluated without cancellation.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Estimate {
    let half = 0.5 * (b - a);
    let mut h = 1.0;
    let eval = |f: &mut F, t: f64| -> f64 {
        let u = 0.5 * PI * t.sinh();
        let du = 0.5 * PI * t.cosh();
        // 1 - tanh|u| without cancellation.
        let e = (-2.0 * u.abs()).exp();
        let comp = 2.0 * e / (1.0 + e);
        let w = du * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let dist = half * comp;
        if !(dist > 0.0) || w == 0.0 {
            return 0.0;
        }
        let (x, dl, dr) = if t < 0.0 {
            (a + dist, dist, 2.0 * half - dist)
        } else {
            (b - dist, 2.0 * half - dist, dist)
        };
        let v = f(x, dl, dr);
        if v.is_finite() {
            v * w * half
        } else {
            0.0
        }
    };
    let tmax = 6.5;
    let mut sum = eval(&mut f, 0.0);
    let mut k = 1;
    while (k as f64) * h <= tmax {
        let t = k as f64 * h;
        sum += eval(&mut f, t) + eval(&mut f, -t);
        k += 1;
    }
    let mut prev = sum * h;
    let mut err = f64::INFINITY;
    for _ in 0..9 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            let t = k as f64 * h;
            sum += eval(&mut f, t) + eval(&mut f, -t);
            k += 2;
        }
        let cur = sum * h;
        err = (cur - prev).abs();
        if err <= rel_tol * cur.abs() {
            return Estimate {
                value: cur,
                error: err,
            };
        }
        prev = cur;
    }
    Estimate {
        value: prev,
        error: err,
    }
}

/// Exp-sinh rule on `[0, ∞)`, suited to integrands with algebraic behaviour at
/// zero and algebraic or faster decay at infinity.
pub fn exp_sinh<F: FnMut(f64) -> f64>(mut f: F, rel_tol: f64) -> Estimate {
    let eval = |f: &mut F, t: f64| -> f64 {
        let u = 0.5 * PI * t.sinh();
        if u > 700.0 || u < -700.0 {
            return 0.0;
        }
        let x = u.exp();
        let w = x * 0.5 * PI * t.cosh();
        let v = f(x);
        let r = v * w;
        if r.is_finite() {
            r
        } else {
            0.0
        }
    };
    let tmax = 6.0;
    let mut h = 0.5;
    let mut sum = eval(&mut f, 0.0);
    let mut k = 1;
    while (k as f64) * h <= tmax {
        let t = k as f64 * h;
        sum += eval(&mut f, t) + eval(&mut f, -t);
        k += 1;
    }
    let mut prev = sum * h;
    let mut err = f64::INFINITY;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            let t = k as f64 * h;
            sum += eval(&mut f, t) + eval(&mut f, -t);
            k += 2;
        }
        let cur = sum * h;
        err = (cur - prev).abs();
        if err <= rel_tol * cur.abs() {
            return Estimate {
                value: cur,
                error: err,
            };
        }
        prev = cur;
    }
    Estimate {
        value: prev,
        error: err,
    }
}

/// Wynn's epsilon acceleration of a sequence of partial sums.
pub fn wynn_epsilon(partial: &[f64]) -> f64 {
    let n = partial.len();
    if n < 3 {
        return *partial.last().unwrap_or(&0.0);
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = partial.to_vec();
    let mut best = partial[n - 1];
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            let inv = if diff == 0.0 { f64::INFINITY } else { 1.0 / diff };
            next.push(prev[i + 1] + inv);
        }
        prev = cur;
        cur = next;
        col += 1;
        if col % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    best = v;
                }
            }
        }
    }
    best
}

/// Integral over `[a, ∞)` of an oscillatory integrand whose sign changes are
/// spaced by roughly `spacing`; panel sums are accelerated with Wynn's epsilon.
pub fn oscillatory_tail<F: FnMut(f64) -> f64>(mut f: F, a: f64, spacing: f64, panels: usize, tol: f64) -> f64 {
    let mut partial = Vec::with_capacity(panels);
    let mut s = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * spacing;
        let hi = lo + spacing;
        s += adaptive(&mut f, lo, hi, tol, 1e-14, 50).value;
        partial.push(s);
    }
    wynn_epsilon(&partial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk15_integrates_polynomials_exactly() {
        let mut f = |x: f64| x.powi(20) - 3.0 * x.powi(7) + 1.0;
        let e = gk15(&mut f, -1.0, 2.0);
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0 + 3.0;
        assert!((e.value - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        let e = adaptive(|x: f64| x.ln(), 0.0, 1.0, 1e-12, 1e-12, 500);
        assert!((e.value + 1.0).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_weights_and_moments() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((m - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_endpoint_singularities() {
        let e = tanh_sinh(|_, dl, dr| dl.powf(-0.5) * dr.powf(-0.5), 0.0, 1.0, 1e-13);
        assert!((e.value - PI).abs() < 1e-11);
    }

    #[test]
    fn exp_sinh_algebraic_decay() {
        let e = exp_sinh(|x| 1.0 / (1.0 + x * x), 1e-13);
        assert!((e.value - PI / 2.0).abs() < 1e-12);
        let e = exp_sinh(|x| x.powf(-0.5) / (1.0 + x), 1e-13);
        assert!((e.value - PI).abs() < 1e-11);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        let mut s = 0.0;
        let partial: Vec<f64> = (0..20)
            .map(|k| {
                s += (-1f64).powi(k) / (2 * k + 1) as f64;
                s
            })
            .collect();
        assert!((wynn_epsilon(&partial) - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_cosine_transform() {
        let v = oscillatory_tail(|t: f64| t.cos() / (1.0 + t * t), 0.0, PI, 40, 1e-15);
        assert!((v - 0.5 * PI * (-1f64).exp()).abs() < 1e-10);
    }
}
