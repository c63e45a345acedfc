//! Geometry parameters and discrete representations of measures on
//! lower-dimensional sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::special::unit_ball_volume;

/// Ambient dimension `n`, boundary dimension `d` and exponent `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometryParams {
    n: usize,
    d: f64,
    alpha: f64,
}

impl GeometryParams {
    pub fn new(n: usize, d: f64, alpha: f64) -> Result<Self> {
        if n < 3 {
            return Err(invalid("n", format!("ambient dimension must be at least 3, got {n}")));
        }
        if !(d > 0.0 && d < n as f64 - 2.0) {
            return Err(invalid("d", format!("need 0 < d < n - 2 = {}, got {d}", n as f64 - 2.0)));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid("alpha", format!("need alpha > 0, got {alpha}")));
        }
        Ok(GeometryParams { n, d, alpha })
    }

    /// Parameters with `α = n - d - 2`.
    pub fn magic(n: usize, d: f64) -> Result<Self> {
        GeometryParams::new(n, d, n as f64 - d - 2.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `γ = d + 2 - n`, the exponent making `D^γ` the natural harmonic candidate.
    pub fn gamma(&self) -> f64 {
        self.d + 2.0 - self.n as f64
    }

    pub fn magic_alpha(&self) -> f64 {
        self.n as f64 - self.d - 2.0
    }

    pub fn is_magic(&self) -> bool {
        self.alpha == self.magic_alpha()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        GeometryParams::new(self.n, self.d, alpha)
    }
}

/// A scalar function on the ambient space or on a parameter domain, with an
/// optional value at infinity and a radius outside which it is taken to be
/// equal to that value.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub expr: Expr,
    pub limit: Option<f64>,
    pub core_radius: f64,
}

impl Field {
    pub fn new(expr: Expr) -> Self {
        let limit = expr.constant_value();
        Field {
            expr,
            limit,
            core_radius: 0.0,
        }
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(Field::new(Expr::parse(src)?))
    }

    pub fn constant(c: f64) -> Self {
        Field::new(Expr::constant(c))
    }

    pub fn with_limit(mut self, limit: f64) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn with_core_radius(mut self, r: f64) -> Self {
        self.core_radius = r;
        self
    }

    #[inline]
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.expr.eval(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportKind {
    FlatPlane,
    Graph,
    Cantor,
    PointCloud,
}

/// How the potential of the part of the measure outside the truncation is
/// accounted for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailModel {
    /// Compact support; nothing beyond the nodes.
    None,
    /// Closed-form contribution of the asymptotic plane with this density.
    FlatClosedForm { limit: f64 },
    /// Numerical integration out to infinity without a closed-form tail.
    Numerical,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Shape {
    Flat,
    Graph { psi: Vec<Expr>, fd_step: f64 },
    Cantor { ratio: f64, branches: usize, depth: u32, embed_dim: usize },
    Cloud,
}

/// Weighted nodes representing a measure on a set `E ⊂ R^n`.
///
/// Flat and graph measures also keep the density so that potentials can be
/// computed by quadrature on the parameter domain; the nodes serve mass and
/// regularity diagnostics.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    pub(crate) n: usize,
    pub(crate) d: f64,
    pub(crate) shape: Shape,
    pub(crate) density: Field,
    pub(crate) positions: Vec<f64>,
    pub(crate) weights: Vec<f64>,
    pub(crate) resolution: f64,
    pub(crate) truncation: f64,
    pub(crate) tail: TailModel,
}

impl DiscreteMeasure {
    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> f64 {
        self.d
    }

    pub fn kind(&self) -> SupportKind {
        match self.shape {
            Shape::Flat => SupportKind::FlatPlane,
            Shape::Graph { .. } => SupportKind::Graph,
            Shape::Cantor { .. } => SupportKind::Cantor,
            Shape::Cloud => SupportKind::PointCloud,
        }
    }

    pub fn density(&self) -> &Field {
        &self.density
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.positions[i * self.n..(i + 1) * self.n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integer boundary dimension for measures parametrized over `R^d`.
    pub(crate) fn planar_dim(&self) -> Option<usize> {
        match self.shape {
            Shape::Flat | Shape::Graph { .. } => Some(self.d as usize),
            _ => None,
        }
    }

    /// Smallest admissible distance from the support for potentials to be
    /// trusted as approximations of the continuum measure.
    pub fn validity_floor(&self) -> f64 {
        match self.shape {
            Shape::Flat | Shape::Graph { .. } => 0.0,
            _ => SAFETY_FACTOR * self.resolution,
        }
    }

    /// Graph map `η(y) = (y, ψ(y))` in the ambient space.
    pub(crate) fn embed(&self, y: &[f64], out: &mut [f64]) {
        let d = y.len();
        out[..d].copy_from_slice(y);
        match &self.shape {
            Shape::Graph { psi, .. } => {
                for (k, p) in psi.iter().enumerate() {
                    out[d + k] = p.eval(y);
                }
            }
            _ => out[d..].iter_mut().for_each(|v| *v = 0.0),
        }
    }

    /// Jacobian `√det(DηᵀDη)` of the graph map at `y`, by central differences.
    pub fn area_factor(&self, y: &[f64]) -> f64 {
        let (psi, step) = match &self.shape {
            Shape::Graph { psi, fd_step } => (psi, *fd_step),
            _ => return 1.0,
        };
        let d = y.len();
        let mut grads = vec![0.0; psi.len() * d];
        let mut yp = y.to_vec();
        for j in 0..d {
            let orig = yp[j];
            yp[j] = orig + step;
            let plus: Vec<f64> = psi.iter().map(|p| p.eval(&yp)).collect();
            yp[j] = orig - step;
            let minus: Vec<f64> = psi.iter().map(|p| p.eval(&yp)).collect();
            yp[j] = orig;
            for k in 0..psi.len() {
                grads[k * d + j] = (plus[k] - minus[k]) / (2.0 * step);
            }
        }
        let mut g = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let mut s = if a == b { 1.0 } else { 0.0 };
                for k in 0..psi.len() {
                    s += grads[k * d + a] * grads[k * d + b];
                }
                g[a * d + b] = s;
            }
        }
        determinant(&mut g, d).sqrt()
    }
}

pub const SAFETY_FACTOR: f64 = 10.0;

fn determinant(m: &mut [f64], d: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..d {
        let piv = (c..d).max_by(|&i, &j| m[i * d + c].abs().total_cmp(&m[j * d + c].abs())).unwrap();
        if m[piv * d + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..d {
                m.swap(piv * d + k, c * d + k);
            }
            det = -det;
        }
        det *= m[c * d + c];
        for r in c + 1..d {
            let f = m[r * d + c] / m[c * d + c];
            for k in c..d {
                m[r * d + k] -= f * m[c * d + k];
            }
        }
    }
    det
}

/// Cell centres of a cubic grid of spacing `cell` inside the `d`-ball of
/// radius `radius`.
fn grid_in_ball(d: usize, radius: f64, cell: f64) -> Vec<Vec<f64>> {
    let m = (radius / cell).ceil() as i64;
    let mut out = Vec::new();
    let mut idx = vec![-m; d];
    loop {
        let y: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) * cell).collect();
        if y.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            out.push(y);
        }
        let mut k = 0;
        loop {
            if k == d {
                return out;
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = -m;
            k += 1;
        }
    }
}

fn check_planar(d: usize, n: usize, truncation: f64, cell: f64) -> Result<()> {
    if d == 0 || d > 3 {
        return Err(invalid("d", "planar measures are supported for d = 1, 2, 3"));
    }
    if d + 2 >= n {
        return Err(invalid("n", format!("need d < n - 2, got d = {d}, n = {n}")));
    }
    if !(truncation > 0.0) {
        return Err(invalid("truncation", "truncation radius must be positive"));
    }
    if !(cell > 0.0) || cell > truncation {
        return Err(invalid("cell", "cell size must be positive and below the truncation radius"));
    }
    Ok(())
}

/// Constant or variable density on the plane `R^d × {0} ⊂ R^n`.
///
/// Nodes tile the truncated ball with spacing `cell`. The density must be
/// positive, finite and carry a limit value at infinity.
pub fn flat_measure(d: usize, n: usize, density: Field, truncation: f64, cell: f64) -> Result<DiscreteMeasure> {
    check_planar(d, n, truncation, cell)?;
    let limit = density
        .limit
        .ok_or_else(|| invalid("density", "a flat measure needs the density's limit at infinity"))?;
    if !(limit > 0.0) {
        return Err(invalid("density", "the density limit must be positive"));
    }
    let cells = grid_in_ball(d, truncation, cell);
    let vol = cell.powi(d as i32);
    let mut positions = Vec::with_capacity(cells.len() * n);
    let mut weights = Vec::with_capacity(cells.len());
    for y in &cells {
        let w = density.eval(y);
        if !(w > 0.0) || !w.is_finite() {
            return Err(invalid("density", format!("density must be positive and finite, got {w} at {y:?}")));
        }
        positions.extend_from_slice(y);
        positions.extend(std::iter::repeat(0.0).take(n - d));
        weights.push(w * vol);
    }
    Ok(DiscreteMeasure {
        n,
        d: d as f64,
        shape: Shape::Flat,
        density,
        positions,
        weights,
        resolution: cell,
        truncation,
        tail: TailModel::FlatClosedForm { limit },
    })
}

/// Measure `(1 + φ) dσ` on the graph `{(y, ψ(y))}` of `ψ: R^d → R^{n-d}`.
pub fn graph_measure(
    d: usize,
    n: usize,
    psi: Vec<Expr>,
    phi: Field,
    truncation: f64,
    cell: f64,
) -> Result<DiscreteMeasure> {
    check_planar(d, n, truncation, cell)?;
    if psi.len() != n - d {
        return Err(invalid("psi", format!("need {} components, got {}", n - d, psi.len())));
    }
    let density = Field {
        expr: Expr::constant(1.0).add(&phi.expr),
        limit: phi.limit.map(|l| 1.0 + l),
        core_radius: phi.core_radius,
    };
    let mut measure = DiscreteMeasure {
        n,
        d: d as f64,
        shape: Shape::Graph {
            psi,
            fd_step: 1e-5,
        },
        density,
        positions: Vec::new(),
        weights: Vec::new(),
        resolution: cell,
        truncation,
        tail: TailModel::Numerical,
    };
    let cells = grid_in_ball(d, truncation, cell);
    let vol = cell.powi(d as i32);
    let mut pos = vec![0.0; n];
    for y in &cells {
        measure.embed(y, &mut pos);
        let w = measure.density.eval(y);
        let j = measure.area_factor(y);
        if !(w > 0.0) || !w.is_finite() || !j.is_finite() || pos.iter().any(|v| !v.is_finite()) {
            return Err(invalid("psi", format!("graph data must be finite with 1 + phi > 0 at {y:?}")));
        }
        measure.positions.extend_from_slice(&pos);
        measure.weights.push(vol * w * j);
    }
    if let Some(limit) = measure.density.limit {
        measure.tail = TailModel::FlatClosedForm { limit };
    }
    Ok(measure)
}

/// Self-similar Cantor measure: `branches = k^m` similarities of ratio
/// `ratio` arranged on a `k × … × k` grid in an `m`-dimensional coordinate
/// plane, iterated `depth` times. Each node carries mass `branches^{-depth}`.
pub fn cantor_measure(n: usize, ratio: f64, branches: usize, depth: u32, embed_dim: usize) -> Result<DiscreteMeasure> {
    if embed_dim == 0 || embed_dim > n {
        return Err(invalid("embedding_plane", "plane dimension must lie in 1..=n"));
    }
    let k = (branches as f64).powf(1.0 / embed_dim as f64).round() as usize;
    if k < 2 || k.pow(embed_dim as u32) != branches {
        return Err(invalid(
            "branches",
            format!("branches must be k^{embed_dim} with k >= 2, got {branches}"),
        ));
    }
    if !(ratio > 0.0) || ratio >= 1.0 / k as f64 {
        return Err(invalid(
            "contraction_ratio",
            format!("pieces overlap unless 0 < ratio < 1/{k}, got {ratio}"),
        ));
    }
    let count = (branches as u64).checked_pow(depth).filter(|&c| c <= 1 << 22).ok_or_else(|| {
        invalid("depth", "too many nodes requested")
    })? as usize;
    let d = (branches as f64).ln() / (1.0 / ratio).ln();
    let offset = (1.0 - ratio) / (k - 1) as f64;
    let weight = 1.0 / count as f64;
    let mut positions = vec![0.0; count * n];
    for idx in 0..count {
        let node = &mut positions[idx * n..(idx + 1) * n];
        let mut rest = idx;
        let mut scale = 1.0;
        let mut digits = Vec::with_capacity(depth as usize);
        for _ in 0..depth {
            digits.push(rest % branches);
            rest /= branches;
        }
        // Most significant digit is the outermost map.
        for &digit in digits.iter().rev() {
            let mut dg = digit;
            for axis in 0..embed_dim {
                node[axis] += scale * offset * (dg % k) as f64;
                dg /= k;
            }
            scale *= ratio;
        }
        for v in node.iter_mut().take(embed_dim) {
            *v += 0.5 * scale;
        }
    }
    Ok(DiscreteMeasure {
        n,
        d,
        shape: Shape::Cantor {
            ratio,
            branches,
            depth,
            embed_dim,
        },
        density: Field::constant(1.0),
        positions,
        weights: vec![weight; count],
        resolution: ratio.powi(depth as i32),
        truncation: (embed_dim as f64).sqrt(),
        tail: TailModel::None,
    })
}

/// Finite measure with explicit nodes and weights, declared to represent a
/// set of dimension `d`.
pub fn point_cloud(n: usize, d: f64, nodes: Vec<Vec<f64>>, weights: Vec<f64>, resolution: Option<f64>) -> Result<DiscreteMeasure> {
    if nodes.is_empty() || nodes.len() != weights.len() {
        return Err(invalid("nodes", "need a non-empty node list with one weight per node"));
    }
    if nodes.iter().any(|p| p.len() != n || p.iter().any(|v| !v.is_finite())) {
        return Err(invalid("nodes", format!("every node must have {n} finite coordinates")));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(invalid("weights", "weights must be positive and finite"));
    }
    let positions: Vec<f64> = nodes.iter().flatten().copied().collect();
    let resolution = match resolution {
        Some(r) if r > 0.0 => r,
        Some(_) => return Err(invalid("resolution", "resolution must be positive")),
        None => {
            let mut best = f64::INFINITY;
            for i in 0..nodes.len() {
                for j in i + 1..nodes.len() {
                    best = best.min(dist(&nodes[i], &nodes[j]));
                }
            }
            if best.is_finite() {
                best
            } else {
                1.0
            }
        }
    };
    let truncation = nodes.iter().map(|p| norm(p)).fold(0.0, f64::max);
    Ok(DiscreteMeasure {
        n,
        d,
        shape: Shape::Cloud,
        density: Field::constant(1.0),
        positions,
        weights,
        resolution,
        truncation,
        tail: TailModel::None,
    })
}

/// `count` uniform nodes in `[0, 1]^n` with equal weights.
pub fn random_cloud(n: usize, d: f64, count: usize, seed: u64) -> Result<DiscreteMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<Vec<f64>> = (0..count).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
    point_cloud(n, d, nodes, vec![1.0 / count as f64; count], None)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance from `x` to the support, rejecting points closer than the
/// validity floor.
pub fn distance_to_support(measure: &DiscreteMeasure, x: &[f64]) -> Result<f64> {
    if x.len() != measure.n {
        return Err(invalid("x", format!("expected {} coordinates", measure.n)));
    }
    let delta = raw_distance(measure, x);
    if !(delta > measure.validity_floor()) {
        return Err(Error::OutsideValidity(format!(
            "distance {delta:e} to the support is not above the floor {:e}",
            measure.validity_floor()
        )));
    }
    Ok(delta)
}

/// `count` points off the support with distance to it log-uniform in
/// `[lo, hi]`, each above the validity floor. Planar supports are sampled
/// over the unit cube of parameters, node supports around random nodes.
pub fn sample_exterior_points(measure: &DiscreteMeasure, count: usize, seed: u64, (lo, hi): (f64, f64)) -> Result<Vec<Vec<f64>>> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(invalid("range", "need 0 < lo <= hi"));
    }
    let lo = lo.max(1.01 * measure.validity_floor());
    if lo > hi {
        return Err(invalid("range", "the validity floor exceeds the requested distances"));
    }
    let n = measure.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::Numerical("could not place exterior points in the requested range".into()));
        }
        let target = (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp();
        let mut dir: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let x: Vec<f64> = match measure.planar_dim() {
            Some(d) => {
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut base = vec![0.0; n];
                measure.embed(&y, &mut base);
                dir[..d].iter_mut().for_each(|v| *v = 0.0);
                let s = norm(&dir);
                base.iter().zip(&dir).map(|(b, u)| b + target * u / s).collect()
            }
            None => {
                let i = rng.random_range(0..measure.len());
                let s = norm(&dir);
                measure.node(i).iter().zip(&dir).map(|(b, u)| b + target * u / s).collect()
            }
        };
        let delta = raw_distance(measure, &x);
        if delta >= lo && delta <= hi && delta > measure.validity_floor() {
            out.push(x);
        }
    }
    Ok(out)
}

pub(crate) fn raw_distance(measure: &DiscreteMeasure, x: &[f64]) -> f64 {
    match &measure.shape {
        Shape::Flat => norm(&x[measure.d as usize..]),
        Shape::Graph { .. } => graph_distance(measure, x),
        _ => nearest_node(measure, x).1,
    }
}

fn nearest_node(measure: &DiscreteMeasure, x: &[f64]) -> (usize, f64) {
    let n = measure.n;
    let mut best = (0, f64::INFINITY);
    for i in 0..measure.len() {
        let p = &measure.positions[i * n..(i + 1) * n];
        let s: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if s < best.1 {
            best = (i, s);
        }
    }
    (best.0, best.1.sqrt())
}

/// Closest point on a graph by Gauss–Newton from the projection of `x`.
fn graph_distance(measure: &DiscreteMeasure, x: &[f64]) -> f64 {
    let n = measure.n;
    let d = measure.d as usize;
    let mut y = x[..d].to_vec();
    let mut pos = vec![0.0; n];
    let mut best = f64::INFINITY;
    let step = 1e-6;
    for _ in 0..50 {
        measure.embed(&y, &mut pos);
        let r: Vec<f64> = x.iter().zip(&pos).map(|(a, b)| a - b).collect();
        let cur = norm(&r);
        best = best.min(cur);
        // Columns of the Jacobian of η.
        let mut jac = vec![0.0; n * d];
        let mut yp = y.clone();
        let mut p1 = vec![0.0; n];
        let mut p2 = vec![0.0; n];
        for j in 0..d {
            let o = yp[j];
            yp[j] = o + step;
            measure.embed(&yp, &mut p1);
            yp[j] = o - step;
            measure.embed(&yp, &mut p2);
            yp[j] = o;
            for i in 0..n {
                jac[i * d + j] = (p1[i] - p2[i]) / (2.0 * step);
            }
        }
        let mut jtj = vec![0.0; d * d];
        let mut jtr = vec![0.0; d];
        for a in 0..d {
            for i in 0..n {
                jtr[a] += jac[i * d + a] * r[i];
            }
            for b in 0..d {
                for i in 0..n {
                    jtj[a * d + b] += jac[i * d + a] * jac[i * d + b];
                }
            }
        }
        let delta = solve(&mut jtj, &mut jtr, d);
        let size = norm(&delta);
        for j in 0..d {
            y[j] += delta[j];
        }
        if size < 1e-14 * (1.0 + norm(&y)) {
            break;
        }
    }
    measure.embed(&y, &mut pos);
    best.min(dist(x, &pos))
}

fn solve(a: &mut [f64], b: &mut [f64], d: usize) -> Vec<f64> {
    for c in 0..d {
        let piv = (c..d).max_by(|&i, &j| a[i * d + c].abs().total_cmp(&a[j * d + c].abs())).unwrap();
        for k in 0..d {
            a.swap(piv * d + k, c * d + k);
        }
        b.swap(piv, c);
        let p = a[c * d + c];
        if p == 0.0 {
            return vec![0.0; d];
        }
        for r in c + 1..d {
            let f = a[r * d + c] / p;
            for k in c..d {
                a[r * d + k] -= f * a[c * d + k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; d];
    for r in (0..d).rev() {
        let mut s = b[r];
        for k in r + 1..d {
            s -= a[r * d + k] * x[k];
        }
        x[r] = s / a[r * d + r];
    }
    x
}

/// Mass-to-radius ratios `μ(B(x, r)) / r^d` over sampled centres.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AhlforsReport {
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Smallest `C` with `C⁻¹ ≤ ratio ≤ C` over the samples.
    pub constant: f64,
    /// `(radius, ratio)` for every sampled pair.
    pub samples: Vec<(f64, f64)>,
}

/// Samples `centres` nodes (seeded) whose balls of every radius stay inside
/// the truncation and reports `μ(B(x, r)) / r^d`.
pub fn ahlfors_check(measure: &DiscreteMeasure, radii: &[f64], centres: usize, seed: u64) -> Result<AhlforsReport> {
    if radii.iter().any(|r| !(*r > 0.0)) || radii.is_empty() {
        return Err(invalid("radii", "radii must be positive"));
    }
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let n = measure.n;
    let planar = measure.planar_dim().is_some();
    let eligible: Vec<usize> = (0..measure.len())
        .filter(|&i| !planar || norm(measure.node(i)) + rmax <= measure.truncation)
        .collect();
    if eligible.is_empty() {
        return Err(invalid("radii", "no centre keeps the largest ball inside the truncation"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for _ in 0..centres {
        let c = eligible[rng.random_range(0..eligible.len())];
        let centre = measure.node(c).to_vec();
        for &r in radii {
            let mut mass = 0.0;
            for i in 0..measure.len() {
                let p = &measure.positions[i * n..(i + 1) * n];
                let s: f64 = p.iter().zip(&centre).map(|(a, b)| (a - b) * (a - b)).sum();
                if s <= r * r {
                    mass += measure.weights[i];
                }
            }
            samples.push((r, mass / r.powf(measure.d)));
        }
    }
    let ratio_min = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let ratio_max = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(AhlforsReport {
        ratio_min,
        ratio_max,
        constant: ratio_max.max(1.0 / ratio_min),
        samples,
    })
}

/// Volume of the unit `d`-ball, the exact mass ratio for unit flat density.
pub fn flat_mass_ratio(d: usize) -> f64 {
    unit_ball_volume(d as f64)
}

/// Density handle as written in a config: expression, value at infinity and
/// the radius outside which it is within tolerance of that value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub expr: String,
    #[serde(default)]
    pub limit: Option<f64>,
    #[serde(default)]
    pub core_radius: f64,
}

impl FieldSpec {
    pub fn constant(c: f64) -> Self {
        FieldSpec {
            expr: format!("{c}"),
            limit: None,
            core_radius: 0.0,
        }
    }

    pub fn build(&self) -> Result<Field> {
        let mut f = Field::parse(&self.expr)?.with_core_radius(self.core_radius);
        if let Some(l) = self.limit {
            f = f.with_limit(l);
        }
        Ok(f)
    }
}

/// Config form of every measure family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Flat {
        n: usize,
        d: usize,
        density: FieldSpec,
        truncation: f64,
        cell: f64,
    },
    Graph {
        n: usize,
        d: usize,
        psi: Vec<String>,
        phi: FieldSpec,
        truncation: f64,
        cell: f64,
    },
    Cantor {
        n: usize,
        ratio: f64,
        branches: usize,
        depth: u32,
        embed_dim: usize,
    },
    Cloud {
        n: usize,
        d: f64,
        count: usize,
        seed: u64,
    },
}

impl MeasureSpec {
    pub fn ambient_dim(&self) -> usize {
        match self {
            MeasureSpec::Flat { n, .. }
            | MeasureSpec::Graph { n, .. }
            | MeasureSpec::Cantor { n, .. }
            | MeasureSpec::Cloud { n, .. } => *n,
        }
    }

    pub fn build(&self) -> Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Flat { n, d, density, truncation, cell } => flat_measure(*d, *n, density.build()?, *truncation, *cell),
            MeasureSpec::Graph { n, d, psi, phi, truncation, cell } => {
                let psi = psi.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
                graph_measure(*d, *n, psi, phi.build()?, *truncation, *cell)
            }
            MeasureSpec::Cantor { n, ratio, branches, depth, embed_dim } => cantor_measure(*n, *ratio, *branches, *depth, *embed_dim),
            MeasureSpec::Cloud { n, d, count, seed } => random_cloud(*n, *d, *count, *seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn params_validation() {
        assert!(GeometryParams::new(2, 0.5, 1.0).is_err());
        assert!(GeometryParams::new(4, 2.0, 1.0).is_err());
        assert!(GeometryParams::new(4, 1.0, 0.0).is_err());
        let p = GeometryParams::magic(3, 0.5).unwrap();
        assert!(p.is_magic());
        assert_eq!(p.gamma(), -0.5);
        assert!(!GeometryParams::new(7, 2.0, 1.0).unwrap().is_magic());
    }

    #[test]
    fn flat_rejects_bad_density() {
        assert!(flat_measure(1, 4, Field::constant(0.0), 5.0, 0.1).is_err());
        let no_limit = Field::parse("1 + exp(-y1^2)").unwrap();
        assert!(flat_measure(1, 4, no_limit, 5.0, 0.1).is_err());
        assert!(flat_measure(2, 4, Field::constant(1.0), 5.0, 0.1).is_err());
    }

    #[test]
    fn cantor_dimension_and_weights() {
        let m = cantor_measure(3, 0.25, 2, 8, 1).unwrap();
        assert_relative_eq!(m.dim(), 0.5, max_relative = 1e-15);
        assert_eq!(m.len(), 256);
        assert!(m.weights().iter().all(|&w| w == 1.0 / 256.0));
        let m = cantor_measure(4, 0.25, 4, 6, 2).unwrap();
        assert_relative_eq!(m.dim(), 1.0, max_relative = 1e-15);
        assert!(cantor_measure(3, 0.5, 2, 4, 1).is_err());
        assert!(cantor_measure(3, 0.25, 3, 4, 2).is_err());
    }

    #[test]
    fn cantor_nodes_inside_unit_interval() {
        let m = cantor_measure(3, 0.25, 2, 3, 1).unwrap();
        let mut xs: Vec<f64> = (0..m.len()).map(|i| m.node(i)[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert_relative_eq!(xs[0], 0.5 / 64.0, max_relative = 1e-14);
        assert_relative_eq!(xs[7], 1.0 - 0.5 / 64.0, max_relative = 1e-14);
    }

    #[test]
    fn distances() {
        let m = flat_measure(1, 4, Field::constant(1.0), 4.0, 0.5).unwrap();
        assert_eq!(distance_to_support(&m, &[0.3, 0.0, 3.0, 4.0]).unwrap(), 5.0);
        assert!(distance_to_support(&m, &[0.3, 0.0, 0.0, 0.0]).is_err());
        let c = point_cloud(3, 0.5, vec![vec![0.0; 3], vec![1.0, 0.0, 0.0]], vec![1.0, 1.0], None).unwrap();
        assert_relative_eq!(distance_to_support(&c, &[0.0, 0.0, 12.0]).unwrap(), 12.0);
        assert!(distance_to_support(&c, &[0.0, 0.0, 5.0]).is_err());
    }

    #[test]
    fn graph_distance_to_parabola() {
        let psi = vec![Expr::parse("0.5*y1^2").unwrap(), Expr::constant(0.0), Expr::constant(0.0)];
        let m = graph_measure(1, 4, psi, Field::constant(0.0), 3.0, 0.1).unwrap();
        let dd = raw_distance(&m, &[0.3, 2.0, 0.0, 0.0]);
        let best = (0..200000)
            .map(|i| {
                let t = -3.0 + 6.0 * i as f64 / 200000.0;
                ((t - 0.3).powi(2) + (0.5 * t * t - 2.0).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((dd - best).abs() < 1e-8);
    }

    #[test]
    fn determinant_of_small_matrices() {
        let mut m = vec![2.0, 1.0, 1.0, 3.0];
        assert_relative_eq!(determinant(&mut m, 2), 5.0);
    }
}
