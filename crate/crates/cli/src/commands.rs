//! One function per subcommand, each producing a result table.

use regdist_core::bmo::{self, BmoFunction};
use regdist_core::geometry::{sample_exterior_points, MeasureSpec};
use regdist_core::linearized::{asymptotic_constants, family_criterion, flat_functional_eval, PerturbationTestFunction};
use regdist_core::nt_limits::{default_radii, density_recovery};
use regdist_core::operators::{identity_check, magic_refinement, FdStencil};
use regdist_core::pde_reduction::{pde_residual, r2_coefficient, SmoothDensity};
use regdist_core::potentials::{
    distributional_laplacian_check, flat_newton_potential, flat_smooth_distance, newton_potential, smooth_distance, BumpTest,
};
use regdist_core::special::ledger;
use regdist_core::{DiscreteMeasure, Expr, Field, GeometryParams};

use crate::config::{AlphaMode, ExperimentConfig};
use crate::table::{Cell, Table};
use crate::CliError;

/// Table plus the checks that failed; a non-empty list means a nonzero exit.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub failures: Vec<String>,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Outcome {
            table,
            failures: Vec::new(),
        }
    }
}

pub fn constants(params: &GeometryParams) -> Table {
    let mut t = Table::new(&["name", "value"]);
    for (name, v) in ledger(params).entries() {
        t.push(vec![name.into(), Cell::opt(v)]);
    }
    t
}

fn build_measure(cfg: &ExperimentConfig) -> Result<(DiscreteMeasure, GeometryParams), CliError> {
    let m = cfg.require_measure()?.build()?;
    let p = cfg.params(Some((m.ambient_dim(), m.dim())))?;
    Ok((m, p))
}

fn points(cfg: &ExperimentConfig, m: &DiscreteMeasure, default_count: usize, default_range: (f64, f64)) -> Result<Vec<Vec<f64>>, CliError> {
    if !cfg.sampling.points.is_empty() {
        return Ok(cfg.sampling.points.clone());
    }
    let range = cfg.sampling.distance_range.map_or(default_range, |r| (r[0], r[1]));
    Ok(sample_exterior_points(m, cfg.sampling.count.unwrap_or(default_count), cfg.sampling.seed, range)?)
}

fn constant_density(m: &DiscreteMeasure) -> Result<f64, CliError> {
    match m.density().expr.constant_value() {
        Some(rho) if matches!(m.kind(), regdist_core::geometry::SupportKind::FlatPlane) => Ok(rho),
        _ => Err(CliError::Unsupported("closed forms need a flat measure with constant density")),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn flat_distance(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (m, p) = build_measure(cfg)?;
    let rho = constant_density(&m)?;
    let mut t = Table::new(&["x", "delta", "value", "closed_form", "rel_err"]);
    for x in points(cfg, &m, 100, (0.05, 5.0))? {
        let row = match smooth_distance(&m, &p, &x) {
            Ok(v) => {
                let delta = regdist_core::geometry::distance_to_support(&m, &x)?;
                let c = flat_smooth_distance(&p, rho, delta);
                vec![Cell::point(&x), delta.into(), v.into(), c.into(), rel(v, c).into()]
            }
            Err(_) => vec![Cell::point(&x), Cell::Na, Cell::Na, Cell::Na, Cell::Na],
        };
        t.push(row);
    }
    Ok(check_column(t, "rel_err", cfg.tolerances.rel_err))
}

pub fn newton_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (m, p) = build_measure(cfg)?;
    let mut t = Table::new(&["x", "delta", "value", "closed_form", "rel_err"]);
    if let Ok(rho) = constant_density(&m) {
        for x in points(cfg, &m, 20, (0.05, 5.0))? {
            let row = match newton_potential(&m, &p, None, &x) {
                Ok(v) => {
                    let delta = regdist_core::geometry::distance_to_support(&m, &x)?;
                    let c = flat_newton_potential(&p, rho, delta);
                    vec![Cell::point(&x), delta.into(), v.into(), c.into(), rel(v, c).into()]
                }
                Err(_) => vec![Cell::point(&x), Cell::Na, Cell::Na, Cell::Na, Cell::Na],
            };
            t.push(row);
        }
    }
    if let Some(nw) = &cfg.newton {
        let weight = match &nw.weight {
            Some(w) => w.build()?,
            None => Field::constant(1.0),
        };
        let bump = BumpTest {
            centre: nw.bump_centre.clone(),
            radius: nw.bump_radius,
        };
        let c = distributional_laplacian_check(&m, &p, &weight, &bump, nw.samples, cfg.sampling.seed)?;
        t.push(vec![
            format!("distributional:{}", Cell::point(&bump.centre).render()).into(),
            bump.radius.into(),
            c.lhs.into(),
            c.rhs.into(),
            c.rel_err.into(),
        ]);
    }
    Ok(check_column(t, "rel_err", cfg.tolerances.rel_err))
}

pub fn magic_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (m, p) = build_measure(cfg)?;
    let magic = cfg.geometry.alpha_mode == AlphaMode::Magic || p.is_magic();
    let floor = m.validity_floor();
    let range = if floor > 0.0 { (floor * 1.5, floor * 20.0) } else { (0.1, 1.0) };
    let mut t = Table::new(&[
        "x",
        "delta",
        "lap_Dgamma",
        "L_D",
        "identity_residual",
        "fd_order_estimate",
        "lap_Dgamma_normalized",
    ]);
    let tol = cfg.tolerances.residual.unwrap_or(if magic { 1e-4 } else { 1e-3 });
    let mut failures = Vec::new();
    for x in points(cfg, &m, 20, range)? {
        let delta = match regdist_core::geometry::distance_to_support(&m, &x) {
            Ok(d) => d,
            Err(_) => {
                t.push(vec![Cell::point(&x), Cell::Na, Cell::Na, Cell::Na, Cell::Na, Cell::Na, Cell::Na]);
                continue;
            }
        };
        let id = identity_check(&m, &p, &x, &FdStencil::default_for(delta))?;
        let (order, normalized) = if magic {
            let s = magic_refinement(&m, &p, &x, delta / 10.0, 5)?;
            (Cell::opt(s.orders.last().copied()), Cell::opt(s.normalized.last().copied()))
        } else {
            (Cell::Na, Cell::Na)
        };
        let value = if let Cell::Num(v) = normalized { v } else { id.residual };
        if value > tol {
            failures.push(format!("residual {value:e} above {tol:e} at {:?}", x));
        }
        t.push(vec![
            Cell::point(&x),
            delta.into(),
            id.lap_d_gamma.into(),
            id.l_d.into(),
            id.residual.into(),
            order,
            normalized,
        ]);
    }
    Ok(Outcome { table: t, failures })
}

pub fn nt_limit(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = cfg.require_measure()?.build()?;
    let nt = cfg.nt.as_ref().ok_or(CliError::Missing("nt"))?;
    let radii = cfg.sampling.radii.clone().unwrap_or_else(|| default_radii(1.0));
    let mut t = Table::new(&["y0", "eta", "beta", "recovered", "reference", "rel_err", "fit_residual"]);
    for y0 in &nt.y0 {
        for &eta in &nt.etas {
            let row = match density_recovery(&m, y0, nt.beta, eta, &radii) {
                Ok(r) => vec![
                    Cell::point(y0),
                    eta.into(),
                    nt.beta.into(),
                    r.recovered.into(),
                    r.reference.into(),
                    r.rel_err.into(),
                    r.fit.fit_residual.into(),
                ],
                Err(_) => vec![Cell::point(y0), eta.into(), nt.beta.into(), Cell::Na, Cell::Na, Cell::Na, Cell::Na],
            };
            t.push(row);
        }
    }
    Ok(check_column(t, "rel_err", cfg.tolerances.rel_err))
}

pub fn linearized_spectrum(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let s = cfg.spectrum.as_ref().ok_or(CliError::Missing("spectrum"))?;
    let mut t = Table::new(&["n", "d", "alpha", "Cf", "Cg", "Cfp", "Cgp", "verdict"]);
    for &n in &s.ns {
        for &d in &s.ds {
            for &a in &s.alphas {
                let Ok(p) = GeometryParams::new(n, d, a) else { continue };
                let c = asymptotic_constants(&p);
                let verdict = match family_criterion(&p) {
                    Ok(v) => v.as_str().to_string(),
                    Err(e) => format!("error: {e}"),
                };
                t.push(vec![
                    n.into(),
                    d.into(),
                    a.into(),
                    c.cf.into(),
                    Cell::opt(c.cg),
                    c.cf_prime.into(),
                    Cell::opt(c.cg_prime),
                    verdict.into(),
                ]);
            }
        }
    }
    Ok(t.into())
}

pub fn flat_functional(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let f = cfg.functional.as_ref().ok_or(CliError::Missing("functional"))?;
    let p = cfg.params(None)?;
    let phi = PerturbationTestFunction::new(f.phi.build()?)?;
    let pts = if cfg.sampling.points.is_empty() {
        let d = p.d() as usize;
        let spec = MeasureSpec::Flat {
            n: p.n(),
            d,
            density: regdist_core::geometry::FieldSpec::constant(1.0),
            truncation: 2.0,
            cell: 0.5,
        };
        points(cfg, &spec.build()?, 20, (0.1, 3.0))?
    } else {
        cfg.sampling.points.clone()
    };
    let mut t = Table::new(&["x", "value", "scale", "normalized"]);
    for x in pts {
        let v = flat_functional_eval(&phi, &p, &x)?;
        t.push(vec![Cell::point(&x), v.value.into(), v.scale.into(), v.normalized.into()]);
    }
    Ok(t.into())
}

pub fn pde_radii() -> Vec<f64> {
    (0..7).map(|k| 0.01 * 1.5f64.powi(k)).collect()
}

pub fn pde_residual_cmd(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let s = cfg.pde.as_ref().ok_or(CliError::Missing("pde"))?;
    let p = cfg.params(None)?;
    let h = SmoothDensity::new(Expr::parse(&s.density)?, s.dim, s.limit, s.core_radius, (s.bounds[0], s.bounds[1]))?;
    let radii = cfg.sampling.radii.clone().unwrap_or_else(pde_radii);
    let mut t = Table::new(&["y0", "numeric_coeff", "predicted_coeff", "rel_err", "pde_residual"]);
    for y0 in &s.y0 {
        let r = r2_coefficient(&h, &p, y0, &radii)?;
        t.push(vec![
            Cell::point(y0),
            r.numeric.into(),
            r.predicted.into(),
            r.rel_err.into(),
            pde_residual(&h, &p, y0).into(),
        ]);
    }
    Ok(check_column(t, "rel_err", cfg.tolerances.rel_err))
}

pub fn bmo_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let s = cfg.bmo.as_ref().ok_or(CliError::Missing("bmo"))?;
    let seed = cfg.sampling.seed;
    let corpus: Vec<(&str, BmoFunction)> = bmo::corpus(s.dim)?
        .into_iter()
        .filter(|(name, _)| s.functions.is_empty() || s.functions.iter().any(|f| f == name))
        .collect();
    let mut t = Table::new(&["lemma_id", "test_function", "sup_ratio", "samples", "drift"]);
    let pairs = bmo::sample_pairs(s.dim, s.pairs, seed, 10.0, (0.01, 1.0));
    let points = bmo::sample_kernel_points(s.dim, s.points, seed.wrapping_add(1), (1e-2, 1.0), 1e3);
    let mut bounded = Vec::new();
    for (name, f) in &corpus {
        let coarse = bmo::bmo_norm(f, s.depth.saturating_sub(1), s.radius)?;
        let est = bmo::bmo_norm(f, s.depth, s.radius)?;
        let norm = est.norm_estimate;
        let drift = if norm > 0.0 { (norm - coarse.norm_estimate) / norm } else { 0.0 };
        t.push(vec!["bmo_norm".into(), (*name).into(), norm.into(), est.balls.into(), drift.into()]);
        let a = bmo::averages_inequality_ratio(f, &pairs, norm)?;
        t.push(vec!["averages".into(), (*name).into(), a.sup_ratio.into(), a.samples.into(), a.drift.into()]);
        let half = bmo::chain_jump_ratio(f, &vec![0.3; s.dim], 0.01, 12, norm);
        let full = bmo::chain_jump_ratio(f, &vec![0.3; s.dim], 0.01, 24, norm);
        let drift = if full > 0.0 { (full - half) / full } else { 0.0 };
        t.push(vec!["averages_chain".into(), (*name).into(), full.into(), 24usize.into(), drift.into()]);
        if f.field.limit.is_some() {
            let k = bmo::kernel_moment_ratio(f, s.moment, s.beta, &points, norm)?;
            t.push(vec!["kernel_moment".into(), (*name).into(), k.local.sup_ratio.into(), k.local.samples.into(), k.local.drift.into()]);
            t.push(vec![
                "kernel_moment_log".into(),
                (*name).into(),
                k.global.sup_ratio.into(),
                k.global.samples.into(),
                k.global.drift.into(),
            ]);
            bounded.push((*name, f, norm));
        }
    }
    if bounded.len() >= 3 {
        let fs: Vec<(&BmoFunction, f64)> = bounded.iter().take(3).map(|(_, f, n)| (*f, *n)).collect();
        let names: Vec<&str> = bounded.iter().take(3).map(|(n, _, _)| *n).collect();
        let r = bmo::product_moment_ratio(&fs, s.beta, &points)?;
        t.push(vec!["product_moment".into(), names.join("*").into(), r.sup_ratio.into(), r.samples.into(), r.drift.into()]);
    }
    let mut failures = Vec::new();
    let ratio_col = t.column("sup_ratio").unwrap_or_default();
    for (row, ratio) in t.rows.iter().zip(ratio_col) {
        let lemma = match &row[0] {
            Cell::Text(s) => s.as_str(),
            _ => "",
        };
        if lemma == "bmo_norm" {
            continue;
        }
        let drift = match row[4] {
            Cell::Num(v) => v,
            _ => 0.0,
        };
        let finite = matches!(ratio, Cell::Num(v) if v.is_finite());
        if !finite || drift >= 0.1 {
            failures.push(format!("{lemma} on {}: ratio {}, drift {drift:.3}", row[1].render(), ratio.render()));
        }
    }
    Ok(Outcome { table: t, failures })
}

fn check_column(table: Table, column: &str, tol: Option<f64>) -> Outcome {
    let mut failures = Vec::new();
    if let (Some(tol), Some(col)) = (tol, table.column(column)) {
        for (i, c) in col.iter().enumerate() {
            match c {
                Cell::Num(v) if *v <= tol => {}
                other => failures.push(format!("row {i}: {column} = {} exceeds {tol:e}", other.render())),
            }
        }
    }
    Outcome { table, failures }
}
