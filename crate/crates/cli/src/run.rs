//! Dispatch, output files and manifests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Subcommand;
use regdist_core::geometry::MeasureSpec;
use regdist_core::GeometryParams;
use serde::Serialize;

use crate::acceptance;
use crate::commands::{self, Outcome};
use crate::config::{ExperimentConfig, Format};
use crate::CliError;

pub const OUT_DIR_ENV: &str = "REGDIST_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Print the constants ledger for (n, d, alpha).
    Constants {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Smooth distance on a flat measure against its closed form.
    FlatDistance,
    /// Newton potential against its flat closed form, plus the distributional check.
    NewtonCheck,
    /// Harmonicity of D^gamma at the magic exponent and the pointwise identity.
    MagicCheck {
        /// Measure spec file, overriding the `[measure]` section.
        #[arg(long)]
        measure: Option<PathBuf>,
    },
    /// Non-tangential density recovery.
    NtLimit,
    /// Asymptotic constants and verdicts over a parameter box.
    LinearizedSpectrum,
    /// Flat-functional residuals for a perturbation.
    FlatFunctional,
    /// Order-r^2 coefficient and residual of the reduced density equation.
    PdeResidual,
    /// BMO norm estimates and inequality sup-ratios.
    BmoVerify,
    /// Run the acceptance criteria.
    Acceptance,
}

impl Command {
    pub fn id(&self) -> &'static str {
        match self {
            Command::Constants { .. } => "constants",
            Command::FlatDistance => "flat-distance",
            Command::NewtonCheck => "newton-check",
            Command::MagicCheck { .. } => "magic-check",
            Command::NtLimit => "nt-limit",
            Command::LinearizedSpectrum => "linearized-spectrum",
            Command::FlatFunctional => "flat-functional",
            Command::PdeResidual => "pde-residual",
            Command::BmoVerify => "bmo-verify",
            Command::Acceptance => "acceptance",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    /// Suppress progress lines on stdout.
    pub quiet: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    pub rows: usize,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub result_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.manifest.failures.is_empty()
    }
}

fn load_config(opts: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.sampling.seed = seed;
    }
    Ok(cfg)
}

fn load_measure(path: &Path) -> Result<MeasureSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })
}

fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn execute(command: &Command, cfg: &mut ExperimentConfig, quiet: bool) -> Result<Outcome, CliError> {
    match command {
        Command::Constants { n, d, alpha } => {
            let g = &cfg.geometry;
            let n = n.or(g.n).ok_or(CliError::Missing("n"))?;
            let d = d.or(g.d).ok_or(CliError::Missing("d"))?;
            let a = alpha.or(g.alpha).ok_or(CliError::Missing("alpha"))?;
            cfg.geometry.n = Some(n);
            cfg.geometry.d = Some(d);
            cfg.geometry.alpha = Some(a);
            Ok(commands::constants(&GeometryParams::new(n, d, a)?).into())
        }
        Command::FlatDistance => commands::flat_distance(cfg),
        Command::NewtonCheck => commands::newton_check(cfg),
        Command::MagicCheck { measure } => {
            if let Some(p) = measure {
                cfg.measure = Some(load_measure(p)?);
            }
            commands::magic_check(cfg)
        }
        Command::NtLimit => commands::nt_limit(cfg),
        Command::LinearizedSpectrum => commands::linearized_spectrum(cfg),
        Command::FlatFunctional => commands::flat_functional(cfg),
        Command::PdeResidual => commands::pde_residual_cmd(cfg),
        Command::BmoVerify => commands::bmo_verify(cfg),
        Command::Acceptance => {
            let section = cfg.acceptance.clone().unwrap_or_default();
            let results = acceptance::run_suite(&section, cfg.sampling.seed, |r| {
                if !quiet {
                    println!("{}", r.summary_line());
                }
            })?;
            let failures = results
                .iter()
                .filter(|r| !r.passed())
                .map(|r| format!("criterion {} ({})", r.id, r.name))
                .collect();
            Ok(Outcome {
                table: acceptance::results_table(&results),
                failures,
            })
        }
    }
}

/// Runs one subcommand and writes its result table and manifest.
pub fn run(command: &Command, opts: &RunOptions) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut cfg = load_config(opts)?;
    let format = opts.format.or(cfg.output.format).unwrap_or_default();
    let dir = output_dir(&cfg, opts);
    let outcome = match opts.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| CliError::Invalid(e.to_string()))?
            .install(|| execute(command, &mut cfg, opts.quiet))?,
        None => execute(command, &mut cfg, opts.quiet)?,
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let result_path = dir.join(format!("{}.{ext}", command.id()));
    std::fs::write(&result_path, outcome.table.render(format)).map_err(|e| CliError::Io(result_path.clone(), e))?;
    let manifest = Manifest {
        subcommand: command.id().to_string(),
        config_hash: cfg.semantic_hash(),
        seed: cfg.sampling.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        rows: outcome.table.rows.len(),
        failures: outcome.failures,
    };
    let manifest_path = dir.join(format!("{}.manifest.json", command.id()));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text + "\n").map_err(|e| CliError::Io(manifest_path.clone(), e))?;
    Ok(RunReport {
        result_path,
        manifest_path,
        manifest,
    })
}
