use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use regdist_cli::config::Format;
use regdist_cli::{run, Command, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "regdist", version, about = "Experiments on regularized distances to lower-dimensional sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `sampling.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 1 runs serially.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Output directory (default: $REGDIST_OUT_DIR, then `output.dir`, then ./results).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, short, global = true)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        config: cli.config,
        seed: cli.seed,
        jobs: cli.jobs,
        format: cli.format,
        out: cli.out,
        quiet: cli.quiet,
    };
    match run(&cli.command, &opts) {
        Ok(report) => {
            if !opts.quiet {
                println!("wrote {}", report.result_path.display());
            }
            if report.success() {
                ExitCode::SUCCESS
            } else {
                for f in &report.manifest.failures {
                    eprintln!("check failed: {f}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
