//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;

use regdist_cli::acceptance::run_suite;
use regdist_cli::config::AcceptanceSection;

fn main() -> ExitCode {
    let cfg = AcceptanceSection::default();
    let results = match run_suite(&cfg, 0, |r| println!("{}", r.summary_line())) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance suite error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed()).map(|r| r.id).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
