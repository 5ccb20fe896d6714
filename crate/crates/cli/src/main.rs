use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use vessel_core::harness::{exit_code, run, Command, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    #[value(name = "solve-1d")]
    Solve1d,
    #[value(name = "solve-3d1d")]
    Solve3d1d,
    Sweep,
    Validate,
    #[value(name = "sample-fields")]
    SampleFields,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Solve1d => Command::Solve1d,
            Sub::Solve3d1d => Command::Solve3d1d,
            Sub::Sweep => Command::Sweep,
            Sub::Validate => Command::Validate,
            Sub::SampleFields => Command::SampleFields,
        }
    }
}

/// Slender-vessel perfusion solver.
///
/// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 failed check.
#[derive(Debug, Parser)]
#[command(name = "vessel", version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for sampled checks, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = match &args.config {
        Some(p) => RunConfig::load(p),
        None => RunConfig::from_json("{}"),
    };
    let mut config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output.dir = out;
    }
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let command: Command = args.command.into();
    let out = config.output.dir.clone();
    let result = run(command, &config, &out);
    match &result {
        Ok(report) => {
            for c in &report.checks {
                println!(
                    "{} {:<40} {:>13.6e} (limit {:.3e})  {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold,
                    c.detail
                );
            }
            for (k, v) in &report.metrics {
                println!("     {k:<40} {v:.6e}");
            }
            println!(
                "{} {} -> {} ({} checks, {} failed)",
                report.command,
                &report.config_hash[..12],
                out.display(),
                report.checks.len(),
                report.failed().len()
            );
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
