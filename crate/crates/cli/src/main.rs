//! smc-bench: seeded, reproducible experiment runner for the particle
//! filtering library. Parses a flat key-value config, executes the
//! requested mode, and emits CSV reports plus a run manifest.

mod config;
mod psi;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_config, Mode};

/// Output-directory override honored from the environment.
const OUT_ENV: &str = "SMC_BENCH_OUT";

#[derive(Parser)]
#[command(name = "smc-bench", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file.
    Run {
        /// Path to the config file (`section.key = value` lines).
        config: PathBuf,
        /// Override experiment.mode.
        #[arg(long)]
        mode: Option<String>,
        /// Override experiment.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            config,
            mode,
            seed,
            out,
        } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let mut cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(errors) => {
                    for e in &errors {
                        eprintln!("error: {e}");
                    }
                    return ExitCode::from(2);
                }
            };
            if let Some(m) = mode {
                match m.parse::<Mode>() {
                    Ok(m) => cfg.mode = m,
                    Err(e) => {
                        eprintln!("error: --mode: {e}");
                        return ExitCode::from(2);
                    }
                }
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out_dir = out
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(&cfg.out));
            match run::run_experiment(&cfg, &out_dir) {
                Ok(0) => ExitCode::SUCCESS,
                Ok(code) => ExitCode::from(code as u8),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
