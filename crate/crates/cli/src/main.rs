use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use homog_core::experiment::{run, ExperimentConfig};
use homog_core::graphs::{census, write_census_csv};
use homog_core::Error;

#[derive(Parser)]
#[command(
    name = "homog",
    version,
    about = "Homogenization experiments with large random potentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output directory (must be absent or empty).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Worker threads for the ensembles.
        #[arg(long, env = "HOMOG_WORKERS", value_name = "N")]
        workers: Option<usize>,
        /// Replaces the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Print graph class counts as CSV.
    Census {
        #[arg(long, default_value_t = 6)]
        nbar_max: usize,
        /// Write to a file instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> homog_core::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.ensemble.seed = s;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed,
        } => {
            let cfg = load(&config, seed)?;
            let setup = cfg.validate()?;
            let dir = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| {
                let kind = serde_json::to_value(cfg.kind).expect("kind serializes");
                PathBuf::from("runs").join(format!(
                    "{}-{}",
                    kind.as_str().unwrap_or("run"),
                    &cfg.hash()[..12]
                ))
            });
            let output = run(&setup, &dir, workers)?;
            for f in &output.files {
                println!("{}", f.display());
            }
        }
        Command::Validate { config } => {
            let cfg = load(&config, None)?;
            cfg.validate()?;
            println!("ok {}", cfg.hash());
        }
        Command::Census { nbar_max, out } => {
            let rows = census(nbar_max)?;
            match out {
                Some(p) => {
                    let f =
                        File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                    write_census_csv(&rows, f)?;
                }
                None => write_census_csv(&rows, io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
