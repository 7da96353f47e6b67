mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use reclab_core::verify::Suite;

use commands::{Outcome, VerifyScope};
use config::{
    load, BoundsConfig, EmulateConfig, ProgressConfig, ReductionConfig, SortConfig, VerifyConfig,
};
use output::{Format, Report};

/// Exact simulation of recording query oracles, progress measures,
/// success bounds and collision-finding experiments.
#[derive(Parser)]
#[command(name = "reclab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config for the subcommand (defaults when absent).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one invariant suite.
    Verify {
        /// oracle-equivalence | indistinguishability | support | unitarity |
        /// recurrences | bounds-domination | hash-exactness
        suite: String,
    },
    /// Progress-measure tables of random algorithms, checked cell by cell.
    Progress,
    /// Tradeoff curves and success-bound tables.
    Bounds,
    /// Event frequencies and full runs of the ED-based collision finder.
    Reduction,
    /// Query-count scaling of the space-bounded multi-collision finder.
    Emulate2,
    /// Build an instance of the rank-window sorting reduction.
    SortInstance,
}

/// Config problems exit with 2, like usage errors.
struct ConfigError(anyhow::Error);

fn run(cli: Cli) -> Result<Result<Outcome, ConfigError>> {
    let text = match &cli.config {
        Some(p) => {
            Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
        }
        None => None,
    };
    let text = text.as_deref();
    macro_rules! cfg {
        ($t:ty) => {
            match load::<$t>(text, cli.seed) {
                Ok(c) => c,
                Err(e) => return Ok(Err(ConfigError(e))),
            }
        };
    }
    let (dir, fmt) = (&cli.out, cli.format);
    let outcome = match &cli.command {
        Command::Verify { suite } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => return Ok(Err(ConfigError(e.into()))),
            };
            let grid = cfg!(VerifyConfig);
            let scope = VerifyScope { suite, grid: &grid };
            commands::verify(&scope, Report::new(dir, "verify", &scope, fmt)?)?
        }
        Command::Progress => {
            let c = cfg!(ProgressConfig);
            commands::progress(&c, Report::new(dir, "progress", &c, fmt)?)?
        }
        Command::Bounds => {
            let c = cfg!(BoundsConfig);
            commands::bounds(&c, Report::new(dir, "bounds", &c, fmt)?)?
        }
        Command::Reduction => {
            let c = cfg!(ReductionConfig);
            commands::reduction(&c, Report::new(dir, "reduction", &c, fmt)?)?
        }
        Command::Emulate2 => {
            let c = cfg!(EmulateConfig);
            commands::emulate2(&c, Report::new(dir, "emulate2", &c, fmt)?)?
        }
        Command::SortInstance => {
            let c = cfg!(SortConfig);
            commands::sort_instance(&c, Report::new(dir, "sort-instance", &c, fmt)?)?
        }
    };
    Ok(Ok(outcome))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
        {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(Ok(outcome)) => {
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("assertion failure");
                ExitCode::from(1)
            }
        }
        Ok(Err(ConfigError(e))) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
