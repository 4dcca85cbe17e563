//! `tandem` — dual-fidelity regression and closed-loop optimization.
//!
//! Exit codes: 0 on success, 2 for configuration problems (bad flags,
//! malformed or invalid config files, missing inputs), 3 for runtime
//! failures during compute or output writing.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod config;
mod dataset;
mod gen_surfaces;
mod optimize;
mod regress;
mod report;

#[derive(Parser)]
#[command(name = "tandem", version, about = "Dual-fidelity modeling and optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample GP surface pairs binned by rank correlation.
    GenSurfaces(RunArgs),
    /// Learning curves: twin model vs single-fidelity baselines.
    Regress(RunArgs),
    /// Closed-loop campaign suite over one surface.
    Optimize(RunArgs),
    /// Rebuild summary tables from recorded campaign traces.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 1 makes the run byte-reproducible output-for-output.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding manifest.json and the trace files.
    dir: PathBuf,
    /// Where to write the tables (defaults to the trace directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure tagged with which exit code it maps to.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn config_stage<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn runtime_stage<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            anyhow::bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenSurfaces(args) => {
            config_stage(init_threads(args.threads))?;
            let mut cfg: config::GenSurfacesConfig = config_stage(config::load(&args.config))?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            config_stage(cfg.validate())?;
            runtime_stage(gen_surfaces::run(&cfg, &args.out))
        }
        Command::Regress(args) => {
            config_stage(init_threads(args.threads))?;
            let mut cfg: config::RegressConfig = config_stage(config::load(&args.config))?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            config_stage(cfg.validate())?;
            runtime_stage(regress::run(&cfg, &args.out))
        }
        Command::Optimize(args) => {
            config_stage(init_threads(args.threads))?;
            let mut cfg: config::OptimizeConfig = config_stage(config::load(&args.config))?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            config_stage(cfg.validate())?;
            runtime_stage(optimize::run(&cfg, &args.out).map(|_| ()))
        }
        Command::Report(args) => {
            let out = args.out.clone().unwrap_or_else(|| args.dir.clone());
            if !args.dir.is_dir() {
                return Err(Failure::Config(anyhow::anyhow!(
                    "{} is not a directory",
                    args.dir.display()
                )));
            }
            // Everything the report consumes is user-supplied input, so its
            // failures are config-class.
            report::run(&args.dir, &out).map_err(Failure::Config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
