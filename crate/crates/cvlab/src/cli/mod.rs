//! Command-line front end: `run`, `verify` and `sweep`.

pub mod bundled;
pub mod config;
pub mod run;
pub mod sweep;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::error;

use crate::error::{CvError, Result};
use config::RunConfig;
use run::Overrides;

#[derive(Debug, Parser)]
#[command(name = "cvlab", version, about = "Invariant-based squeezing control on truncated Fock spaces")]
pub struct Cli {
    /// Output directory (default: out/<config name>).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Override the number of integration steps.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Override the truncation, comma separated per mode (e.g. 100,100).
    #[arg(long, global = true, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// literal | solved (single mode), formula | caption_scaled (two modes).
    #[arg(long, global = true)]
    pub gamma_mode: Option<String>,
    /// Seed for randomized verification inputs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one config. CONFIG is a path or the name of a bundled config.
    Run { config: String },
    /// Run a verification suite: frames | invariance | classical | oracles | all.
    Verify { suite: String },
    /// Run TEMPLATE over the cartesian product of the parameter GRID file.
    Sweep { template: PathBuf, grid: PathBuf },
    /// List the bundled configs.
    Configs,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            steps: self.steps,
            dims: self.dims.clone(),
            gamma_mode: self.gamma_mode.clone(),
            seed: self.seed,
        }
    }
}

/// A path if it exists, otherwise a bundled config name.
pub fn load_config(arg: &str) -> Result<RunConfig> {
    let path = Path::new(arg);
    if path.exists() {
        RunConfig::load(path)
    } else if bundled::names().any(|n| n == arg) {
        bundled::get(arg)
    } else {
        Err(CvError::Config(format!("`{arg}` is neither a file nor a bundled config")))
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = load_config(config)?;
            cli.overrides().apply(&mut cfg)?;
            let out = run::resolve_out_dir(&cfg, cli.out_dir.as_deref());
            let summary = run::execute(&cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if summary.ok() { 0 } else { 2 })
        }
        Command::Verify { suite } => {
            let reports = verify::run_suite(suite, cli.seed.unwrap_or(0))?;
            let pass = reports.iter().all(|r| r.pass);
            let json = serde_json::to_string_pretty(&reports)?;
            if let Some(dir) = &cli.out_dir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join(format!("verify_{suite}.json")), json.clone() + "\n")?;
            }
            println!("{json}");
            Ok(if pass { 0 } else { 1 })
        }
        Command::Sweep { template, grid } => {
            let g = sweep::ParameterGrid::load(grid)?;
            let out = cli.out_dir.clone().unwrap_or_else(|| sweep::default_out_dir(template));
            let rows = sweep::execute(template, &g, &cli.overrides(), &out)?;
            let mut buf = Vec::new();
            sweep::write_aggregate(&mut buf, &rows)?;
            print!("{}", String::from_utf8_lossy(&buf));
            let failed = rows.iter().filter(|r| !matches!(&r.outcome, Ok(s) if s.ok())).count();
            Ok(if failed == 0 { 0 } else { 2 })
        }
        Command::Configs => {
            for name in bundled::names() {
                let cfg = bundled::get(name)?;
                println!("{name}: {}", cfg.description);
            }
            Ok(0)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 64 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            match e {
                CvError::Config(_) | CvError::Json(_) => 65,
                _ => 1,
            }
        }
    }
}
