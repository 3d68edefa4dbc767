//! `tsdsim` command-line front end.

mod commands;
mod config;
mod svg;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tsdsim::tsd::ContactMode;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] tsdsim::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tsdsim", version, about = "Traffic speed deflectometer simulation on layered elastic pavements")]
struct Cli {
    /// JSON run configuration (defaults reproduce the reference setup).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Contact disc model.
    #[arg(long, global = true)]
    contact: Option<ContactMode>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Print the default configuration as JSON and exit.
    #[arg(long)]
    print_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InvertMethod {
    Brent,
    Lookup,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deflection and corrected slope profiles for one modulus.
    Respond {
        /// Modulus of the swept layer, MPa.
        #[arg(long, allow_negative_numbers = true)]
        modulus: f64,
        /// Also write SVG charts.
        #[arg(long)]
        svg: bool,
    },
    /// Slope database and deflection matrix over the modulus sweep.
    Generate {
        /// LO:HI:STEP in MPa.
        #[arg(long)]
        sweep: Option<String>,
        /// Exit 0 even if a sensor column is not strictly monotone.
        #[arg(long)]
        allow_non_monotone: bool,
    },
    /// Backcalculate the modulus for each reading.
    Invert {
        /// CSV with `id,Sn1..Sn7`, or a slope database.
        readings: PathBuf,
        #[arg(long, value_enum, default_value_t = InvertMethod::Brent)]
        method: InvertMethod,
        /// Slope database for `--method lookup`; generated from the sweep if absent.
        #[arg(long)]
        database: Option<PathBuf>,
    },
    /// Run the analytic oracle suite.
    Validate {
        #[arg(long, hide = true)]
        corrupt_kernel: bool,
    },
    /// SVG charts of a slope database or of one modulus.
    Plot {
        #[arg(long)]
        database: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        modulus: Option<f64>,
    },
}

fn settings(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(t) = cli.threads {
        cfg.numerics.threads = t;
    }
    if let Some(c) = cli.contact {
        cfg.tsd.contact_mode = c;
    }
    if let Some(t) = cli.tol {
        cfg.numerics.tolerance = t;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.print_default_config {
        let text = serde_json::to_string_pretty(&RunConfig::default()).expect("config serializes");
        println!("{text}");
        return Ok(());
    }
    let mut cfg = settings(&cli)?;
    let Some(command) = cli.command else {
        return Err(CliError::Input("no command given; see --help".into()));
    };
    if let Command::Generate { sweep: Some(s), .. } = &command {
        let parts: Vec<&str> = s.split(':').collect();
        let nums: Vec<f64> = parts.iter().filter_map(|p| p.trim().parse().ok()).collect();
        if parts.len() != 3 || nums.len() != 3 {
            return Err(CliError::Input(format!("--sweep: expected LO:HI:STEP in MPa, got '{s}'")));
        }
        cfg.sweep.lo_mpa = nums[0];
        cfg.sweep.hi_mpa = nums[1];
        cfg.sweep.step_mpa = nums[2];
        cfg.sweep.values_mpa = None;
    }
    cfg.validate()?;
    if cfg.numerics.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.numerics.threads)
            .build_global()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
    }
    match command {
        Command::Respond { modulus, svg } => commands::respond(&cfg, modulus, svg),
        Command::Generate {
            allow_non_monotone, ..
        } => commands::generate(&cfg, allow_non_monotone),
        Command::Invert {
            readings,
            method,
            database,
        } => commands::invert(&cfg, &readings, method, database.as_deref()),
        Command::Validate { corrupt_kernel } => commands::validate(&cfg, corrupt_kernel),
        Command::Plot { database, modulus } => commands::plot(&cfg, database.as_deref(), modulus),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
