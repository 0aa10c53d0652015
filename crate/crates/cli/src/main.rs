//! Experiment runner for the resonant-beam ISAC simulator.
//!
//! Every reported figure of the modeled system maps onto one subcommand;
//! all outputs are UTF-8 CSV files with LF line endings plus a JSON
//! manifest carrying the config snapshot, master seed, and per-file
//! checksums. Reruns with the same seed produce byte-identical CSVs.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rb_isac::config::{load_config, ConfigError, ScenarioConfig};

/// Exit codes: 0 success, 1 I/O, 2 no resonance, 3 divergence, 4 config
/// error.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    NoResonance { iterations: usize },
    Diverged { iteration: usize, power: f64 },
    Numeric(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Numeric(_) => 1,
            CliError::NoResonance { .. } => 2,
            CliError::Diverged { .. } => 3,
            CliError::Config(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(e) => format!("config error: {e}"),
            CliError::NoResonance { iterations } => {
                format!("no resonance established within {iterations} iterations")
            }
            CliError::Diverged { iteration, power } => {
                format!("loop diverged at iteration {iteration} (power {power:.3e} W)")
            }
            CliError::Numeric(m) => format!("numerical failure: {m}"),
            CliError::Io(e) => format!("io error: {e}"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldStage {
    First,
    Steady,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldDirection {
    Dl,
    Ul,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Iteration,
    Elevation,
    LinkLength,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RmseAxis {
    Snr,
    LinkLength,
}

#[derive(Parser)]
#[command(name = "rb-isac", version, about = "Resonant-beam ISAC link simulator")]
struct Cli {
    /// Scenario file (flat key=value); omitted keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override for all derived random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// CI profile: 8x8 arrays on a 0.5 m link with reduced trial counts.
    #[arg(long, global = true)]
    small: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the oscillation loop to steady state; export gain/loss history.
    Resonate,
    /// Export a spatial field-intensity map.
    Fieldmap {
        #[arg(long, value_enum)]
        stage: FieldStage,
        #[arg(long, value_enum)]
        direction: FieldDirection,
    },
    /// Sweep communication metrics along an axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepAxis,
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        step: Option<f64>,
    },
    /// One MUSIC spectrum of the steady uplink with its located peak.
    Doa {
        /// Use the full receive array instead of the configured sub-array.
        #[arg(long)]
        full_array: bool,
    },
    /// Monte Carlo DOA error sweeps.
    Rmse {
        #[arg(long, value_enum)]
        axis: RmseAxis,
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        step: Option<f64>,
        /// Trials per sweep point (default: the configured Monte Carlo
        /// count).
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// Shrink the scenario to the CI profile.
fn apply_small_profile(cfg: &mut ScenarioConfig) {
    cfg.m_side = 8;
    cfg.n_side = 8;
    cfg.link_length = 0.5;
    cfg.doa_side = 8;
    cfg.snapshots = 64;
    cfg.monte_carlo_trials = 20;
    // The 8x8 aperture couples far more weakly; give the amplifier the
    // headroom to close the loop on the short link.
    cfg.amp_small_signal_gain_db = 30.0;
}

/// Check at startup that a feasible mixer/divider plan locks the
/// configured carrier pair; an inconsistency means the scenario cannot be
/// realized by the conjugating chain and deserves a loud warning.
fn validate_frequency_plan(cfg: &ScenarioConfig) {
    use rb_isac::freqplan::{solve_downlink_frequency, PllPlan, Side};
    match PllPlan::for_carriers(cfg.f1, cfg.f2, Side::Bs) {
        Ok(plan) => match solve_downlink_frequency(&plan, cfg.f2) {
            Ok(f1) if (f1 - cfg.f1).abs() <= 1e-6 * cfg.f1 => {}
            Ok(f1) => eprintln!(
                "warning: frequency plan locks the downlink at {f1} Hz, not the configured {} Hz",
                cfg.f1
            ),
            Err(e) => eprintln!("warning: frequency plan infeasible: {e}"),
        },
        Err(e) => eprintln!("warning: no feasible frequency plan for the carriers: {e}"),
    }
}

fn init_worker_pool() {
    if let Ok(v) = std::env::var("RBISAC_WORKERS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path).map_err(CliError::Config)?,
        None => ScenarioConfig::default(),
    };
    if cli.small {
        apply_small_profile(&mut cfg);
    }
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    let seed = cfg.rng_seed;
    cfg.validate().map_err(CliError::Config)?;
    validate_frequency_plan(&cfg);

    match cli.command {
        Command::Resonate => commands::cmd_resonate(&cfg, seed, &cli.out),
        Command::Fieldmap { stage, direction } => {
            commands::cmd_fieldmap(&cfg, seed, &cli.out, stage, direction)
        }
        Command::Sweep { axis, from, to, step } => {
            commands::cmd_sweep(&cfg, seed, &cli.out, axis, from, to, step)
        }
        Command::Doa { full_array } => {
            if full_array {
                cfg.doa_side = cfg.m_side;
            }
            commands::cmd_doa(&cfg, seed, &cli.out)
        }
        Command::Rmse { axis, from, to, step, trials } => {
            commands::cmd_rmse(&cfg, seed, &cli.out, axis, from, to, step, trials)
        }
    }
}

fn main() -> ExitCode {
    init_worker_pool();
    // Usage mistakes map onto the config-error exit code; clap's default
    // exit of 2 would masquerade as a no-resonance outcome in scripts.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            e.exit()
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(4);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
