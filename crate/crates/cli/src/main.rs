//! `flagtune` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "flagtune", version, about = "Tune the parameters of a command-line program")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Concurrency limit; overrides the scenario's `jobs`.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory receiving all artifacts.
    #[arg(long, global = true, default_value = "flagtune-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect a parameter space file.
    #[command(subcommand)]
    Space(SpaceCommand),
    /// Sample random configurations on the canary instance and propose space refinements.
    Scan(ScanArgs),
    /// Run a campaign of independent configurator runs and validate the incumbents.
    Tune(TuneArgs),
    /// Validate configurations against the default.
    Validate(ValidateArgs),
    /// Rank the configurations of a validation run log.
    Rank(RankArgs),
    /// Explain a configuration by a greedy path from the default.
    Ablate(AblateArgs),
    /// Write plot data files.
    PlotData(PlotArgs),
}

#[derive(Debug, Subcommand)]
enum SpaceCommand {
    /// Parse a space file and print a summary.
    Check { file: PathBuf },
    /// Print random configurations, one per line.
    Sample {
        file: PathBuf,
        #[arg(short = 'n', long, default_value_t = 10)]
        count: usize,
    },
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long, default_value_t = flagtune::refine::DEFAULT_SCAN_SIZE)]
    samples: usize,
    #[arg(long, default_value_t = 0.9)]
    min_support: f64,
    #[arg(long, default_value_t = 0.05)]
    max_false_positive: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Smbo,
    Random,
}

#[derive(Debug, Args)]
struct TuneArgs {
    /// Independent configurator runs.
    #[arg(long, default_value_t = 25)]
    runs: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Smbo)]
    strategy: StrategyArg,
    /// Validation runs per configuration and instance.
    #[arg(long, default_value_t = 100)]
    validation_runs: usize,
    /// Concurrency limits to validate at (comma separated); defaults to the scenario's.
    #[arg(long, value_delimiter = ',')]
    loads: Vec<usize>,
    /// Configurator runs executed at the same time.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Skip validation.
    #[arg(long)]
    no_validate: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Configuration files (canonical `name=value` form), validated with the default.
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Validation run log (JSON lines).
    log: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Debug, Args)]
struct AblateArgs {
    /// Target configuration file.
    target: PathBuf,
    #[arg(long, default_value_t = flagtune::ablation::DEFAULT_RUNS_PER_EVAL)]
    runs_per_eval: usize,
    /// Instance subset (comma separated); defaults to all.
    #[arg(long, value_delimiter = ',')]
    instances: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlotKind {
    Ecdf,
    Scatter,
    Trajectory,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Run log (ecdf, scatter) or trajectory file (trajectory).
    input: PathBuf,
    /// Configuration label for scatter; all labels for ecdf when omitted.
    #[arg(long)]
    label: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
