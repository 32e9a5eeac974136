use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use repro_dp::{cmd_ci, cmd_grid, cmd_pvalue, cmd_replicate, CliError, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "repro-dp", version, about = "Simulation-based inference for privatized summaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Confidence interval for each requested coordinate
    Ci(Common),
    /// p-value over the configured null region
    Pvalue(Common),
    /// Accepted cells of a confidence grid
    Grid(Common),
    /// Replicated coverage or rejection study
    Replicate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for replicates
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides master_seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout when neither this nor the config sets one
    #[arg(long)]
    out: Option<PathBuf>,
    /// More optimizer starts and evaluations
    #[arg(long)]
    paranoid: bool,
    /// Record wall-clock time in runtime_ms
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REPRO_DP_LOG", "warn")).init();
    let cli = Cli::parse();
    let (Command::Ci(c) | Command::Pvalue(c) | Command::Grid(c) | Command::Replicate(c)) = &cli.command;
    let opts = RunOptions {
        jobs: c.jobs,
        seed: c.seed,
        out: c.out.clone(),
        paranoid: c.paranoid,
        timing: c.timing,
    };
    let result = ExperimentConfig::load(&c.config).and_then(|config| -> Result<(), CliError> {
        match &cli.command {
            Command::Ci(_) => cmd_ci(config, &opts).map(drop),
            Command::Pvalue(_) => cmd_pvalue(config, &opts).map(drop),
            Command::Grid(_) => cmd_grid(config, &opts).map(drop),
            Command::Replicate(_) => cmd_replicate(config, &opts).map(drop),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("repro-dp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
