//! Batch runner: single-shot intervals, p-values and grids, and replicated
//! coverage studies written as CSV.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use run::{run_replicates, Experiment, ReplicateReport};

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paranoid: bool,
    /// Fill the `runtime_ms` column. Off by default so reruns are byte-identical.
    pub timing: bool,
}

fn prepare(mut config: ExperimentConfig, opts: &RunOptions) -> CliResult<Experiment> {
    if let Some(s) = opts.seed {
        config.master_seed = s;
    }
    if let Some(o) = &opts.out {
        config.output = Some(o.clone());
    }
    let mut exp = Experiment::new(config)?;
    exp.paranoid = opts.paranoid;
    Ok(exp)
}

fn elapsed(start: Instant, opts: &RunOptions) -> Option<u128> {
    opts.timing.then(|| start.elapsed().as_millis())
}

/// Writes through a temporary file in the target directory, so a failed run
/// leaves no partial output. Without a path the text goes to stdout.
pub fn write_atomic(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(text.as_bytes())?;
            tmp.flush()?;
            tmp.persist(p).map_err(|e| CliError::Io(e.error))?;
            Ok(())
        }
    }
}

pub fn cmd_ci(config: ExperimentConfig, opts: &RunOptions) -> CliResult<String> {
    let exp = prepare(config, opts)?;
    let start = Instant::now();
    let seed = exp.config.master_seed;
    let s = exp.observed(seed)?;
    log::info!("ci: model {} method {} s_obs {:?}", exp.config.model, exp.config.method.label(), s.0);
    let rows = exp.intervals(&s, seed)?;
    let csv = report::ci_csv(&exp, &rows, seed, elapsed(start, opts));
    write_atomic(exp.config.output.as_deref(), &csv)?;
    Ok(csv)
}

pub fn cmd_pvalue(config: ExperimentConfig, opts: &RunOptions) -> CliResult<String> {
    let exp = prepare(config, opts)?;
    if exp.config.null.is_none() {
        return Err(CliError::Config("pvalue needs a null region".into()));
    }
    let start = Instant::now();
    let seed = exp.config.master_seed;
    let s = exp.observed(seed)?;
    log::info!("pvalue: model {} s_obs {:?}", exp.config.model, s.0);
    let row = exp.pvalue(&s, seed)?;
    let csv = report::pvalue_csv(&exp, &row, seed, elapsed(start, opts));
    write_atomic(exp.config.output.as_deref(), &csv)?;
    Ok(csv)
}

pub fn cmd_grid(config: ExperimentConfig, opts: &RunOptions) -> CliResult<String> {
    let exp = prepare(config, opts)?;
    let seed = exp.config.master_seed;
    let s = exp.observed(seed)?;
    log::info!("grid: model {} resolution {}", exp.config.model, exp.config.grid_resolution);
    let grid = exp.grid(&s, seed)?;
    let csv = report::grid_csv(&grid);
    write_atomic(exp.config.output.as_deref(), &csv)?;
    Ok(csv)
}

/// Runs the study and writes the CSV even when replicates fail; more than
/// 1% failures is then reported as an error.
pub fn cmd_replicate(config: ExperimentConfig, opts: &RunOptions) -> CliResult<(String, ReplicateReport)> {
    let exp = prepare(config, opts)?;
    log::info!("replicate: {} x {} ({})", exp.config.replicates, exp.config.model, exp.config.method.label());
    let report = run_replicates(&exp, opts.jobs.max(1))?;
    let csv = report::replicate_csv(&exp, &report);
    write_atomic(exp.config.output.as_deref(), &csv)?;
    if report.failure_rate() > 0.01 {
        return Err(CliError::Replicates {
            failed: report.failed,
            total: report.replicates.len(),
        });
    }
    Ok((csv, report))
}
