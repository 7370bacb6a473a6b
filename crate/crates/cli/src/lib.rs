//! Experiment runner: configuration, check execution and report output.

// negated float comparisons also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod regions;
pub mod report;

use std::path::PathBuf;

use rayon::prelude::*;

pub use config::{ExperimentConfig, Pipeline};
pub use report::{CheckRecord, ExperimentReport};

/// Environment override for the worker count, below `--jobs`.
pub const JOBS_ENV: &str = "MORREY_LAB_JOBS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("report digest mismatch: recorded {recorded}, computed {computed}")]
    Digest { recorded: String, computed: String },
}

impl CliError {
    /// Process exit status: config and i/o problems are 2; 1 is reserved for
    /// failed hard checks.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub pipeline: Pipeline,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    /// Restrict to these check names; empty means all.
    pub checks: Vec<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { pipeline: Pipeline::All, out: None, jobs: None, seed: None, checks: vec![] }
    }
}

fn resolve_jobs(flag: Option<usize>, cfg: Option<usize>) -> Result<usize, CliError> {
    if let Some(j) = flag {
        return Ok(j);
    }
    if let Ok(v) = std::env::var(JOBS_ENV) {
        return v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{JOBS_ENV}={v:?} is not a thread count")));
    }
    Ok(cfg.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)))
}

/// Runs the selected checks in config order and writes the report when an
/// output directory is known (`opts.out`, else `cfg.out`).
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport, CliError> {
    cfg.validate()?;
    let dims = cfg.problem_dims()?;
    for name in &opts.checks {
        if !cfg.checks.iter().any(|c| c.name() == name) {
            return Err(CliError::Config(format!("no check named {name:?}")));
        }
    }
    let selected: Vec<_> = cfg
        .checks
        .iter()
        .filter(|c| opts.pipeline.includes(c))
        .filter(|c| opts.checks.is_empty() || opts.checks.iter().any(|n| n == c.name()))
        .collect();
    let jobs = resolve_jobs(opts.jobs, cfg.jobs)?;
    if jobs == 0 {
        return Err(CliError::Config("jobs must be at least 1".into()));
    }
    let mut effective = cfg.clone();
    effective.seed = opts.seed.unwrap_or(cfg.seed);
    effective.out = None;
    effective.jobs = None;
    let ctx = checks::Context { cfg: &effective, dims, seed: effective.seed };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let records: Vec<CheckRecord> =
        pool.install(|| selected.par_iter().map(|c| checks::run_check(&ctx, c)).collect());
    let text = toml::to_string(&effective).map_err(|e| CliError::Config(e.to_string()))?;
    let mut report = ExperimentReport::new(effective.seed, text, records);
    report.stamp();
    if let Some(dir) = opts.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from)) {
        report.write(&dir)?;
    }
    Ok(report)
}
