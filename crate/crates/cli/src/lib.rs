//! Experiment runner for the stickysim models: named experiments that write
//! CSV data plus a JSON summary, and a CSV-to-CSV distribution comparison.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod params;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

pub use error::{CliError, Result};
pub use output::{Artifacts, Summary};

use experiments::Context;
use params::Params;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub out: PathBuf,
    pub params: BTreeMap<String, String>,
}

/// Result of [`execute`]: artifacts still in memory.
#[derive(Debug)]
pub struct Execution {
    pub artifacts: Artifacts,
    pub params: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
}

/// Runs an experiment without touching the filesystem.
pub fn execute(name: &str, seed: u64, params: BTreeMap<String, String>) -> Result<Execution> {
    let experiment = experiments::find(name).ok_or_else(|| {
        CliError::invalid(format!(
            "unknown experiment `{name}` (see `stickysim list`)"
        ))
    })?;
    let start = Instant::now();
    let mut ctx = Context {
        params: Params::new(params),
        seed,
        out: Artifacts::default(),
    };
    experiment.run(&mut ctx)?;
    Ok(Execution {
        artifacts: ctx.out,
        params: ctx.params.resolved().clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs an experiment and writes its CSVs and `summary.json` to `opts.out`.
pub fn run_experiment(name: &str, opts: &RunOptions) -> Result<Summary> {
    let exec = execute(name, opts.seed, opts.params.clone())?;
    exec.artifacts.write_files(&opts.out)?;
    let a = exec.artifacts;
    let summary = Summary {
        experiment: name.to_string(),
        version: output::VERSION.to_string(),
        seed: opts.seed,
        wall_clock_seconds: exec.wall_clock_seconds,
        params: exec.params,
        files: a.file_names().map(String::from).collect(),
        tolerances: a.tolerances,
        residuals: a.residuals,
        tv_distances: a.tv_distances,
        metrics: a.metrics,
        checks: a.checks,
        notes: a.notes,
    };
    summary.write(&opts.out)?;
    Ok(summary)
}
