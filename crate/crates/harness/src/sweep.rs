//! Runs the (agent × seed) grid on a worker pool and merges the rows into
//! one CSV. Each run derives its randomness from its own seed and agent
//! name, and the merge is a sort, so the output bytes do not depend on the
//! number of workers or on scheduling.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::config::{Command, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::experiments::{header, run_job, Row};

/// Version tag written as the first line of every CSV.
pub fn schema_line(command: Command) -> String {
    format!("# enn-bench {} v1\n", command.name())
}

/// CSV bytes for `rows` in the order given.
pub fn csv_bytes(command: Command, rows: &[Row]) -> Result<Vec<u8>> {
    let mut out = schema_line(command).into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        w.write_record(header(command))?;
        for r in rows {
            w.write_record(&r.values)?;
        }
        w.flush()?;
    }
    Ok(out)
}

pub fn write_csv(path: &Path, command: Command, rows: &[Row]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&csv_bytes(command, rows)?)?;
    Ok(())
}

/// Every run of the grid, in merge order.
pub fn jobs(cfg: &ExperimentConfig) -> Vec<(String, u64)> {
    let mut jobs: Vec<(String, u64)> = cfg
        .agents
        .iter()
        .flat_map(|a| (cfg.seed_base..cfg.seed_base + cfg.seeds).map(move |s| (a.clone(), s)))
        .collect();
    jobs.sort();
    jobs
}

/// A run that failed: its agent, its seed and the error.
pub type Failure = (String, u64, HarnessError);

/// Rows of every successful run sorted by (agent, seed, step), and the
/// failures.
pub fn collect(cfg: &ExperimentConfig) -> Result<(Vec<Row>, Vec<Failure>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let results: Vec<_> = pool.install(|| {
        jobs(cfg)
            .into_par_iter()
            .map(|(agent, seed)| {
                let out = run_job(cfg, &agent, seed);
                (agent, seed, out)
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (agent, seed, out) in results {
        match out {
            Ok(r) => rows.extend(r),
            Err(e) => failures.push((agent, seed, e)),
        }
    }
    rows.sort_by(|a, b| (&a.agent, a.seed, a.step).cmp(&(&b.agent, b.seed, b.step)));
    Ok((rows, failures))
}

/// Runs the grid and writes the merged CSV to `cfg.out`. When some runs
/// fail, the rows of the others are still written and an error is returned.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let (rows, failures) = collect(cfg)?;
    write_csv(&cfg.out, cfg.command, &rows)?;
    if let Some((agent, seed, e)) = failures.first() {
        return Err(HarnessError::Runs {
            failed: failures.len(),
            total: jobs(cfg).len(),
            first: format!("{agent} seed {seed}: {e}"),
        });
    }
    Ok(rows)
}
