use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use enn_harness::compute::{cost_rows, report_compute};
use enn_harness::config::parse_file;
use enn_harness::correlate::correlate_files;
use enn_harness::sweep::{run_sweep, write_csv};
use enn_harness::{Command, ExperimentConfig, HarnessError, Result, Setting};

/// Seeded ENN experiments with CSV output.
#[derive(Parser)]
#[command(name = "enn-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Train on generated classification problems and score joint NLL.
    Testbed(Common),
    /// Thompson sampling on a neural-network bandit.
    Bandit(Common),
    /// ENN-DQN on DeepSea or Chain.
    Rl(Common),
    /// Exact, marginal and ENN Thompson sampling on the one-unknown bandit.
    Example1(Common),
    /// Correlate testbed NLL with bandit regret or RL return.
    Correlate(Common),
    /// Parameter counts, forward multiply-adds and training time per agent.
    ComputeReport(Common),
}

#[derive(Args)]
struct Common {
    /// Comma-separated agent names.
    #[arg(long)]
    enn: Option<String>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Config file of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// `deep_sea` or `chain`.
    #[arg(long)]
    env: Option<String>,
    /// DeepSea grid size.
    #[arg(long)]
    size: Option<usize>,
    /// Chain length.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    no_flip_mask: bool,
    /// Testbed CSV read by `correlate`.
    #[arg(long)]
    testbed: Option<PathBuf>,
    /// Bandit or RL CSV read by `correlate`.
    #[arg(long)]
    decision: Option<PathBuf>,
    /// Any config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn flags(&self) -> Result<Vec<Setting>> {
        let mut flags = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                flags.push(Setting::flag(key, v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        push("enn", self.enn.clone());
        push("seeds", self.seeds.map(|v| v.to_string()));
        push("seed_base", self.seed_base.map(|v| v.to_string()));
        push("out", path(&self.out));
        push("workers", self.workers.map(|v| v.to_string()));
        push("actions", self.actions.map(|v| v.to_string()));
        push("dim", self.dim.map(|v| v.to_string()));
        push("steps", self.steps.map(|v| v.to_string()));
        push("episodes", self.episodes.map(|v| v.to_string()));
        push("env", self.env.clone());
        push("size", self.size.map(|v| v.to_string()));
        push("size", self.length.map(|v| v.to_string()));
        push("flip_mask", self.no_flip_mask.then(|| "false".to_string()));
        push("testbed_csv", path(&self.testbed));
        push("decision_csv", path(&self.decision));
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| HarnessError::Data(format!("--set expects key=value, got `{s}`")))?;
            flags.push(Setting::flag(k.trim(), v.trim()));
        }
        Ok(flags)
    }

    fn resolve(&self, command: Command) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => parse_file(&std::fs::read_to_string(p)?)?,
            None => Vec::new(),
        };
        Ok(ExperimentConfig::resolve(Some(command), &file, &self.flags()?)?)
    }
}

fn run(cli: Cli) -> Result<()> {
    let (command, common) = match &cli.command {
        Sub::Testbed(c) => (Command::Testbed, c),
        Sub::Bandit(c) => (Command::Bandit, c),
        Sub::Rl(c) => (Command::Rl, c),
        Sub::Example1(c) => (Command::Example1, c),
        Sub::Correlate(c) => (Command::Correlate, c),
        Sub::ComputeReport(c) => (Command::ComputeReport, c),
    };
    let cfg = common.resolve(command)?;
    match command {
        Command::Correlate => {
            let report = correlate_files(&cfg)?;
            write_csv(&cfg.out, command, &report.rows())?;
            for (nll, method, iv) in report.entries() {
                println!("{nll:>8} {method:<8} {:+.3}  [{:+.3}, {:+.3}]", iv.estimate, iv.lo, iv.hi);
            }
            println!("{} points", report.points.len());
        }
        Command::ComputeReport => {
            let costs = report_compute(&cfg, true)?;
            write_csv(&cfg.out, command, &cost_rows(&cfg, &costs))?;
        }
        _ => {
            let rows = run_sweep(&cfg)?;
            eprintln!("wrote {} rows to {}", rows.len(), cfg.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
