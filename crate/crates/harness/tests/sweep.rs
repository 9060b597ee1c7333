use std::collections::BTreeSet;
use std::fs;

use enn_harness::config::{Command, ExperimentConfig, Setting};
use enn_harness::sweep::run_sweep;

fn config(command: Command, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let flags: Vec<Setting> = pairs.iter().map(|(k, v)| Setting::flag(k, *v)).collect();
    ExperimentConfig::resolve(Some(command), &[], &flags).unwrap()
}

const SMALL_BANDIT: [(&str, &str); 6] = [
    ("actions", "8"),
    ("dim", "3"),
    ("steps", "30"),
    ("hidden", "8"),
    ("batch_size", "8"),
    ("ensemble_size", "3"),
];

fn run_to_bytes(mut cfg: ExperimentConfig, dir: &std::path::Path, name: &str) -> Vec<u8> {
    cfg.out = dir.join(name);
    run_sweep(&cfg).unwrap();
    fs::read(&cfg.out).unwrap()
}

#[test]
fn rerun_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = SMALL_BANDIT.to_vec();
    pairs.extend([("enn", "epinet"), ("seeds", "1")]);
    let cfg = config(Command::Bandit, &pairs);
    let a = run_to_bytes(cfg.clone(), dir.path(), "a.csv");
    let b = run_to_bytes(cfg, dir.path(), "b.csv");
    assert_eq!(a, b);
}

#[test]
fn worker_count_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = SMALL_BANDIT.to_vec();
    pairs.extend([("enn", "ensemble_plus,mlp,epinet"), ("seeds", "3")]);
    let one = run_to_bytes(config(Command::Bandit, &[&pairs[..], &[("workers", "1")]].concat()), dir.path(), "1.csv");
    let eight = run_to_bytes(config(Command::Bandit, &[&pairs[..], &[("workers", "8")]].concat()), dir.path(), "8.csv");
    assert_eq!(one, eight);
}

#[test]
fn two_agents_by_three_seeds_give_six_sorted_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = SMALL_BANDIT.to_vec();
    pairs.extend([("enn", "mlp,ensemble"), ("seeds", "3"), ("seed_base", "7"), ("workers", "3")]);
    let bytes = run_to_bytes(config(Command::Bandit, &pairs), dir.path(), "grid.csv");
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# enn-bench bandit v1"));
    assert_eq!(
        lines.next(),
        Some("agent,config_hash,seed,step,regret,cum_regret,forward_flops,learnable_params")
    );
    let keys: Vec<(String, u64, u64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(keys.len(), 6 * 30);
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    let blocks: BTreeSet<(String, u64)> = keys.iter().map(|(a, s, _)| (a.clone(), *s)).collect();
    let expected: BTreeSet<(String, u64)> =
        ["ensemble", "mlp"].iter().flat_map(|a| (7..10).map(move |s| (a.to_string(), s))).collect();
    assert_eq!(blocks, expected);
    assert!(!text.contains('\r'));
}

#[test]
fn rows_carry_the_per_agent_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = SMALL_BANDIT.to_vec();
    pairs.extend([("enn", "mlp,dropout"), ("seeds", "1")]);
    let cfg = config(Command::Bandit, &pairs);
    let text = String::from_utf8(run_to_bytes(cfg.clone(), dir.path(), "h.csv")).unwrap();
    for line in text.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], cfg.agent_hash(f[0]));
    }
}

#[test]
fn testbed_and_rl_sweeps_are_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let testbed = [
        ("enn", "mlp,ensemble_plus,epinet"),
        ("seeds", "2"),
        ("dim", "2"),
        ("num_train", "10"),
        ("train_epochs", "20"),
        ("hidden", "8"),
        ("batch_size", "10"),
        ("ensemble_size", "3"),
        ("eval_batches", "5"),
        ("index_samples", "20"),
        ("problems", "2"),
    ];
    let rl = [
        ("enn", "mlp,hypermodel,epinet"),
        ("seeds", "2"),
        ("size", "4"),
        ("episodes", "15"),
        ("hidden", "8"),
        ("batch_size", "8"),
        ("calibration_steps", "10"),
    ];
    for (cmd, pairs) in [(Command::Testbed, &testbed[..]), (Command::Rl, &rl[..])] {
        let one = run_to_bytes(config(cmd, &[pairs, &[("workers", "1")]].concat()), dir.path(), "1.csv");
        let four = run_to_bytes(config(cmd, &[pairs, &[("workers", "4")]].concat()), dir.path(), "4.csv");
        assert_eq!(one, four, "{}", cmd.name());
        let rows = String::from_utf8(one).unwrap().lines().count() - 2;
        let per_run = if cmd == Command::Testbed { 2 * 2 } else { 15 };
        assert_eq!(rows, 3 * 2 * per_run);
    }
}

#[test]
fn failed_runs_report_an_error_after_writing_the_file() {
    let dir = tempfile::tempdir().unwrap();
    // A one-cell chain is rejected, so the only run fails and the file holds just the header.
    let mut cfg = config(Command::Rl, &[("enn", "mlp"), ("seeds", "1"), ("env", "chain"), ("size", "1")]);
    cfg.out = dir.path().join("fail.csv");
    let err = run_sweep(&cfg).unwrap_err();
    assert!(err.to_string().contains("1 of 1 runs failed"), "{err}");
    let text = fs::read_to_string(&cfg.out).unwrap();
    assert_eq!(text.lines().count(), 2);
}
