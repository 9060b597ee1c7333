//! Experiment configuration: a flat set of `key = value` settings that can
//! come from a file and from command-line flags, with flags taking
//! precedence. Every setting has a default that depends only on the
//! subcommand, so a config written back out and parsed again is identical.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

/// Which experiment to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Testbed,
    Bandit,
    Rl,
    Example1,
    Correlate,
    ComputeReport,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Testbed,
        Command::Bandit,
        Command::Rl,
        Command::Example1,
        Command::Correlate,
        Command::ComputeReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Testbed => "testbed",
            Command::Bandit => "bandit",
            Command::Rl => "rl",
            Command::Example1 => "example1",
            Command::Correlate => "correlate",
            Command::ComputeReport => "compute-report",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}` (expected one of {})", names(&Command::ALL.map(Command::name))))
    }
}

/// ENN agents known to the harness, in canonical order.
pub const ENN_AGENTS: [&str; 6] = ["mlp", "ensemble", "dropout", "hypermodel", "ensemble_plus", "epinet"];

/// Extra agents available to `example1`.
pub const EXAMPLE1_AGENTS: [&str; 2] = ["exact_ts", "marginal_ts"];

/// Which environment the `rl` command runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlEnv {
    DeepSea,
    Chain,
}

impl RlEnv {
    fn name(self) -> &'static str {
        match self {
            RlEnv::DeepSea => "deep_sea",
            RlEnv::Chain => "chain",
        }
    }
}

impl FromStr for RlEnv {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "deep_sea" => Ok(RlEnv::DeepSea),
            "chain" => Ok(RlEnv::Chain),
            _ => Err(format!("unknown environment `{s}` (expected deep_sea or chain)")),
        }
    }
}

/// ENN architecture and optimiser settings shared by every command.
#[derive(Clone, Debug, PartialEq)]
pub struct NetSettings {
    pub hidden: Vec<usize>,
    pub ensemble_size: usize,
    pub dropout_rate: f64,
    pub index_dim: usize,
    pub prior_scale: f64,
    pub epinet_hidden: Vec<usize>,
    pub epinet_prior_hidden: Vec<usize>,
    pub epinet_prior_scale: f64,
    pub epinet_input: bool,
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// `None` selects the per-variant default.
    pub index_batch: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub agents: Vec<String>,
    pub seeds: u64,
    pub seed_base: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub net: NetSettings,
    /// Input dimension of testbed problems and bandit action features.
    pub dim: usize,
    pub num_train: usize,
    /// Generated problems per testbed seed.
    pub problems: usize,
    pub train_epochs: usize,
    pub taus: Vec<usize>,
    pub eval_batches: usize,
    pub index_samples: usize,
    pub actions: usize,
    pub steps: usize,
    pub replay_capacity: usize,
    pub env: RlEnv,
    pub size: usize,
    pub flip_mask: bool,
    pub episodes: usize,
    pub gamma: f64,
    pub target_period: usize,
    pub calibration_steps: usize,
    pub testbed_csv: PathBuf,
    pub decision_csv: PathBuf,
    pub joint_tau: usize,
    pub marginal_tau: usize,
    pub resamples: usize,
    pub updates: usize,
}

/// Where a bad setting came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    Line(usize),
    Flag,
    Default,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub origin: Origin,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.origin {
            Origin::Line(n) => write!(f, "line {n}: `{}`: {}", self.key, self.message),
            Origin::Flag => write!(f, "flag for `{}`: {}", self.key, self.message),
            Origin::Default => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// One `key = value` setting and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

impl Setting {
    pub fn flag(key: &str, value: impl Into<String>) -> Self {
        Setting {
            key: key.into(),
            value: value.into(),
            origin: Origin::Flag,
        }
    }

    fn error(&self, message: impl Into<String>) -> ConfigError {
        ConfigError {
            origin: self.origin.clone(),
            key: self.key.clone(),
            message: message.into(),
        }
    }
}

/// Keys that change where or how fast results are produced but never the
/// results themselves, so they stay out of the config hash.
const EXECUTION_KEYS: [&str; 2] = ["out", "workers"];

fn names(list: &[&str]) -> String {
    list.join(", ")
}

/// Splits a config file into settings. Blank lines and `#` comments are
/// skipped; everything else must be `key = value`.
pub fn parse_file(text: &str) -> Result<Vec<Setting>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError {
                origin: Origin::Line(i + 1),
                key: line.into(),
                message: "expected `key = value`".into(),
            });
        };
        out.push(Setting {
            key: key.trim().into(),
            value: value.trim().into(),
            origin: Origin::Line(i + 1),
        });
    }
    Ok(out)
}

fn parse<T: FromStr>(s: &Setting, what: &str) -> Result<T, ConfigError> {
    s.value
        .parse()
        .map_err(|_| s.error(format!("expected {what}, got `{}`", s.value)))
}

fn positive(s: &Setting) -> Result<usize, ConfigError> {
    let v: usize = parse(s, "a positive integer")?;
    if v == 0 {
        return Err(s.error("must be positive"));
    }
    Ok(v)
}

fn list<T: FromStr>(s: &Setting, what: &str) -> Result<Vec<T>, ConfigError> {
    s.value
        .split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| s.error(format!("expected a comma-separated list of {what}, got `{}`", s.value)))
        })
        .collect()
}

fn widths(s: &Setting) -> Result<Vec<usize>, ConfigError> {
    let v: Vec<usize> = list(s, "positive integers")?;
    if v.contains(&0) {
        return Err(s.error("layer widths must be positive"));
    }
    Ok(v)
}

fn finite(s: &Setting, lo: f64) -> Result<f64, ConfigError> {
    let v: f64 = parse(s, "a number")?;
    if !v.is_finite() || v < lo {
        return Err(s.error(format!("must be a finite number ≥ {lo}")));
    }
    Ok(v)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults for `command`. RL uses the small-epinet architecture, a
    /// calibrated unit epinet prior and a replay buffer that keeps every
    /// transition of a 5000-episode DeepSea(10) run.
    pub fn defaults(command: Command) -> Self {
        let rl = command == Command::Rl;
        let agents: Vec<String> = match command {
            Command::Example1 => EXAMPLE1_AGENTS.iter().map(|s| s.to_string()).collect(),
            _ => ENN_AGENTS.iter().map(|s| s.to_string()).collect(),
        };
        ExperimentConfig {
            command,
            agents,
            seeds: 5,
            seed_base: 0,
            out: PathBuf::from(format!("{}.csv", command.name())),
            workers: 1,
            net: NetSettings {
                hidden: vec![50, 50],
                ensemble_size: 10,
                dropout_rate: 0.1,
                index_dim: if rl { 2 } else { 8 },
                prior_scale: 1.0,
                epinet_hidden: if rl { vec![50] } else { vec![15, 15] },
                epinet_prior_hidden: vec![10, 10],
                epinet_prior_scale: if rl { 1.0 } else { 0.2 },
                epinet_input: true,
                lambda: 1.0,
                learning_rate: 1e-3,
                batch_size: 128,
                index_batch: None,
            },
            dim: 10,
            num_train: 100,
            problems: 10,
            train_epochs: 50,
            taus: vec![1, 10],
            eval_batches: 100,
            index_samples: 1000,
            actions: if command == Command::Example1 { 10 } else { 100 },
            steps: if command == Command::Example1 { 1000 } else { 10_000 },
            replay_capacity: if rl { 100_000 } else { 10_000 },
            env: RlEnv::DeepSea,
            size: 10,
            flip_mask: true,
            episodes: 5000,
            gamma: 0.99,
            target_period: 4,
            calibration_steps: 100,
            testbed_csv: PathBuf::from("testbed.csv"),
            decision_csv: PathBuf::from("bandit.csv"),
            joint_tau: 10,
            marginal_tau: 1,
            resamples: 1000,
            updates: 1000,
        }
    }

    /// Builds a config from file settings and flag settings. The command
    /// comes from `command` when given, else from a `command` key.
    pub fn resolve(command: Option<Command>, file: &[Setting], flags: &[Setting]) -> Result<Self, ConfigError> {
        let from_settings = file
            .iter()
            .chain(flags)
            .rfind(|s| s.key == "command")
            .map(|s| parse::<Command>(s, "a command name"))
            .transpose()?;
        let command = command.or(from_settings).ok_or_else(|| ConfigError {
            origin: Origin::Default,
            key: "command".into(),
            message: "missing required key".into(),
        })?;
        let mut config = ExperimentConfig::defaults(command);
        for s in file.iter().chain(flags) {
            config.set(s)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Parses a config file on its own (the `command` key is required).
    pub fn from_file_text(text: &str) -> Result<Self, ConfigError> {
        Self::resolve(None, &parse_file(text)?, &[])
    }

    fn set(&mut self, s: &Setting) -> Result<(), ConfigError> {
        let n = &mut self.net;
        match s.key.as_str() {
            "command" => {
                let c: Command = parse(s, "a command name")?;
                if c != self.command {
                    return Err(s.error(format!("conflicts with the `{}` command", self.command.name())));
                }
            }
            "enn" => self.agents = list(s, "agent names")?,
            "seeds" => self.seeds = positive(s)? as u64,
            "seed_base" => self.seed_base = parse(s, "an unsigned integer")?,
            "out" => self.out = PathBuf::from(&s.value),
            "workers" => self.workers = positive(s)?,
            "hidden" => n.hidden = widths(s)?,
            "ensemble_size" => n.ensemble_size = positive(s)?,
            "dropout_rate" => {
                n.dropout_rate = finite(s, 0.0)?;
                if n.dropout_rate >= 1.0 {
                    return Err(s.error("must be below 1"));
                }
            }
            "index_dim" => n.index_dim = positive(s)?,
            "prior_scale" => n.prior_scale = finite(s, 0.0)?,
            "epinet_hidden" => n.epinet_hidden = widths(s)?,
            "epinet_prior_hidden" => n.epinet_prior_hidden = widths(s)?,
            "epinet_prior_scale" => n.epinet_prior_scale = finite(s, 0.0)?,
            "epinet_input" => n.epinet_input = parse(s, "true or false")?,
            "lambda" => n.lambda = finite(s, 0.0)?,
            "learning_rate" => {
                n.learning_rate = finite(s, 0.0)?;
                if n.learning_rate == 0.0 {
                    return Err(s.error("must be positive"));
                }
            }
            "batch_size" => n.batch_size = positive(s)?,
            "index_batch" => {
                n.index_batch = match s.value.as_str() {
                    "auto" => None,
                    _ => Some(positive(s).map_err(|_| s.error(format!("expected `auto` or a positive integer, got `{}`", s.value)))?),
                }
            }
            "dim" => self.dim = positive(s)?,
            "num_train" => self.num_train = positive(s)?,
            "problems" => self.problems = positive(s)?,
            "train_epochs" => self.train_epochs = positive(s)?,
            "taus" => {
                self.taus = list(s, "integers")?;
                if self.taus.iter().any(|t| !(1..=10).contains(t)) {
                    return Err(s.error("every τ must lie in 1..=10"));
                }
            }
            "eval_batches" => self.eval_batches = positive(s)?,
            "index_samples" => self.index_samples = positive(s)?,
            "actions" => self.actions = positive(s)?,
            "steps" => self.steps = positive(s)?,
            "replay_capacity" => self.replay_capacity = positive(s)?,
            "env" => self.env = parse(s, "deep_sea or chain")?,
            "size" => self.size = positive(s)?,
            "flip_mask" => self.flip_mask = parse(s, "true or false")?,
            "episodes" => self.episodes = positive(s)?,
            "gamma" => {
                self.gamma = finite(s, 0.0)?;
                if self.gamma > 1.0 {
                    return Err(s.error("must lie in [0, 1]"));
                }
            }
            "target_period" => self.target_period = positive(s)?,
            "calibration_steps" => self.calibration_steps = parse(s, "an unsigned integer")?,
            "testbed_csv" => self.testbed_csv = PathBuf::from(&s.value),
            "decision_csv" => self.decision_csv = PathBuf::from(&s.value),
            "joint_tau" => self.joint_tau = positive(s)?,
            "marginal_tau" => self.marginal_tau = positive(s)?,
            "resamples" => self.resamples = positive(s)?,
            "updates" => self.updates = positive(s)?,
            _ => return Err(s.error("unknown key")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let allowed: Vec<&str> = match self.command {
            Command::Example1 => ENN_AGENTS.iter().chain(&EXAMPLE1_AGENTS).copied().collect(),
            _ => ENN_AGENTS.to_vec(),
        };
        let bad = |message: String| ConfigError {
            origin: Origin::Default,
            key: "enn".into(),
            message,
        };
        if self.agents.is_empty() {
            return Err(bad("at least one agent is required".into()));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if !allowed.contains(&a.as_str()) {
                return Err(bad(format!("unknown agent `{a}` (expected one of {})", names(&allowed))));
            }
            if self.agents[..i].contains(a) {
                return Err(bad(format!("agent `{a}` listed twice")));
            }
        }
        if self.command == Command::Example1 && self.actions < 2 {
            return Err(ConfigError {
                origin: Origin::Default,
                key: "actions".into(),
                message: "example1 needs at least two actions".into(),
            });
        }
        Ok(())
    }

    /// Every setting in canonical order, as it would appear in a file.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let n = &self.net;
        vec![
            ("command", self.command.name().into()),
            ("enn", self.agents.join(",")),
            ("seeds", self.seeds.to_string()),
            ("seed_base", self.seed_base.to_string()),
            ("out", self.out.display().to_string()),
            ("workers", self.workers.to_string()),
            ("hidden", join(&n.hidden)),
            ("ensemble_size", n.ensemble_size.to_string()),
            ("dropout_rate", n.dropout_rate.to_string()),
            ("index_dim", n.index_dim.to_string()),
            ("prior_scale", n.prior_scale.to_string()),
            ("epinet_hidden", join(&n.epinet_hidden)),
            ("epinet_prior_hidden", join(&n.epinet_prior_hidden)),
            ("epinet_prior_scale", n.epinet_prior_scale.to_string()),
            ("epinet_input", n.epinet_input.to_string()),
            ("lambda", n.lambda.to_string()),
            ("learning_rate", n.learning_rate.to_string()),
            ("batch_size", n.batch_size.to_string()),
            ("index_batch", n.index_batch.map_or("auto".into(), |v| v.to_string())),
            ("dim", self.dim.to_string()),
            ("num_train", self.num_train.to_string()),
            ("problems", self.problems.to_string()),
            ("train_epochs", self.train_epochs.to_string()),
            ("taus", join(&self.taus)),
            ("eval_batches", self.eval_batches.to_string()),
            ("index_samples", self.index_samples.to_string()),
            ("actions", self.actions.to_string()),
            ("steps", self.steps.to_string()),
            ("replay_capacity", self.replay_capacity.to_string()),
            ("env", self.env.name().into()),
            ("size", self.size.to_string()),
            ("flip_mask", self.flip_mask.to_string()),
            ("episodes", self.episodes.to_string()),
            ("gamma", self.gamma.to_string()),
            ("target_period", self.target_period.to_string()),
            ("calibration_steps", self.calibration_steps.to_string()),
            ("testbed_csv", self.testbed_csv.display().to_string()),
            ("decision_csv", self.decision_csv.display().to_string()),
            ("joint_tau", self.joint_tau.to_string()),
            ("marginal_tau", self.marginal_tau.to_string()),
            ("resamples", self.resamples.to_string()),
            ("updates", self.updates.to_string()),
        ]
    }

    /// The config as a file that parses back to the same value.
    pub fn to_file_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Stable 64-bit digest of the result-affecting settings.
    pub fn hash(&self) -> u64 {
        let mut entries = self.entries();
        entries.retain(|(k, _)| !EXECUTION_KEYS.contains(k));
        entries.sort();
        let mut h = Sha256::new();
        for (k, v) in entries {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    /// Hash of this config restricted to a single agent, used to tag rows.
    pub fn agent_hash(&self, agent: &str) -> String {
        let mut single = self.clone();
        single.agents = vec![agent.to_string()];
        format!("{:016x}", single.hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert_eq, prop_assert_ne, proptest};
    use proptest::sample::select;

    fn flags(pairs: &[(&str, &str)]) -> Vec<Setting> {
        pairs.iter().map(|(k, v)| Setting::flag(k, *v)).collect()
    }

    #[test]
    fn flags_select_variant_and_seeds() {
        let c = ExperimentConfig::resolve(Some(Command::Bandit), &[], &flags(&[("enn", "epinet"), ("seeds", "3")])).unwrap();
        assert_eq!(c.agents, vec!["epinet"]);
        assert_eq!(c.seeds, 3);
    }

    #[test]
    fn flags_override_file() {
        let file = parse_file("command = bandit\nseeds = 10\n").unwrap();
        let c = ExperimentConfig::resolve(None, &file, &flags(&[("seeds", "2")])).unwrap();
        assert_eq!(c.seeds, 2);
        let c = ExperimentConfig::resolve(None, &file, &[]).unwrap();
        assert_eq!(c.seeds, 10);
    }

    #[test]
    fn malformed_value_names_key_and_line() {
        let err = ExperimentConfig::from_file_text("command = testbed\n# comment\nindex_dim = eight\n").unwrap_err();
        assert_eq!(err.origin, Origin::Line(3));
        assert_eq!(err.key, "index_dim");
        let text = err.to_string();
        assert!(text.contains("line 3") && text.contains("index_dim") && text.contains("eight"), "{text}");
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        let err = ExperimentConfig::from_file_text("command = rl\n\nepisodez = 4\n").unwrap_err();
        assert_eq!((err.origin, err.key.as_str()), (Origin::Line(3), "episodez"));
        assert!(err.message.contains("unknown key"));
        let err = ExperimentConfig::from_file_text("seeds = 4\n").unwrap_err();
        assert_eq!(err.key, "command");
        assert!(err.to_string().contains("missing required key"));
        let err = ExperimentConfig::from_file_text("command = rl\njust words\n").unwrap_err();
        assert_eq!(err.origin, Origin::Line(2));
    }

    #[test]
    fn agent_names_are_checked() {
        let err = ExperimentConfig::resolve(Some(Command::Bandit), &[], &flags(&[("enn", "exact_ts")])).unwrap_err();
        assert_eq!(err.key, "enn");
        let ok = ExperimentConfig::resolve(Some(Command::Example1), &[], &flags(&[("enn", "exact_ts,epinet")]));
        assert!(ok.is_ok());
        let err = ExperimentConfig::resolve(Some(Command::Rl), &[], &flags(&[("enn", "mlp,mlp")])).unwrap_err();
        assert!(err.message.contains("twice"));
    }

    #[test]
    fn command_key_must_agree_with_subcommand() {
        let file = parse_file("command = rl\n").unwrap();
        let err = ExperimentConfig::resolve(Some(Command::Bandit), &file, &[]).unwrap_err();
        assert_eq!(err.origin, Origin::Line(1));
    }

    #[test]
    fn execution_keys_do_not_change_the_hash() {
        let base = ExperimentConfig::defaults(Command::Bandit);
        let mut moved = base.clone();
        moved.out = PathBuf::from("elsewhere.csv");
        moved.workers = 8;
        assert_eq!(base.hash(), moved.hash());
        assert_ne!(base.agent_hash("mlp"), base.agent_hash("epinet"));
    }

    fn setting_strategy() -> impl proptest::strategy::Strategy<Value = (&'static str, String)> {
        use proptest::prelude::Strategy;
        let keys: Vec<(&'static str, Vec<&'static str>)> = vec![
            ("seeds", vec!["1", "2", "7", "30"]),
            ("seed_base", vec!["0", "5", "1000"]),
            ("hidden", vec!["50,50", "8", "20,20,20"]),
            ("ensemble_size", vec!["1", "10", "30"]),
            ("dropout_rate", vec!["0", "0.1", "0.5"]),
            ("index_dim", vec!["1", "2", "8"]),
            ("prior_scale", vec!["0", "1", "3.5"]),
            ("epinet_prior_scale", vec!["0", "0.2", "1"]),
            ("epinet_input", vec!["true", "false"]),
            ("lambda", vec!["0", "0.1", "1"]),
            ("index_batch", vec!["auto", "5", "20"]),
            ("taus", vec!["1", "1,10", "3,4,5"]),
            ("actions", vec!["2", "100"]),
            ("env", vec!["deep_sea", "chain"]),
            ("flip_mask", vec!["true", "false"]),
            ("gamma", vec!["0.9", "0.99", "1"]),
            ("resamples", vec!["10", "1000"]),
        ];
        select(keys).prop_flat_map(|(k, vals)| select(vals).prop_map(move |v| (k, v.to_string())))
    }

    proptest! {
        #[test]
        fn file_round_trip_is_lossless(
            cmd in select(Command::ALL.to_vec()),
            settings in proptest::collection::vec(setting_strategy(), 0..8),
        ) {
            let fs: Vec<Setting> = settings.iter().map(|(k, v)| Setting::flag(k, v.as_str())).collect();
            let config = ExperimentConfig::resolve(Some(cmd), &[], &fs).unwrap();
            let again = ExperimentConfig::from_file_text(&config.to_file_text()).unwrap();
            prop_assert_eq!(&again, &config);
            prop_assert_eq!(again.hash(), config.hash());
        }

        #[test]
        fn changing_any_setting_changes_the_hash(
            cmd in select(vec![Command::Testbed, Command::Bandit, Command::Rl]),
            (key, value) in setting_strategy(),
        ) {
            let base = ExperimentConfig::defaults(cmd);
            let changed = ExperimentConfig::resolve(Some(cmd), &[], &[Setting::flag(key, value.as_str())]).unwrap();
            if changed == base {
                prop_assert_eq!(changed.hash(), base.hash());
            } else {
                prop_assert_ne!(changed.hash(), base.hash());
            }
        }
    }
}
