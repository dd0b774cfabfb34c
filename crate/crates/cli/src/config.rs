//! Experiment configuration: a flat `key = value` file plus `--key value`
//! command-line overrides, resolved against desk-scale defaults.
//!
//! File grammar, line by line:
//!   - blank lines and lines starting with `#` are ignored
//!   - anything else must be `key = value`; the key ends at the first `=`
//!     and both sides are trimmed
//!   - a key may appear at most once in the file; an override replaces the
//!     file's value for the same key
//!
//! `env`, `algorithm` and `output_dir` are required. Everything else
//! defaults to the desk protocol: 50,000 steps, evaluation every 2,000,
//! Q-Error every 10,000, checkpoints every 10,000, seeds 0..4, and the
//! per-algorithm agent defaults with start_steps shortened to 1,000.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use sarclab::agents::{AgentConfig, Algorithm, TrainLoopConfig};
use sarclab::envs::make_env;

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub env: String,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub qerror_interval: usize,
    pub qerror_episodes: usize,
    pub checkpoint_interval: usize,
    pub replay_capacity: usize,
    pub agent: AgentConfig,
}

/// Splits config-file text into ordered (key, value) pairs. `source` names
/// the file in error messages.
pub fn parse_pairs(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| anyhow!("{source}:{}: expected `key = value`, got {line:?}", i + 1))?;
        if key.is_empty() {
            bail!("{source}:{}: empty key in {line:?}", i + 1);
        }
        if value.is_empty() {
            bail!("{source}:{}: key {key:?} has no value", i + 1);
        }
        if !seen.insert(key.to_string()) {
            bail!("{source}:{}: duplicate key {key:?}", i + 1);
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

/// Parses trailing CLI overrides: `--key value` or `--key=value` tokens.
pub fn parse_override_args(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut it = args.iter();
    while let Some(token) = it.next() {
        let body = token
            .strip_prefix("--")
            .ok_or_else(|| anyhow!("expected an override of the form `--key value`, got {token:?}"))?;
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| anyhow!("override `--{body}` is missing a value"))?;
                (body.to_string(), v.clone())
            }
        };
        if key.is_empty() || value.is_empty() {
            bail!("override {token:?} has an empty key or value");
        }
        if !seen.insert(key.clone()) {
            bail!("duplicate override for key {key:?}");
        }
        out.push((key, value));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| anyhow!("config key {key:?}: cannot parse {value:?}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| parse_num::<T>(key, item.trim()))
        .collect()
}

fn apply(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "env" => cfg.env = value.to_string(),
        "output_dir" => cfg.output_dir = PathBuf::from(value),
        "seeds" => cfg.seeds = parse_list(key, value)?,
        "total_steps" => cfg.total_steps = parse_num(key, value)?,
        "eval_interval" => cfg.eval_interval = parse_num(key, value)?,
        "eval_episodes" => cfg.eval_episodes = parse_num(key, value)?,
        "qerror_interval" => cfg.qerror_interval = parse_num(key, value)?,
        "qerror_episodes" => cfg.qerror_episodes = parse_num(key, value)?,
        "checkpoint_interval" => cfg.checkpoint_interval = parse_num(key, value)?,
        "replay_capacity" => cfg.replay_capacity = parse_num(key, value)?,
        "agent.kappa" => cfg.agent.kappa = parse_num(key, value)?,
        "agent.lambda_ret" => cfg.agent.lambda_ret = parse_num(key, value)?,
        "agent.alpha" => cfg.agent.alpha = parse_num(key, value)?,
        "agent.gamma" => cfg.agent.gamma = parse_num(key, value)?,
        "agent.rho" => cfg.agent.rho = parse_num(key, value)?,
        "agent.actor_lr" => cfg.agent.actor_lr = parse_num(key, value)?,
        "agent.critic_lr" => cfg.agent.critic_lr = parse_num(key, value)?,
        "agent.batch_size" => cfg.agent.batch_size = parse_num(key, value)?,
        "agent.start_steps" => cfg.agent.start_steps = parse_num(key, value)?,
        "agent.update_after" => cfg.agent.update_after = parse_num(key, value)?,
        "agent.update_every" => cfg.agent.update_every = parse_num(key, value)?,
        "agent.num_updates" => cfg.agent.num_updates = parse_num(key, value)?,
        "agent.critic_updates_per_actor_update" => {
            cfg.agent.critic_updates_per_actor_update = parse_num(key, value)?
        }
        "agent.policy_delay" => cfg.agent.policy_delay = parse_num(key, value)?,
        "agent.target_noise_std" => cfg.agent.target_noise_std = parse_num(key, value)?,
        "agent.target_noise_clip" => cfg.agent.target_noise_clip = parse_num(key, value)?,
        "agent.hidden_sizes" => cfg.agent.hidden_sizes = parse_list(key, value)?,
        other => bail!("unknown config key {other:?}"),
    }
    Ok(())
}

/// Resolves defaults → config file → CLI overrides into a validated config.
pub fn resolve(file: Option<&Path>, override_args: &[String]) -> Result<ExperimentConfig> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        pairs = parse_pairs(&text, &path.display().to_string())?;
    }
    for (key, value) in parse_override_args(override_args)? {
        match pairs.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => pairs.push((key, value)),
        }
    }

    let algorithm = pairs
        .iter()
        .find(|(k, _)| k == "algorithm")
        .ok_or_else(|| anyhow!("missing required config key `algorithm`"))
        .and_then(|(_, v)| {
            Algorithm::from_name(v).ok_or_else(|| {
                anyhow!("unknown algorithm {v:?} (expected sac, sarc, delayed-sac, td3 or ddpg)")
            })
        })?;
    let mut agent = AgentConfig::for_algorithm(algorithm);
    agent.start_steps = 1_000;

    let mut cfg = ExperimentConfig {
        env: String::new(),
        output_dir: PathBuf::new(),
        seeds: vec![0, 1, 2, 3, 4],
        total_steps: 50_000,
        eval_interval: 2_000,
        eval_episodes: 10,
        qerror_interval: 10_000,
        qerror_episodes: 10,
        checkpoint_interval: 10_000,
        replay_capacity: 100_000,
        agent,
    };
    for (key, value) in &pairs {
        if key != "algorithm" {
            apply(&mut cfg, key, value)?;
        }
    }
    if cfg.env.is_empty() {
        bail!("missing required config key `env`");
    }
    if cfg.output_dir.as_os_str().is_empty() {
        bail!("missing required config key `output_dir`");
    }
    cfg.validate()?;
    Ok(cfg)
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        make_env(&self.env).map_err(|e| anyhow!("{e}"))?;
        if self.seeds.is_empty() {
            bail!("seeds must be nonempty");
        }
        let mut seen = HashSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                bail!("duplicate seed {s}");
            }
        }
        self.loop_config(0).validate().map_err(|e| anyhow!("{e}"))?;
        self.agent.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(())
    }

    pub fn loop_config(&self, seed: u64) -> TrainLoopConfig {
        TrainLoopConfig {
            total_steps: self.total_steps,
            eval_interval: self.eval_interval,
            eval_episodes: self.eval_episodes,
            qerror_interval: self.qerror_interval,
            qerror_episodes: self.qerror_episodes,
            checkpoint_interval: self.checkpoint_interval,
            replay_capacity: self.replay_capacity,
            seed,
        }
    }

    /// The canonical `key = value` block; feeding it back through `resolve`
    /// reproduces this config exactly.
    pub fn resolved_lines(&self) -> String {
        let a = &self.agent;
        let entries: Vec<(&str, String)> = vec![
            ("env", self.env.clone()),
            ("algorithm", a.algorithm.name().to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("seeds", join(&self.seeds)),
            ("total_steps", self.total_steps.to_string()),
            ("eval_interval", self.eval_interval.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("qerror_interval", self.qerror_interval.to_string()),
            ("qerror_episodes", self.qerror_episodes.to_string()),
            ("checkpoint_interval", self.checkpoint_interval.to_string()),
            ("replay_capacity", self.replay_capacity.to_string()),
            ("agent.kappa", a.kappa.to_string()),
            ("agent.lambda_ret", a.lambda_ret.to_string()),
            ("agent.alpha", a.alpha.to_string()),
            ("agent.gamma", a.gamma.to_string()),
            ("agent.rho", a.rho.to_string()),
            ("agent.actor_lr", a.actor_lr.to_string()),
            ("agent.critic_lr", a.critic_lr.to_string()),
            ("agent.batch_size", a.batch_size.to_string()),
            ("agent.start_steps", a.start_steps.to_string()),
            ("agent.update_after", a.update_after.to_string()),
            ("agent.update_every", a.update_every.to_string()),
            ("agent.num_updates", a.num_updates.to_string()),
            (
                "agent.critic_updates_per_actor_update",
                a.critic_updates_per_actor_update.to_string(),
            ),
            ("agent.policy_delay", a.policy_delay.to_string()),
            ("agent.target_noise_std", a.target_noise_std.to_string()),
            ("agent.target_noise_clip", a.target_noise_clip.to_string()),
            ("agent.hidden_sizes", join(&a.hidden_sizes)),
        ];
        let mut out = String::new();
        for (key, value) in entries {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        }
        out
    }
}
