//! The `train`, `eval` and `qerror` subcommands: seed sweeps with CSV
//! telemetry, checkpoint files and an append-only run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{SecondsFormat, Utc};

use sarclab::agents::{AgentConfig, AgentState, Algorithm, TrainHooks, TrainRecord, train_loop};
use sarclab::envs::{make_env, EnvSpec, Environment};
use sarclab::eval::{aggregate_seeds, evaluate_policy, q_error, CurveAggregate, SeedCurve};
use sarclab::nnet::{load_checkpoint, save_checkpoint, Mlp};
use sarclab::rng::{stream, stream_rng};

use crate::config::{self, ExperimentConfig};

pub const TRAIN_CSV_HEADER: &str =
    "env_step,mean_return,std_return,q1_mse,q2_mse,q1_ret,q2_ret,actor_loss,q_error";
pub const AGGREGATE_CSV_HEADER: &str = "env_step,mean,std";

/// `{}` on f64 prints the shortest digits that parse back bit-exactly, and
/// literal `NaN` for missing values; both matter for the CSV contract.
fn fmt(x: f64) -> String {
    format!("{x}")
}

pub fn train_csv_text(records: &[TrainRecord]) -> String {
    let mut out = String::from(TRAIN_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.env_step,
            fmt(r.mean_return),
            fmt(r.std_return),
            fmt(r.q1_mse),
            fmt(r.q2_mse),
            fmt(r.q1_ret),
            fmt(r.q2_ret),
            fmt(r.actor_loss),
            fmt(r.q_error),
        );
    }
    out
}

pub fn aggregate_csv_text(agg: &CurveAggregate) -> String {
    let mut out = String::from(AGGREGATE_CSV_HEADER);
    out.push('\n');
    for i in 0..agg.env_steps.len() {
        let _ = writeln!(out, "{},{},{}", agg.env_steps[i], fmt(agg.mean[i]), fmt(agg.std[i]));
    }
    out
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Writes `checkpoint_<step>.txt` files during training and remembers the
/// paths for the manifest.
struct CheckpointWriter {
    dir: PathBuf,
    meta_base: Vec<(String, String)>,
    written: Vec<PathBuf>,
}

impl TrainHooks for CheckpointWriter {
    fn on_checkpoint(
        &mut self,
        env_step: usize,
        agent: &AgentState,
    ) -> std::result::Result<(), Box<dyn std::error::Error + Send + Sync>> {
        let path = self.dir.join(format!("checkpoint_{env_step:09}.txt"));
        let mut meta = self.meta_base.clone();
        meta.push(("env_step".to_string(), env_step.to_string()));
        save_checkpoint(&path, &meta, &agent.checkpoint_nets())?;
        self.written.push(path);
        Ok(())
    }
}

struct SeedOutcome {
    records: Vec<TrainRecord>,
    checkpoints: Vec<PathBuf>,
    error: Option<String>,
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let mut env = make_env(&cfg.env).map_err(|e| anyhow!("{e}"))?;
    let mut agent = AgentState::new(
        cfg.agent.clone(),
        env.spec(),
        &mut stream_rng(seed, stream::INIT),
    );
    let loop_cfg = cfg.loop_config(seed);
    let ckpt_dir = cfg.output_dir.join(format!("seed_{seed}"));
    if loop_cfg.checkpoint_interval > 0 {
        fs::create_dir_all(&ckpt_dir)
            .with_context(|| format!("cannot create {}", ckpt_dir.display()))?;
    }
    let mut hooks = CheckpointWriter {
        dir: ckpt_dir,
        meta_base: vec![
            ("algorithm".to_string(), cfg.agent.algorithm.name().to_string()),
            ("env".to_string(), cfg.env.clone()),
            ("seed".to_string(), seed.to_string()),
        ],
        written: Vec::new(),
    };
    match train_loop(env.as_mut(), &mut agent, &loop_cfg, &mut hooks) {
        Ok(records) => Ok(SeedOutcome { records, checkpoints: hooks.written, error: None }),
        Err(e) => {
            let message = e.to_string();
            Ok(SeedOutcome {
                records: e.records,
                checkpoints: hooks.written,
                error: Some(message),
            })
        }
    }
}

fn relative_name(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}

pub fn cmd_train(config_file: Option<&Path>, overrides: &[String]) -> Result<()> {
    let cfg = config::resolve(config_file, overrides)?;
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create output dir {}", cfg.output_dir.display()))?;

    // The manifest doubles as the resolved config: key = value lines are the
    // canonical config echo, `#` lines carry build/status metadata. It is
    // created before the first seed starts and appended to as runs finish.
    let manifest_path = cfg.output_dir.join("manifest.txt");
    let mut manifest = fs::File::create(&manifest_path)
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;
    writeln!(manifest, "# sarclab run manifest")?;
    writeln!(manifest, "# build: sarclab {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(manifest, "# started: {}", now())?;
    write!(manifest, "{}", cfg.resolved_lines())?;
    manifest.flush()?;

    let mut curves: Vec<SeedCurve> = Vec::new();
    let mut failures = 0usize;
    for &seed in &cfg.seeds {
        println!(
            "seed {seed}: {} on {} for {} steps",
            cfg.agent.algorithm.name(),
            cfg.env,
            cfg.total_steps
        );
        let started = Instant::now();
        let outcome = run_seed(&cfg, seed)?;
        let csv_name = format!("seed_{seed}.csv");
        fs::write(cfg.output_dir.join(&csv_name), train_csv_text(&outcome.records))?;
        for path in &outcome.checkpoints {
            writeln!(manifest, "# seed {seed} checkpoint: {}", relative_name(path, &cfg.output_dir))?;
        }
        match &outcome.error {
            None => {
                writeln!(manifest, "# seed {seed}: ok {csv_name}")?;
                let last = outcome.records.last().map(|r| fmt(r.mean_return));
                println!(
                    "seed {seed}: done in {:.1}s, final mean return {}",
                    started.elapsed().as_secs_f64(),
                    last.unwrap_or_else(|| "n/a".to_string()),
                );
                curves.push(SeedCurve {
                    env_steps: outcome.records.iter().map(|r| r.env_step).collect(),
                    values: outcome.records.iter().map(|r| r.mean_return).collect(),
                });
            }
            Some(message) => {
                failures += 1;
                writeln!(manifest, "# seed {seed}: failed: {message} (partial {csv_name})")?;
                eprintln!("seed {seed}: {message}");
            }
        }
        manifest.flush()?;
    }

    if !curves.is_empty() {
        let agg = aggregate_seeds(&curves).map_err(|e| anyhow!("{e}"))?;
        fs::write(cfg.output_dir.join("aggregate.csv"), aggregate_csv_text(&agg))?;
        writeln!(manifest, "# aggregate: aggregate.csv ({} seeds)", curves.len())?;
    }
    writeln!(manifest, "# manifest: manifest.txt")?;
    writeln!(manifest, "# finished: {}", now())?;
    manifest.flush()?;

    if failures == cfg.seeds.len() {
        bail!("all {failures} seeds failed; see {}", manifest_path.display());
    }
    Ok(())
}

fn meta_value<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Rebuilds a full agent from checkpoint nets: the algorithm tag picks the
/// actor family, the critic input width is checked against the env, and the
/// hidden sizes are read back from the stored q1 shape.
fn agent_from_checkpoint(
    meta: &[(String, String)],
    nets: &[(String, Mlp)],
    spec: &EnvSpec,
) -> Result<AgentState> {
    let algorithm = meta_value(meta, "algorithm")
        .and_then(Algorithm::from_name)
        .ok_or_else(|| anyhow!("checkpoint has no valid `algorithm` meta entry"))?;
    let q1 = nets
        .iter()
        .find(|(name, _)| name == "q1")
        .map(|(_, net)| net)
        .ok_or_else(|| anyhow!("checkpoint has no q1 net"))?;
    let sizes = q1.layer_sizes();
    if sizes[0] != spec.obs_dim + spec.act_dim {
        bail!(
            "checkpoint critic takes {} inputs but the env provides obs+act = {}",
            sizes[0],
            spec.obs_dim + spec.act_dim
        );
    }
    let mut agent_cfg = AgentConfig::for_algorithm(algorithm);
    agent_cfg.hidden_sizes = sizes[1..sizes.len() - 1].to_vec();
    let mut agent = AgentState::new(agent_cfg, spec, &mut stream_rng(0, stream::INIT));
    agent.restore_nets(nets).map_err(|e| anyhow!("{e}"))?;
    Ok(agent)
}

fn resolve_env(explicit: Option<&str>, meta: &[(String, String)]) -> Result<Box<dyn Environment>> {
    let name = explicit
        .or_else(|| meta_value(meta, "env"))
        .ok_or_else(|| anyhow!("no --env given and the checkpoint records none"))?;
    make_env(name).map_err(|e| anyhow!("{e}"))
}

pub fn cmd_eval(checkpoint: &Path, env_name: Option<&str>, episodes: usize, seed: u64) -> Result<()> {
    if episodes == 0 {
        bail!("--episodes must be positive");
    }
    let (meta, nets) = load_checkpoint(checkpoint)
        .map_err(|e| anyhow!("{}: {e}", checkpoint.display()))?;
    let mut env = resolve_env(env_name, &meta)?;
    let agent = agent_from_checkpoint(&meta, &nets, env.spec())?;
    let env_step = meta_value(&meta, "env_step").and_then(|v| v.parse().ok()).unwrap_or(0);
    let record = evaluate_policy(
        env.as_mut(),
        &agent,
        episodes,
        &mut stream_rng(seed, stream::EVAL),
        env_step,
    );
    let returns: Vec<String> = record.returns.iter().map(|&r| fmt(r)).collect();
    println!(
        "{} @ step {}: mean return {} (std {}) over {} episodes [{}]",
        checkpoint.display(),
        record.env_step,
        fmt(record.mean_return),
        fmt(record.std_return),
        episodes,
        returns.join(", "),
    );
    println!("env_step,mean_return,std_return");
    println!("{},{},{}", record.env_step, fmt(record.mean_return), fmt(record.std_return));
    Ok(())
}

pub fn cmd_qerror(
    checkpoint_dir: &Path,
    env_name: Option<&str>,
    gamma: f64,
    episodes: usize,
    seed: u64,
    output: Option<&Path>,
) -> Result<()> {
    if episodes == 0 {
        bail!("--episodes must be positive");
    }
    if !(0.0..=1.0).contains(&gamma) {
        bail!("--gamma must lie in [0, 1], got {gamma}");
    }
    let mut entries: Vec<(usize, PathBuf)> = Vec::new();
    for item in fs::read_dir(checkpoint_dir)
        .with_context(|| format!("cannot read {}", checkpoint_dir.display()))?
    {
        let path = item?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("checkpoint_"))
            .and_then(|n| n.strip_suffix(".txt"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(step) = step {
            entries.push((step, path));
        }
    }
    entries.sort();
    if entries.is_empty() {
        bail!("no checkpoint_<step>.txt files in {}", checkpoint_dir.display());
    }

    let mut env: Option<Box<dyn Environment>> = None;
    let mut text = String::from("env_step,q_error\n");
    for (env_step, path) in &entries {
        let (meta, nets) = load_checkpoint(path).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        if env.is_none() {
            env = Some(resolve_env(env_name, &meta)?);
        }
        let env = env.as_mut().unwrap();
        let agent = agent_from_checkpoint(&meta, &nets, env.spec())?;
        // Each checkpoint gets a fresh rng so its Q-Error depends only on
        // (checkpoint, seed), not on scan order.
        let record = q_error(
            env.as_mut(),
            &agent,
            &agent,
            gamma,
            episodes,
            &mut stream_rng(seed, stream::QERROR),
            *env_step,
        );
        let _ = writeln!(text, "{},{}", record.env_step, fmt(record.q_error));
    }
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
