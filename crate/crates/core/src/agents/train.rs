//! The interaction loop: observe → act → step → store → update, with
//! periodic evaluation, Q-Error measurement and checkpoint hooks.

use crate::envs::Environment;
use crate::eval::{evaluate_policy, q_error};
use crate::replay::{ReplayBuffer, Transition};
use crate::rng::{stream, stream_rng};

use super::state::{ActMode, AgentState, UpdateError};

#[derive(Clone, Debug)]
pub struct TrainLoopConfig {
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Multiple of eval_interval; 0 disables the diagnostic.
    pub qerror_interval: usize,
    pub qerror_episodes: usize,
    /// 0 disables checkpoint hooks.
    pub checkpoint_interval: usize,
    pub replay_capacity: usize,
    pub seed: u64,
}

impl TrainLoopConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.eval_interval == 0 {
            return Err("eval_interval must be positive".to_string());
        }
        if self.eval_episodes == 0 {
            return Err("eval_episodes must be positive".to_string());
        }
        if self.qerror_interval != 0 {
            if self.qerror_interval % self.eval_interval != 0 {
                return Err(format!(
                    "qerror_interval ({}) must be a multiple of eval_interval ({})",
                    self.qerror_interval, self.eval_interval
                ));
            }
            if self.qerror_episodes == 0 {
                return Err("qerror_episodes must be positive".to_string());
            }
        }
        if self.replay_capacity == 0 {
            return Err("replay_capacity must be positive".to_string());
        }
        Ok(())
    }
}

/// One evaluation-time row of training telemetry. Loss fields are means over
/// the updates since the previous row; fields with nothing to report are NaN
/// (no updates yet, no actor step yet, or no Q-Error at this step).
#[derive(Clone, Copy, Debug)]
pub struct TrainRecord {
    pub env_step: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub q1_mse: f64,
    pub q2_mse: f64,
    pub q1_ret: f64,
    pub q2_ret: f64,
    pub actor_loss: f64,
    pub q_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HookDecision {
    Continue,
    Stop,
}

pub trait TrainHooks {
    fn on_record(&mut self, record: &TrainRecord, agent: &AgentState) -> HookDecision {
        let _ = (record, agent);
        HookDecision::Continue
    }

    fn on_checkpoint(
        &mut self,
        env_step: usize,
        agent: &AgentState,
    ) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        let _ = (env_step, agent);
        Ok(())
    }
}

pub struct NoHooks;

impl TrainHooks for NoHooks {}

#[derive(Debug)]
pub enum TrainAbort {
    Update(UpdateError),
    Hook(Box<dyn std::error::Error + Send + Sync>),
}

/// Training failure carrying the records collected before the abort, so a
/// partial curve can still be flushed to disk.
#[derive(Debug)]
pub struct TrainError {
    pub env_step: usize,
    pub records: Vec<TrainRecord>,
    pub abort: TrainAbort,
}

impl std::fmt::Display for TrainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.abort {
            TrainAbort::Update(e) => write!(f, "training aborted at step {}: {e}", self.env_step),
            TrainAbort::Hook(e) => {
                write!(f, "checkpoint hook failed at step {}: {e}", self.env_step)
            }
        }
    }
}

impl std::error::Error for TrainError {}

#[derive(Default)]
struct TelemetryWindow {
    updates: usize,
    actor_updates: usize,
    q1_mse: f64,
    q2_mse: f64,
    q1_ret: f64,
    q2_ret: f64,
    actor_loss: f64,
}

impl TelemetryWindow {
    fn absorb(&mut self, report: &super::state::LossReport) {
        self.updates += 1;
        self.q1_mse += report.q1_mse;
        self.q2_mse += report.q2_mse;
        self.q1_ret += report.q1_ret;
        self.q2_ret += report.q2_ret;
        if report.actor_updated {
            self.actor_updates += 1;
            self.actor_loss += report.actor_loss;
        }
    }

    fn drain(&mut self) -> (f64, f64, f64, f64, f64) {
        let per_update = |sum: f64| if self.updates > 0 { sum / self.updates as f64 } else { f64::NAN };
        let out = (
            per_update(self.q1_mse),
            per_update(self.q2_mse),
            per_update(self.q1_ret),
            per_update(self.q2_ret),
            if self.actor_updates > 0 { self.actor_loss / self.actor_updates as f64 } else { f64::NAN },
        );
        *self = TelemetryWindow::default();
        out
    }
}

/// Runs the full interaction loop and returns one TrainRecord per evaluation
/// checkpoint. Deterministic for a fixed seed: every random decision draws
/// from one of the per-purpose ChaCha streams derived from `config.seed`.
pub fn train_loop(
    env: &mut dyn Environment,
    agent: &mut AgentState,
    config: &TrainLoopConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<Vec<TrainRecord>, TrainError> {
    config.validate().expect("invalid train loop config");
    let spec = env.spec().clone();
    let mut rollout_rng = stream_rng(config.seed, stream::ROLLOUT);
    let mut update_rng = stream_rng(config.seed, stream::UPDATE);
    let mut reset_rng = stream_rng(config.seed, stream::ENV_RESET);
    let mut eval_rng = stream_rng(config.seed, stream::EVAL);
    let mut qerror_rng = stream_rng(config.seed, stream::QERROR);

    let mut buffer = ReplayBuffer::new(config.replay_capacity, spec.obs_dim, spec.act_dim);
    let mut eval_env = env.clone_env();
    let mut records: Vec<TrainRecord> = Vec::new();
    let mut window = TelemetryWindow::default();

    let mut obs = env.reset(&mut reset_rng);
    for step in 0..config.total_steps {
        let action = agent.act(&obs, ActMode::Explore, &mut rollout_rng, step);
        let sr = env.step(&action);
        buffer.store(&Transition {
            s: obs,
            a: action,
            r: sr.reward,
            s_next: sr.observation.clone(),
            d: sr.terminal,
        });
        obs = if sr.terminal || sr.truncated { env.reset(&mut reset_rng) } else { sr.observation };

        let env_step = step + 1;
        if env_step >= agent.config.update_after && env_step % agent.config.update_every == 0 {
            for _ in 0..agent.config.num_updates {
                match agent.update(&buffer, &mut update_rng) {
                    Ok(report) => window.absorb(&report),
                    Err(e) => {
                        return Err(TrainError {
                            env_step,
                            records,
                            abort: TrainAbort::Update(e),
                        })
                    }
                }
            }
        }

        if env_step % config.eval_interval == 0 {
            let eval = evaluate_policy(
                eval_env.as_mut(),
                agent,
                config.eval_episodes,
                &mut eval_rng,
                env_step,
            );
            let qe = if config.qerror_interval > 0 && env_step % config.qerror_interval == 0 {
                q_error(
                    eval_env.as_mut(),
                    agent,
                    agent,
                    agent.config.gamma,
                    config.qerror_episodes,
                    &mut qerror_rng,
                    env_step,
                )
                .q_error
            } else {
                f64::NAN
            };
            let (q1_mse, q2_mse, q1_ret, q2_ret, actor_loss) = window.drain();
            let record = TrainRecord {
                env_step,
                mean_return: eval.mean_return,
                std_return: eval.std_return,
                q1_mse,
                q2_mse,
                q1_ret,
                q2_ret,
                actor_loss,
                q_error: qe,
            };
            records.push(record);
            if hooks.on_record(&record, agent) == HookDecision::Stop {
                break;
            }
        }

        if config.checkpoint_interval > 0 && env_step % config.checkpoint_interval == 0 {
            if let Err(e) = hooks.on_checkpoint(env_step, agent) {
                return Err(TrainError { env_step, records, abort: TrainAbort::Hook(e) });
            }
        }
    }
    Ok(records)
}
