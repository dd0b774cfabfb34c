//! Agent state: networks, optimizers, counters, and the per-iteration update.
//!
//! Update order within one iteration: sample batch → compute targets → Adam
//! step on each critic → (cadence-gated) Adam step on the actor → Polyak on
//! the target nets → snapshot φ_prev ← φ for the stochastic family. The
//! previous-critic snapshot is taken at the very end, so at entry of the next
//! iteration φ_prev holds this iteration's post-update parameters.

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::envs::EnvSpec;
use crate::nnet::{adam_step, polyak_update, AdamState, Mlp, NnetError};
use crate::nnet::Activation;
use crate::policy::{DeterministicActor, SquashedGaussianActor};
use crate::replay::ReplayBuffer;

use super::config::{AgentConfig, Algorithm};
use super::losses::{
    compute_critic_target, ddpg_target, deterministic_actor_loss, mse_critic_loss,
    sac_actor_loss, td3_target, total_retrospective_loss,
};

/// Exploration noise for the deterministic actors, in action-scale units.
const EXPLORATION_NOISE_STD: f64 = 0.1;

/// The six critic networks: two mains, their Polyak targets, and the frozen
/// previous-step snapshots used by the retrospective regularizer. Directly
/// after construction targ and prev equal main.
#[derive(Clone, Debug)]
pub struct CriticPair {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_targ: Mlp,
    pub q2_targ: Mlp,
    pub q1_prev: Mlp,
    pub q2_prev: Mlp,
}

impl CriticPair {
    /// Draw order: q1, then q2.
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut dyn RngCore) -> Self {
        let mut sizes = vec![obs_dim + act_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let q1 = Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng);
        let q2 = Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng);
        Self::from_mains(q1, q2)
    }

    pub fn from_mains(q1: Mlp, q2: Mlp) -> Self {
        assert!(q1.same_shape(&q2), "twin critics must be shape-identical");
        let q1_targ = q1.snapshot();
        let q2_targ = q2.snapshot();
        let q1_prev = q1.snapshot();
        let q2_prev = q2.snapshot();
        CriticPair { q1, q2, q1_targ, q2_targ, q1_prev, q2_prev }
    }

    /// min(Q₁, Q₂) at a single state-action pair.
    pub fn q_min(&self, obs: &[f64], action: &[f64]) -> f64 {
        let x = crate::nnet::Matrix::from_row(&[obs, action].concat());
        let q1 = self.q1.forward_output(&x).get(0, 0);
        let q2 = self.q2.forward_output(&x).get(0, 0);
        q1.min(q2)
    }
}

/// Per-update telemetry. On iterations where the actor update is skipped by
/// cadence, `actor_updated` is false and the actor fields repeat the values
/// from the most recent actor step.
#[derive(Clone, Copy, Debug)]
pub struct LossReport {
    pub q1_mse: f64,
    pub q2_mse: f64,
    pub q1_ret: f64,
    pub q2_ret: f64,
    pub actor_loss: f64,
    pub mean_q: f64,
    pub mean_log_prob: f64,
    pub actor_updated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Explore,
    Exploit,
}

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error("non-finite {what} loss at update iteration {iter}: {value}")]
    NonFiniteLoss { what: &'static str, iter: u64, value: f64 },
    #[error("optimizer rejected gradients at update iteration {iter}: {source}")]
    Optimizer { iter: u64, source: NnetError },
}

enum ActorState {
    Gaussian {
        actor: SquashedGaussianActor,
        trunk_adam: AdamState,
        mean_adam: AdamState,
        log_std_adam: AdamState,
    },
    Deterministic {
        actor: DeterministicActor,
        actor_targ: DeterministicActor,
        adam: AdamState,
    },
}

pub struct AgentState {
    pub config: AgentConfig,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    actor: ActorState,
    pub critics: CriticPair,
    q1_adam: AdamState,
    q2_adam: AdamState,
    /// Completed update iterations (used for cadence gating).
    pub update_iter: u64,
    /// Critic update events (one per iteration; both twins step together).
    pub critic_adam_steps: u64,
    /// Actor Adam steps actually taken.
    pub actor_adam_steps: u64,
    last_actor_loss: f64,
    last_mean_q: f64,
    last_mean_log_prob: f64,
}

impl AgentState {
    /// Network draw order: actor nets first (trunk, mean head, log-std head
    /// for the stochastic family; the single policy net otherwise), then q1,
    /// then q2.
    pub fn new(config: AgentConfig, spec: &EnvSpec, rng: &mut dyn RngCore) -> Self {
        config.validate().expect("invalid agent config");
        let obs_dim = spec.obs_dim;
        let act_dim = spec.act_dim;
        let actor = if config.algorithm.is_stochastic() {
            let actor = SquashedGaussianActor::new(
                obs_dim,
                act_dim,
                &config.hidden_sizes,
                &spec.action_low,
                &spec.action_high,
                rng,
            );
            ActorState::Gaussian {
                trunk_adam: AdamState::new(&actor.trunk),
                mean_adam: AdamState::new(&actor.mean_head),
                log_std_adam: AdamState::new(&actor.log_std_head),
                actor,
            }
        } else {
            let actor = DeterministicActor::new(
                obs_dim,
                act_dim,
                &config.hidden_sizes,
                &spec.action_low,
                &spec.action_high,
                EXPLORATION_NOISE_STD,
                rng,
            );
            let actor_targ = actor.clone();
            ActorState::Deterministic {
                adam: AdamState::new(&actor.net),
                actor_targ,
                actor,
            }
        };
        let critics = CriticPair::new(obs_dim, act_dim, &config.hidden_sizes, rng);
        let q1_adam = AdamState::new(&critics.q1);
        let q2_adam = AdamState::new(&critics.q2);
        AgentState {
            config,
            obs_dim,
            act_dim,
            action_low: spec.action_low.clone(),
            action_high: spec.action_high.clone(),
            actor,
            critics,
            q1_adam,
            q2_adam,
            update_iter: 0,
            critic_adam_steps: 0,
            actor_adam_steps: 0,
            last_actor_loss: 0.0,
            last_mean_q: 0.0,
            last_mean_log_prob: 0.0,
        }
    }

    pub fn gaussian_actor(&self) -> Option<&SquashedGaussianActor> {
        match &self.actor {
            ActorState::Gaussian { actor, .. } => Some(actor),
            ActorState::Deterministic { .. } => None,
        }
    }

    pub fn deterministic_actor(&self) -> Option<&DeterministicActor> {
        match &self.actor {
            ActorState::Gaussian { .. } => None,
            ActorState::Deterministic { actor, .. } => Some(actor),
        }
    }

    /// Test-time action: the policy mean / net output, no rng consumed.
    pub fn deterministic_action(&self, obs: &[f64]) -> Vec<f64> {
        match &self.actor {
            ActorState::Gaussian { actor, .. } => actor.deterministic_action(obs),
            ActorState::Deterministic { actor, .. } => actor.deterministic_action(obs),
        }
    }

    /// min over the twin critics, except DDPG which learns a single critic.
    pub fn q_min(&self, obs: &[f64], action: &[f64]) -> f64 {
        if self.config.algorithm == Algorithm::Ddpg {
            let x = crate::nnet::Matrix::from_row(&[obs, action].concat());
            self.critics.q1.forward_output(&x).get(0, 0)
        } else {
            self.critics.q_min(obs, action)
        }
    }

    pub fn act(
        &self,
        obs: &[f64],
        mode: ActMode,
        rng: &mut dyn RngCore,
        total_steps_so_far: usize,
    ) -> Vec<f64> {
        match mode {
            ActMode::Exploit => self.deterministic_action(obs),
            ActMode::Explore => {
                if total_steps_so_far < self.config.start_steps {
                    return (0..self.act_dim)
                        .map(|j| rng.random_range(self.action_low[j]..self.action_high[j]))
                        .collect();
                }
                match &self.actor {
                    ActorState::Gaussian { actor, .. } => {
                        let states = crate::nnet::Matrix::from_row(obs);
                        let (actions, _, _) = actor.sample(&states, rng);
                        actions.row(0).to_vec()
                    }
                    ActorState::Deterministic { actor, .. } => actor.noisy_action(obs, rng),
                }
            }
        }
    }

    pub fn update(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut dyn RngCore,
    ) -> Result<LossReport, UpdateError> {
        match self.config.algorithm {
            Algorithm::Sac | Algorithm::Sarc | Algorithm::DelayedSac => {
                self.sac_family_update(buffer, rng)
            }
            Algorithm::Td3 => self.td3_update(buffer, rng),
            Algorithm::Ddpg => self.ddpg_update(buffer, rng),
        }
    }

    fn opt_err(iter: u64) -> impl FnOnce(NnetError) -> UpdateError {
        move |source| UpdateError::Optimizer { iter, source }
    }

    fn sac_family_update(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut dyn RngCore,
    ) -> Result<LossReport, UpdateError> {
        let cfg = &self.config;
        let batch = buffer.sample_batch(rng, cfg.batch_size);
        let ActorState::Gaussian { actor, trunk_adam, mean_adam, log_std_adam } = &mut self.actor
        else {
            unreachable!("stochastic algorithms always hold a Gaussian actor");
        };

        let targets = compute_critic_target(
            &batch,
            actor,
            &self.critics.q1_targ,
            &self.critics.q2_targ,
            cfg.alpha,
            cfg.gamma,
            rng,
        );

        let out1 = total_retrospective_loss(
            &self.critics.q1,
            &self.critics.q1_prev,
            &batch,
            &targets,
            cfg.kappa,
            cfg.lambda_ret,
        );
        let out2 = total_retrospective_loss(
            &self.critics.q2,
            &self.critics.q2_prev,
            &batch,
            &targets,
            cfg.kappa,
            cfg.lambda_ret,
        );
        let iter = self.update_iter;
        for (what, v) in [("q1", out1.total), ("q2", out2.total)] {
            if !v.is_finite() {
                return Err(UpdateError::NonFiniteLoss { what, iter, value: v });
            }
        }
        adam_step(&mut self.critics.q1, &out1.grads, &mut self.q1_adam, cfg.critic_lr)
            .map_err(Self::opt_err(iter))?;
        adam_step(&mut self.critics.q2, &out2.grads, &mut self.q2_adam, cfg.critic_lr)
            .map_err(Self::opt_err(iter))?;
        self.critic_adam_steps += 1;

        let do_actor = iter % cfg.critic_updates_per_actor_update as u64 == 0;
        if do_actor {
            let aout = sac_actor_loss(
                actor,
                &self.critics.q1,
                &self.critics.q2,
                &batch.s,
                cfg.alpha,
                rng,
            );
            if !aout.loss.is_finite() {
                return Err(UpdateError::NonFiniteLoss { what: "actor", iter, value: aout.loss });
            }
            adam_step(&mut actor.trunk, &aout.grads.trunk, trunk_adam, cfg.actor_lr)
                .map_err(Self::opt_err(iter))?;
            adam_step(&mut actor.mean_head, &aout.grads.mean, mean_adam, cfg.actor_lr)
                .map_err(Self::opt_err(iter))?;
            adam_step(&mut actor.log_std_head, &aout.grads.log_std, log_std_adam, cfg.actor_lr)
                .map_err(Self::opt_err(iter))?;
            self.actor_adam_steps += 1;
            self.last_actor_loss = aout.loss;
            self.last_mean_q = aout.mean_q;
            self.last_mean_log_prob = aout.mean_log_prob;
        }

        polyak_update(&mut self.critics.q1_targ, &self.critics.q1, cfg.rho);
        polyak_update(&mut self.critics.q2_targ, &self.critics.q2, cfg.rho);

        self.critics.q1_prev = self.critics.q1.snapshot();
        self.critics.q2_prev = self.critics.q2.snapshot();

        self.update_iter += 1;
        Ok(LossReport {
            q1_mse: out1.mse,
            q2_mse: out2.mse,
            q1_ret: out1.ret,
            q2_ret: out2.ret,
            actor_loss: self.last_actor_loss,
            mean_q: self.last_mean_q,
            mean_log_prob: self.last_mean_log_prob,
            actor_updated: do_actor,
        })
    }

    fn td3_update(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut dyn RngCore,
    ) -> Result<LossReport, UpdateError> {
        let cfg = &self.config;
        let batch = buffer.sample_batch(rng, cfg.batch_size);
        let ActorState::Deterministic { actor, actor_targ, adam } = &mut self.actor else {
            unreachable!("td3 always holds a deterministic actor");
        };

        let targets = td3_target(
            &batch,
            actor_targ,
            &self.critics.q1_targ,
            &self.critics.q2_targ,
            cfg.gamma,
            cfg.target_noise_std,
            cfg.target_noise_clip,
            rng,
        );
        let (mse1, grads1) = mse_critic_loss(&self.critics.q1, &batch, &targets);
        let (mse2, grads2) = mse_critic_loss(&self.critics.q2, &batch, &targets);
        let iter = self.update_iter;
        for (what, v) in [("q1", mse1), ("q2", mse2)] {
            if !v.is_finite() {
                return Err(UpdateError::NonFiniteLoss { what, iter, value: v });
            }
        }
        adam_step(&mut self.critics.q1, &grads1, &mut self.q1_adam, cfg.critic_lr)
            .map_err(Self::opt_err(iter))?;
        adam_step(&mut self.critics.q2, &grads2, &mut self.q2_adam, cfg.critic_lr)
            .map_err(Self::opt_err(iter))?;
        self.critic_adam_steps += 1;

        let do_actor = iter % cfg.policy_delay as u64 == 0;
        if do_actor {
            let (loss, agrads, mean_q) =
                deterministic_actor_loss(actor, &self.critics.q1, &batch.s);
            if !loss.is_finite() {
                return Err(UpdateError::NonFiniteLoss { what: "actor", iter, value: loss });
            }
            adam_step(&mut actor.net, &agrads, adam, cfg.actor_lr).map_err(Self::opt_err(iter))?;
            self.actor_adam_steps += 1;
            self.last_actor_loss = loss;
            self.last_mean_q = mean_q;

            polyak_update(&mut self.critics.q1_targ, &self.critics.q1, cfg.rho);
            polyak_update(&mut self.critics.q2_targ, &self.critics.q2, cfg.rho);
            polyak_update(&mut actor_targ.net, &actor.net, cfg.rho);
        }

        self.update_iter += 1;
        Ok(LossReport {
            q1_mse: mse1,
            q2_mse: mse2,
            q1_ret: 0.0,
            q2_ret: 0.0,
            actor_loss: self.last_actor_loss,
            mean_q: self.last_mean_q,
            mean_log_prob: 0.0,
            actor_updated: do_actor,
        })
    }

    fn ddpg_update(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut dyn RngCore,
    ) -> Result<LossReport, UpdateError> {
        let cfg = &self.config;
        let batch = buffer.sample_batch(rng, cfg.batch_size);
        let ActorState::Deterministic { actor, actor_targ, adam } = &mut self.actor else {
            unreachable!("ddpg always holds a deterministic actor");
        };

        let targets = ddpg_target(&batch, actor_targ, &self.critics.q1_targ, cfg.gamma);
        let (mse, grads) = mse_critic_loss(&self.critics.q1, &batch, &targets);
        let iter = self.update_iter;
        if !mse.is_finite() {
            return Err(UpdateError::NonFiniteLoss { what: "q1", iter, value: mse });
        }
        adam_step(&mut self.critics.q1, &grads, &mut self.q1_adam, cfg.critic_lr)
            .map_err(Self::opt_err(iter))?;
        self.critic_adam_steps += 1;

        let (loss, agrads, mean_q) = deterministic_actor_loss(actor, &self.critics.q1, &batch.s);
        if !loss.is_finite() {
            return Err(UpdateError::NonFiniteLoss { what: "actor", iter, value: loss });
        }
        adam_step(&mut actor.net, &agrads, adam, cfg.actor_lr).map_err(Self::opt_err(iter))?;
        self.actor_adam_steps += 1;
        self.last_actor_loss = loss;
        self.last_mean_q = mean_q;

        polyak_update(&mut self.critics.q1_targ, &self.critics.q1, cfg.rho);
        polyak_update(&mut actor_targ.net, &actor.net, cfg.rho);

        self.update_iter += 1;
        Ok(LossReport {
            q1_mse: mse,
            q2_mse: 0.0,
            q1_ret: 0.0,
            q2_ret: 0.0,
            actor_loss: loss,
            mean_q,
            mean_log_prob: 0.0,
            actor_updated: true,
        })
    }

    /// Networks persisted in checkpoints: the actor nets and both main
    /// critics, keyed by stable names.
    pub fn checkpoint_nets(&self) -> Vec<(&'static str, &Mlp)> {
        let mut nets: Vec<(&'static str, &Mlp)> = match &self.actor {
            ActorState::Gaussian { actor, .. } => vec![
                ("actor_trunk", &actor.trunk),
                ("actor_mean", &actor.mean_head),
                ("actor_log_std", &actor.log_std_head),
            ],
            ActorState::Deterministic { actor, .. } => vec![("actor", &actor.net)],
        };
        nets.push(("q1", &self.critics.q1));
        nets.push(("q2", &self.critics.q2));
        nets
    }

    /// Restores nets saved by `checkpoint_nets`; target and previous nets are
    /// re-synced to the restored mains.
    pub fn restore_nets(&mut self, nets: &[(String, Mlp)]) -> Result<(), String> {
        for (name, net) in nets {
            let slot: &mut Mlp = match (name.as_str(), &mut self.actor) {
                ("actor_trunk", ActorState::Gaussian { actor, .. }) => &mut actor.trunk,
                ("actor_mean", ActorState::Gaussian { actor, .. }) => &mut actor.mean_head,
                ("actor_log_std", ActorState::Gaussian { actor, .. }) => &mut actor.log_std_head,
                ("actor", ActorState::Deterministic { actor, .. }) => &mut actor.net,
                ("q1", _) => &mut self.critics.q1,
                ("q2", _) => &mut self.critics.q2,
                (other, _) => return Err(format!("unknown checkpoint net '{other}'")),
            };
            if !slot.same_shape(net) {
                return Err(format!("checkpoint net '{name}' has mismatched shape"));
            }
            *slot = net.snapshot();
        }
        if let ActorState::Deterministic { actor, actor_targ, .. } = &mut self.actor {
            actor_targ.net = actor.net.snapshot();
        }
        self.critics.q1_targ = self.critics.q1.snapshot();
        self.critics.q2_targ = self.critics.q2.snapshot();
        self.critics.q1_prev = self.critics.q1.snapshot();
        self.critics.q2_prev = self.critics.q2.snapshot();
        Ok(())
    }
}

impl crate::eval::Policy for AgentState {
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        self.deterministic_action(obs)
    }
}

impl crate::eval::ActionValue for AgentState {
    fn q_min(&self, obs: &[f64], action: &[f64]) -> f64 {
        AgentState::q_min(self, obs, action)
    }
}
