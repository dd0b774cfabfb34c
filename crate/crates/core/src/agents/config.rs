#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Sac,
    Sarc,
    DelayedSac,
    Td3,
    Ddpg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sac => "sac",
            Algorithm::Sarc => "sarc",
            Algorithm::DelayedSac => "delayed-sac",
            Algorithm::Td3 => "td3",
            Algorithm::Ddpg => "ddpg",
        }
    }

    pub fn from_name(name: &str) -> Option<Algorithm> {
        match name {
            "sac" => Some(Algorithm::Sac),
            "sarc" => Some(Algorithm::Sarc),
            "delayed-sac" => Some(Algorithm::DelayedSac),
            "td3" => Some(Algorithm::Td3),
            "ddpg" => Some(Algorithm::Ddpg),
            _ => None,
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Algorithm::Sac | Algorithm::Sarc | Algorithm::DelayedSac)
    }
}

/// Every scalar hyperparameter of an agent. Fields specific to one family
/// (e.g. `policy_delay`, `target_noise_std`) are ignored by the others.
#[derive(Clone, Debug)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    /// Retrospective weight κ; must stay strictly positive.
    pub kappa: f64,
    /// Global on/off weight for the retrospective regularizer: 1 for SARC,
    /// 0 disables the term entirely (exact-SAC reduction).
    pub lambda_ret: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub start_steps: usize,
    pub update_after: usize,
    pub update_every: usize,
    pub num_updates: usize,
    /// 1 for SAC/SARC; 2 for delayed-SAC (critics update twice per actor update).
    pub critic_updates_per_actor_update: usize,
    pub policy_delay: usize,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub hidden_sizes: Vec<usize>,
}

impl AgentConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> AgentConfig {
        AgentConfig {
            algorithm,
            kappa: 2.0,
            lambda_ret: if algorithm == Algorithm::Sarc { 1.0 } else { 0.0 },
            alpha: 0.2,
            gamma: 0.99,
            rho: 0.995,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            batch_size: 100,
            start_steps: 10_000,
            update_after: 1_000,
            update_every: 50,
            num_updates: 50,
            critic_updates_per_actor_update: if algorithm == Algorithm::DelayedSac {
                2
            } else {
                1
            },
            policy_delay: 2,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            hidden_sizes: vec![256, 256],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.kappa > 0.0) {
            return Err(format!("kappa must be > 0, got {}", self.kappa));
        }
        if !(self.lambda_ret >= 0.0) {
            return Err(format!("lambda_ret must be >= 0, got {}", self.lambda_ret));
        }
        if !(self.alpha >= 0.0) {
            return Err(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(format!("{name} must be a positive finite float, got {lr}"));
            }
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("update_every", self.update_every),
            ("num_updates", self.num_updates),
            ("critic_updates_per_actor_update", self.critic_updates_per_actor_update),
            ("policy_delay", self.policy_delay),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.target_noise_std >= 0.0) || !(self.target_noise_clip >= 0.0) {
            return Err("target noise parameters must be nonnegative".to_string());
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err("hidden_sizes must be nonempty with positive widths".to_string());
        }
        Ok(())
    }
}
