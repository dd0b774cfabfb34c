//! Deterministic, seedable continuous-control environments with bounded
//! action spaces. All tasks are fixed-horizon: `terminal` is always false and
//! episodes end only by truncation, which the replay buffer must not treat as
//! a terminal signal.

mod cartpole;
mod pendulum;
mod reacher;

pub use cartpole::CartpoleSwingup;
pub use pendulum::PendulumSwingup;
pub use reacher::PointReacher;

use rand::RngCore;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        max_episode_steps: usize,
    ) -> EnvSpec {
        assert!(max_episode_steps >= 1);
        assert_eq!(action_low.len(), act_dim);
        assert_eq!(action_high.len(), act_dim);
        assert!(
            action_low.iter().zip(&action_high).all(|(lo, hi)| lo < hi),
            "action_low must be strictly below action_high"
        );
        EnvSpec {
            obs_dim,
            act_dim,
            action_low,
            action_high,
            max_episode_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// True only on genuine MDP termination; never set by these tasks.
    pub terminal: bool,
    /// True only on the time-limit cutoff.
    pub truncated: bool,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;
    /// Starts a fresh episode; the initial state is drawn from the
    /// environment's documented reset distribution using `rng` alone.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// Advances the physics by one fixed timestep. Actions are clamped to the
    /// declared bounds internally; non-finite entries are rejected.
    fn step(&mut self, action: &[f64]) -> StepResult;
    fn clone_env(&self) -> Box<dyn Environment>;
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown environment {0:?} (expected pendulum-swingup, point-reacher or cartpole-swingup)")]
    UnknownEnv(String),
}

pub fn make_env(name: &str) -> Result<Box<dyn Environment>, EnvError> {
    match name {
        "pendulum-swingup" => Ok(Box::new(PendulumSwingup::new())),
        "point-reacher" => Ok(Box::new(PointReacher::new())),
        "cartpole-swingup" => Ok(Box::new(CartpoleSwingup::new())),
        other => Err(EnvError::UnknownEnv(other.to_string())),
    }
}

/// Wraps an angle into [-pi, pi).
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (theta + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

pub(crate) fn check_action(action: &[f64], spec: &EnvSpec) {
    assert_eq!(action.len(), spec.act_dim, "action width {} vs act_dim {}", action.len(), spec.act_dim);
    assert!(
        action.iter().all(|a| a.is_finite()),
        "non-finite action entry in {action:?}"
    );
}
