//! The algorithmic core: losses, the SARC/SAC update step, the TD3 and DDPG
//! baselines, and the training loop.

mod config;
mod losses;
mod state;
mod train;

pub use config::{AgentConfig, Algorithm};
pub use losses::{
    compute_critic_target, critic_target_element, ddpg_target, deterministic_actor_loss,
    mse_critic_loss, retrospective_regularizer, sac_actor_loss, sac_actor_loss_with_noise,
    td3_target, total_retrospective_loss, ActorLossOut, CriticLossOut,
};
pub use state::{ActMode, AgentState, CriticPair, LossReport, UpdateError};
pub use train::{
    train_loop, HookDecision, NoHooks, TrainAbort, TrainError, TrainHooks, TrainLoopConfig,
    TrainRecord,
};
