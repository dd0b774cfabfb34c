//! sarclab core: dense-network engine, deterministic control environments,
//! replay buffer, policies, actor-critic agents and evaluation utilities.

pub mod agents;
pub mod envs;
pub mod eval;
pub mod nnet;
pub mod policy;
pub mod replay;
pub mod rng;
