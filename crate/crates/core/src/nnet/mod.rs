//! Minimal dense-network engine: matrix container, MLP with hand-derived
//! backpropagation, Adam, Polyak/snapshot utilities, finite-difference
//! gradient checking and text checkpoints. Everything is 64-bit and
//! deterministic given the rng state.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod matrix;
pub mod mlp;

pub use adam::{adam_step, AdamState, NnetError};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use gradcheck::{grad_check, FD_STEP};
pub use matrix::Matrix;
pub use mlp::{polyak_update, Activation, ForwardCache, Mlp, MlpGrads};
