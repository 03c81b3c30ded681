//! PPO actor-critic over the scalar jet flow rate.

pub mod mlp;
pub mod model;
pub mod policy;
pub mod ppo;

use thiserror::Error;

pub use model::{decode_policy, encode_policy, load_policy, save_policy};
pub use policy::{ActMode, Action, PolicyParams};
pub use ppo::{gae, grad_check, normalize, PpoConfig, PpoLearner, Sample, Transition};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("expected an observation of {expected} values, got {found}")]
    Shape { expected: usize, found: usize },
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("policy file: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
