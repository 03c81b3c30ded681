//! Baseline runs, training episodes over the broker, deterministic
//! evaluation and the statistics they report.

pub mod baseline;
pub mod config;
pub mod csv;
pub mod env;
pub mod episode;
pub mod evaluate;
pub mod export;
pub mod rewards;
pub mod stats;
pub mod train;
pub mod worker;

use thiserror::Error;

use crate::agent::AgentError;
use crate::broker::ClientError;
use crate::flow::FlowError;

pub use baseline::{load_baseline, run_baseline, save_baseline, BaselineResult, FlowStats, StoredBaseline};
pub use config::{BrokerConfig, IoConfig, RunConfig, TrainConfig};
pub use env::{ControlledFlow, IntervalForces, Trace};
pub use evaluate::{evaluate, save_evaluation, Evaluation};
pub use export::export;
pub use rewards::{aggregate_reward, local_reward};
pub use stats::{signal_statistics, spectrum, SignalStats, Spectrum, StatsError};
pub use train::{episode_timing, train, EpisodeTiming, TrainSummary};
pub use worker::{ProcessLauncher, ThreadLauncher, WorkerLauncher, WorkerSpec};

/// Process exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const CONNECTIVITY: i32 = 4;
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("connectivity failure: {0}")]
    Connectivity(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl OrchestratorError {
    pub fn exit_code(&self) -> i32 {
        match self {
            OrchestratorError::Config(_) | OrchestratorError::Io(_) => exit::CONFIG,
            OrchestratorError::Numerical(_) => exit::NUMERICAL,
            OrchestratorError::Connectivity(_) => exit::CONNECTIVITY,
        }
    }
}

impl From<FlowError> for OrchestratorError {
    fn from(e: FlowError) -> Self {
        if e.is_numerical() {
            OrchestratorError::Numerical(e.to_string())
        } else {
            OrchestratorError::Config(e.to_string())
        }
    }
}

impl From<AgentError> for OrchestratorError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::NonFinite(_) => OrchestratorError::Numerical(e.to_string()),
            AgentError::Io(e) => OrchestratorError::Io(e),
            other => OrchestratorError::Config(other.to_string()),
        }
    }
}

impl From<ClientError> for OrchestratorError {
    fn from(e: ClientError) -> Self {
        OrchestratorError::Connectivity(e.to_string())
    }
}

impl From<StatsError> for OrchestratorError {
    fn from(e: StatsError) -> Self {
        OrchestratorError::Numerical(format!("signal statistics: {e}"))
    }
}
