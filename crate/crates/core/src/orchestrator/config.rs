use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::agent::PpoConfig;
use crate::flow::{JetConfig, SimConfig};

/// Training, baseline and evaluation settings. Defaults are the desk profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_episodes: usize,
    pub actions_per_episode: usize,
    /// Parallel CFD simulations per episode.
    pub n_cfd: usize,
    /// Episode length in baseline shedding periods.
    pub episode_periods: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Hidden width of the actor and critic.
    pub hidden: usize,
    /// Initial log standard deviation of the (pre-squash) policy.
    pub init_log_std: f64,
    pub seed: u64,
    /// Longest wait for any worker message before the episode is aborted, seconds.
    pub worker_timeout_s: f64,
    /// Uncontrolled time discarded before baseline statistics.
    pub baseline_transient: f64,
    /// Shedding periods in the baseline statistics window.
    pub baseline_periods: usize,
    /// Phase-distinct baseline snapshots used to start episodes.
    pub n_snapshots: usize,
    /// Interval between recorded baseline force samples.
    pub sample_interval: f64,
    /// Uncontrolled time after the snapshot before deterministic control starts.
    pub eval_onset: f64,
    /// Controlled time simulated by the deterministic evaluation.
    pub eval_duration: f64,
    /// Baseline periods in the evaluation statistics window.
    pub eval_periods: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_episodes: 30,
            actions_per_episode: 120,
            n_cfd: 2,
            episode_periods: 6.0,
            alpha: 0.3,
            beta: 0.8,
            hidden: 128,
            init_log_std: -1.5,
            seed: 0,
            worker_timeout_s: 600.0,
            baseline_transient: 100.0,
            baseline_periods: 20,
            n_snapshots: 4,
            sample_interval: 0.1,
            eval_onset: 10.0,
            eval_duration: 150.0,
            eval_periods: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        if self.n_episodes == 0 || self.actions_per_episode == 0 || self.n_cfd == 0 {
            return bad("n_episodes, actions_per_episode and n_cfd must be at least 1".into());
        }
        if !(self.episode_periods > 0.0) {
            return bad(format!("episode_periods must be positive, got {}", self.episode_periods));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1".into());
        }
        if !(self.worker_timeout_s > 0.0) {
            return bad("worker_timeout_s must be positive".into());
        }
        if !(self.baseline_transient >= 0.0) || self.baseline_periods < 2 {
            return bad("baseline needs transient >= 0 and at least 2 periods".into());
        }
        if self.n_snapshots == 0 {
            return bad("n_snapshots must be at least 1".into());
        }
        if !(self.sample_interval > 0.0) {
            return bad("sample_interval must be positive".into());
        }
        if !(self.eval_onset >= 0.0 && self.eval_duration > 0.0) || self.eval_periods == 0 {
            return bad("evaluation needs onset >= 0, duration > 0 and eval_periods >= 1".into());
        }
        Ok(())
    }
}

/// Broker connection settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrokerConfig {
    pub addr: String,
    pub capacity_mb: usize,
    /// Solver-side wait for actions, seconds.
    pub get_timeout_s: f64,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:6380".into(),
            capacity_mb: 256,
            get_timeout_s: 60.0,
        }
    }
}

impl BrokerConfig {
    pub fn capacity_bytes(&self) -> usize {
        self.capacity_mb.saturating_mul(1 << 20)
    }
}

/// Output locations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoConfig {
    pub out_dir: PathBuf,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("run"),
        }
    }
}

/// Everything a run needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub jets: JetConfig,
    pub train: TrainConfig,
    pub ppo: PpoConfig,
    pub broker: BrokerConfig,
    pub io: IoConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        self.sim.validate()?;
        self.jets.validate()?;
        self.train.validate()?;
        self.ppo.validate()?;
        Ok(())
    }

    pub fn baseline_dir(&self) -> PathBuf {
        self.io.out_dir.join("baseline")
    }

    pub fn train_dir(&self) -> PathBuf {
        self.io.out_dir.join("train")
    }

    pub fn evaluate_dir(&self) -> PathBuf {
        self.io.out_dir.join("evaluate")
    }

    pub fn export_dir(&self) -> PathBuf {
        self.io.out_dir.join("export")
    }
}
