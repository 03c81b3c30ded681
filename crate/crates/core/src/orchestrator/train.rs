//! The training loop: episodes, advantage estimation and PPO updates.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::baseline::StoredBaseline;
use super::config::RunConfig;
use super::csv::write_csv;
use super::env::Trace;
use super::episode::{run_episode, EpisodeResult, EpisodeSetup};
use super::worker::WorkerLauncher;
use super::OrchestratorError;
use crate::agent::policy::squash_log_jacobian;
use crate::agent::{gae, normalize, save_policy, PolicyParams, PpoLearner, Sample, Transition};
use crate::broker::Client;
use crate::flow::OBS_LEN;

/// Episode and action durations derived from the baseline shedding frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeTiming {
    pub t_episode: f64,
    pub t_action: f64,
}

pub fn episode_timing(st: f64, episode_periods: f64, actions: usize) -> EpisodeTiming {
    let t_episode = episode_periods / st;
    EpisodeTiming {
        t_episode,
        t_action: t_episode / actions as f64,
    }
}

/// One row of `reward.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    /// `drag + lift`.
    pub total: f64,
    pub drag: f64,
    pub lift: f64,
    pub mean_reward: f64,
}

impl EpisodeRow {
    pub const HEADER: [&'static str; 5] = ["episode", "total", "drag_term", "lift_term", "mean_R"];

    fn from_result(episode: usize, r: &EpisodeResult) -> Self {
        Self {
            episode,
            total: r.total(),
            drag: r.drag,
            lift: r.lift,
            mean_reward: r.mean_reward,
        }
    }

    fn row(&self) -> Vec<f64> {
        vec![self.episode as f64, self.total, self.drag, self.lift, self.mean_reward]
    }
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub rows: Vec<EpisodeRow>,
    pub policy: PolicyParams<f32>,
}

impl TrainSummary {
    /// Mean total reward of the first and last `k` episodes.
    pub fn first_last_mean(&self, k: usize) -> (f64, f64) {
        let k = k.min(self.rows.len()).max(1);
        let mean = |r: &[EpisodeRow]| r.iter().map(|e| e.total).sum::<f64>() / r.len() as f64;
        (mean(&self.rows[..k]), mean(&self.rows[self.rows.len() - k..]))
    }
}

/// Turns trajectories into PPO samples with normalized advantages.
pub fn build_samples(trajectories: &[Vec<Transition>], gamma: f64, lambda: f64, q_max: f64) -> Vec<Sample> {
    let mut samples = Vec::new();
    let mut advantages = Vec::new();
    for traj in trajectories {
        let rewards: Vec<f64> = traj.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = traj.iter().map(|t| t.value).collect();
        // Episodes end by truncation at a fixed horizon; no value beyond it.
        let (adv, ret) = gae(&rewards, &values, 0.0, gamma, lambda);
        for ((t, a), v) in traj.iter().zip(&adv).zip(ret) {
            advantages.push(*a);
            samples.push(Sample {
                observation: t.observation.clone(),
                raw_action: t.raw_action,
                old_log_prob: t.log_prob + squash_log_jacobian(t.raw_action, q_max),
                advantage: 0.0,
                value_target: v,
            });
        }
    }
    normalize(&mut advantages);
    for (s, a) in samples.iter_mut().zip(advantages) {
        s.advantage = a;
    }
    samples
}

/// Writes `t, Q_pe..` (`action.csv`) and `t, Cd_pe.., Cl_pe..` (`cl_cd.csv`).
pub fn write_trace_csvs(dir: &Path, trace: &Trace) -> std::io::Result<()> {
    let header = trace.header();
    let n = trace.n_pe;
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut action_h = vec![h[0]];
    action_h.extend(&h[1..1 + n]);
    write_csv(
        &dir.join("action.csv"),
        &action_h,
        trace.rows.iter().map(|r| r[..1 + n].to_vec()),
    )?;
    let mut force_h = vec![h[0]];
    force_h.extend(&h[1 + n..]);
    write_csv(
        &dir.join("cl_cd.csv"),
        &force_h,
        trace.rows.iter().map(|r| {
            let mut row = vec![r[0]];
            row.extend_from_slice(&r[1 + n..]);
            row
        }),
    )
}

fn episode_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Trains from scratch. Writes `reward.csv` and `policy.afcp` after every
/// episode and the traces of the last episode to `cfg.train_dir()`.
pub fn train(
    cfg: &RunConfig,
    baseline: &StoredBaseline,
    launcher: &dyn WorkerLauncher,
    broker_addr: &str,
    mut on_episode: impl FnMut(&EpisodeRow),
) -> Result<TrainSummary, OrchestratorError> {
    cfg.validate()?;
    let tc = &cfg.train;
    let dir = cfg.train_dir();
    std::fs::create_dir_all(&dir)?;
    let timing = episode_timing(baseline.stats.st, tc.episode_periods, tc.actions_per_episode);
    log::info!(
        "training: T_episode = {:.3}, T_action = {:.4}, {} transitions per episode",
        timing.t_episode,
        timing.t_action,
        tc.n_cfd * cfg.sim.n_pe * tc.actions_per_episode
    );
    let mut init_rng = episode_rng(tc.seed, 0);
    let params = PolicyParams::<f32>::new(OBS_LEN, tc.hidden, cfg.jets.q_max, tc.init_log_std, &mut init_rng);
    let mut learner = PpoLearner::new(params, cfg.ppo.clone());
    let mut update_rng = episode_rng(tc.seed, 1);
    let mut client = Client::connect_with_retry(broker_addr, std::time::Duration::from_secs(10))?;
    client.ping()?;

    let mut rows = Vec::with_capacity(tc.n_episodes);
    let policy_path = dir.join("policy.afcp");
    for ep in 0..tc.n_episodes {
        let setup = EpisodeSetup {
            episode: ep,
            n_cfd: tc.n_cfd,
            n_pe: cfg.sim.n_pe,
            n_actions: tc.actions_per_episode,
            t_action: timing.t_action,
            sim: cfg.sim.clone(),
            jets: cfg.jets.clone(),
            snapshots: baseline.snapshot_paths.clone(),
            broker_addr: broker_addr.to_string(),
            action_timeout_s: cfg.broker.get_timeout_s,
            worker_timeout_s: tc.worker_timeout_s,
            cd_baseline: baseline.stats.mean_cd,
            alpha: tc.alpha,
            beta: tc.beta,
        };
        let mut rng = episode_rng(tc.seed, 2 + 2 * ep as u64);
        let mut retry_rng = episode_rng(tc.seed, 3 + 2 * ep as u64);
        let result = run_episode(&setup, &learner.params, launcher, &mut client, &mut rng, &mut retry_rng)?;
        let samples = build_samples(&result.trajectories, cfg.ppo.gamma, cfg.ppo.lambda, cfg.jets.q_max);
        let stats = learner.update(&samples, &mut update_rng)?;
        let row = EpisodeRow::from_result(ep, &result);
        log::info!(
            "episode {ep}: reward {:.5} (drag {:.5}, lift {:.5}), policy loss {:.4}, value loss {:.4}, log_std {:.3}",
            row.total,
            row.drag,
            row.lift,
            stats.last_epoch.policy,
            stats.last_epoch.value,
            learner.params.log_std
        );
        rows.push(row);
        write_csv(&dir.join("reward.csv"), &EpisodeRow::HEADER, rows.iter().map(EpisodeRow::row))?;
        save_policy(&learner.params, &policy_path)?;
        if ep + 1 == tc.n_episodes {
            write_trace_csvs(&dir, &result.traces[0])?;
        }
        on_episode(&row);
    }
    Ok(TrainSummary {
        rows,
        policy: learner.params,
    })
}
