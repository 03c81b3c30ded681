//! One training episode: launch the workers, act on their observations,
//! collect rewards and traces.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;

use super::env::Trace;
use super::rewards::{aggregate_reward, drag_term, lift_term};
use super::worker::{
    action_key, episode_prefix, reward_key, state_key, trace_key, WorkerHandle, WorkerLauncher,
    WorkerSpec,
};
use super::OrchestratorError;
use crate::agent::{ActMode, PolicyParams, Transition};
use crate::broker::{Client, ClientError, Tensor};
use crate::flow::{JetConfig, SimConfig};

/// Static description of an episode.
#[derive(Clone, Debug)]
pub struct EpisodeSetup {
    pub episode: usize,
    pub n_cfd: usize,
    pub n_pe: usize,
    pub n_actions: usize,
    pub t_action: f64,
    pub sim: SimConfig,
    pub jets: JetConfig,
    /// Start states to choose from.
    pub snapshots: Vec<PathBuf>,
    pub broker_addr: String,
    /// Worker-side wait for an action, seconds.
    pub action_timeout_s: f64,
    /// Learner-side wait for any worker message, seconds.
    pub worker_timeout_s: f64,
    pub cd_baseline: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    /// One trajectory per (simulation, pseudo-environment), simulation-major.
    pub trajectories: Vec<Vec<Transition>>,
    /// Drag and lift parts of the episode reward: per-action local rewards
    /// summed over the episode and averaged over all pseudo-environments.
    pub drag: f64,
    pub lift: f64,
    /// Mean aggregated reward per action.
    pub mean_reward: f64,
    /// Substep trace of each simulation.
    pub traces: Vec<Trace>,
    /// Snapshot index each simulation started from.
    pub starts: Vec<usize>,
}

impl EpisodeResult {
    pub fn total(&self) -> f64 {
        self.drag + self.lift
    }
}

const POLL_SLICE: Duration = Duration::from_millis(200);

struct Workers(Vec<Box<dyn WorkerHandle>>);

impl Workers {
    fn check(&mut self) -> Result<(), OrchestratorError> {
        for (k, w) in self.0.iter_mut().enumerate() {
            if let Some(Err(f)) = w.poll() {
                let mut e = OrchestratorError::from(f);
                if let OrchestratorError::Connectivity(m) | OrchestratorError::Numerical(m) = &mut e {
                    *m = format!("worker {k}: {m}");
                }
                return Err(e);
            }
        }
        Ok(())
    }

    fn kill_all(&mut self) {
        for w in &mut self.0 {
            w.kill();
        }
    }
}

impl Drop for Workers {
    fn drop(&mut self) {
        self.kill_all();
    }
}

/// Waits for `key` while watching the workers.
fn fetch(
    client: &mut Client,
    workers: &mut Workers,
    key: &str,
    timeout_s: f64,
) -> Result<Tensor, OrchestratorError> {
    let deadline = Instant::now() + Duration::from_secs_f64(timeout_s);
    loop {
        let now = Instant::now();
        if now >= deadline {
            return Err(OrchestratorError::Connectivity(format!(
                "no worker message under {key} within {timeout_s} s"
            )));
        }
        match client.get_tensor(key, POLL_SLICE.min(deadline - now)) {
            Ok(t) => return Ok(t),
            Err(ClientError::NotFound(_)) => workers.check()?,
            Err(e) => return Err(e.into()),
        }
    }
}

fn attempt<R: Rng + ?Sized>(
    setup: &EpisodeSetup,
    policy: &PolicyParams<f32>,
    launcher: &dyn WorkerLauncher,
    client: &mut Client,
    rng: &mut R,
) -> Result<EpisodeResult, OrchestratorError> {
    let ep = setup.episode;
    let starts: Vec<usize> = (0..setup.n_cfd)
        .map(|_| rng.random_range(0..setup.snapshots.len()))
        .collect();
    let mut workers = Workers(Vec::with_capacity(setup.n_cfd));
    for (env, &s) in starts.iter().enumerate() {
        let spec = WorkerSpec {
            episode: ep,
            env,
            n_pe: setup.n_pe,
            n_actions: setup.n_actions,
            t_action: setup.t_action,
            sim: setup.sim.clone(),
            jets: setup.jets.clone(),
            snapshot: setup.snapshots[s].clone(),
            broker_addr: setup.broker_addr.clone(),
            get_timeout_s: setup.action_timeout_s,
        };
        workers.0.push(launcher.launch(&spec)?);
    }

    let n_traj = setup.n_cfd * setup.n_pe;
    let mut trajectories: Vec<Vec<Transition>> = vec![Vec::with_capacity(setup.n_actions); n_traj];
    let (mut drag, mut lift, mut r_sum) = (0.0, 0.0, 0.0);
    let to = setup.worker_timeout_s;
    for n in 0..setup.n_actions {
        let mut observations = Vec::with_capacity(n_traj);
        for env in 0..setup.n_cfd {
            for pe in 0..setup.n_pe {
                let key = state_key(ep, env, pe, n);
                observations.push(fetch(client, &mut workers, &key, to)?.to_f64());
            }
        }
        let mut actions = Vec::with_capacity(n_traj);
        for (t, obs) in observations.into_iter().enumerate() {
            let a = policy.act(&obs, ActMode::Stochastic, rng)?;
            let (env, pe) = (t / setup.n_pe, t % setup.n_pe);
            client.put_f64(&action_key(ep, env, pe, n), &[a.q])?;
            actions.push((obs, a));
        }
        let mut local = Vec::with_capacity(n_traj);
        for env in 0..setup.n_cfd {
            for pe in 0..setup.n_pe {
                let key = reward_key(ep, env, pe, n);
                let f = fetch(client, &mut workers, &key, to)?.to_f64();
                if f.len() != 2 {
                    return Err(OrchestratorError::Connectivity(format!(
                        "reward under {key} has {} values, expected 2",
                        f.len()
                    )));
                }
                let (d, l) = (drag_term(setup.cd_baseline, f[0]), lift_term(f[1], setup.alpha));
                drag += d / n_traj as f64;
                lift += l / n_traj as f64;
                local.push(d + l);
            }
        }
        let rewards: Vec<f64> = local
            .chunks(setup.n_pe)
            .flat_map(|r| aggregate_reward(r, setup.beta))
            .collect();
        for (t, ((obs, a), r)) in actions.into_iter().zip(rewards).enumerate() {
            r_sum += r;
            trajectories[t].push(Transition {
                observation: obs,
                raw_action: a.raw,
                log_prob: a.log_prob,
                value: a.value,
                reward: r,
                done: n + 1 == setup.n_actions,
            });
        }
    }
    let mut traces = Vec::with_capacity(setup.n_cfd);
    for env in 0..setup.n_cfd {
        let t = fetch(client, &mut workers, &trace_key(ep, env), to)?;
        traces.push(Trace::from_flat(setup.n_pe, &t.to_f64()));
    }
    // Workers exit right after publishing their trace.
    let deadline = Instant::now() + Duration::from_secs_f64(to);
    while workers.0.iter_mut().any(|w| w.poll().is_none()) {
        workers.check()?;
        if Instant::now() >= deadline {
            return Err(OrchestratorError::Connectivity("workers did not exit".into()));
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    workers.check()?;
    Ok(EpisodeResult {
        trajectories,
        drag,
        lift,
        mean_reward: r_sum / (n_traj * setup.n_actions) as f64,
        traces,
        starts,
    })
}

/// Runs an episode, retrying once after a worker failure. The retry uses
/// `retry_rng` so that a restarted episode does not replay the failed one.
pub fn run_episode<R: Rng + ?Sized>(
    setup: &EpisodeSetup,
    policy: &PolicyParams<f32>,
    launcher: &dyn WorkerLauncher,
    client: &mut Client,
    rng: &mut R,
    retry_rng: &mut R,
) -> Result<EpisodeResult, OrchestratorError> {
    let prefix = episode_prefix(setup.episode);
    match attempt(setup, policy, launcher, client, rng) {
        Ok(r) => {
            client.delete(&prefix)?;
            Ok(r)
        }
        Err(e) => {
            log::warn!("episode {} failed ({e}); retrying once", setup.episode);
            client.delete(&prefix)?;
            let r = attempt(setup, policy, launcher, client, retry_rng);
            client.delete(&prefix)?;
            r
        }
    }
}
