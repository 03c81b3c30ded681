//! CFD workers: one simulation per worker, exchanging observations, actions
//! and rewards with the learner through the broker.
//!
//! Keys of episode `e`, simulation `k`, pseudo-environment `j`, action `n`:
//!
//! - `ep{e}.env{k}.pe{j}.state.{n}`: witness observation (worker writes)
//! - `ep{e}.env{k}.pe{j}.action.{n}`: `[Q]` (learner writes)
//! - `ep{e}.env{k}.pe{j}.reward.{n}`: interval-mean `[Cd, Cl]` (worker writes)
//! - `ep{e}.env{k}.trace`: substep trace, dims `[rows, 1 + 3 n_pe]` (worker writes)

use std::path::{Path, PathBuf};
use std::process::{Child, Command};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::env::{ControlledFlow, Trace};
use super::{exit, OrchestratorError};
use crate::broker::{Client, ClientError, Tensor};
use crate::flow::checkpoint::decode_checkpoint_for;
use crate::flow::{FlowError, JetConfig, SimConfig, Simulation};

pub fn state_key(ep: usize, env: usize, pe: usize, n: usize) -> String {
    format!("ep{ep}.env{env}.pe{pe}.state.{n}")
}

pub fn action_key(ep: usize, env: usize, pe: usize, n: usize) -> String {
    format!("ep{ep}.env{env}.pe{pe}.action.{n}")
}

pub fn reward_key(ep: usize, env: usize, pe: usize, n: usize) -> String {
    format!("ep{ep}.env{env}.pe{pe}.reward.{n}")
}

pub fn trace_key(ep: usize, env: usize) -> String {
    format!("ep{ep}.env{env}.trace")
}

/// Prefix that deletes every key of an episode.
pub fn episode_prefix(ep: usize) -> String {
    format!("ep{ep}.*")
}

/// Everything a worker needs; serialized to JSON for worker processes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerSpec {
    pub episode: usize,
    pub env: usize,
    pub n_pe: usize,
    pub n_actions: usize,
    pub t_action: f64,
    pub sim: SimConfig,
    pub jets: JetConfig,
    /// Baseline flow state the episode starts from.
    pub snapshot: PathBuf,
    pub broker_addr: String,
    /// Longest wait for one action, seconds.
    pub get_timeout_s: f64,
}

impl WorkerSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("worker spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, OrchestratorError> {
        serde_json::from_str(text)
            .map_err(|e| OrchestratorError::Config(format!("invalid worker spec: {e}")))
    }
}

/// Builds the simulation of a worker from its spec.
pub fn start_flow(spec: &WorkerSpec) -> Result<ControlledFlow, OrchestratorError> {
    let sim = Simulation::new(&spec.sim, &spec.jets)?;
    let (nx, ny) = (sim.field().nx(), sim.field().ny());
    let bytes = std::fs::read(&spec.snapshot).map_err(|e| {
        OrchestratorError::Config(format!("cannot read snapshot {}: {e}", spec.snapshot.display()))
    })?;
    let field = decode_checkpoint_for(&bytes, nx, ny).map_err(FlowError::from)?;
    let mut sim = sim;
    sim.set_field(field)?;
    Ok(ControlledFlow::new(sim, &spec.jets, spec.sim.cfl, spec.n_pe)?)
}

const POLL_SLICE: Duration = Duration::from_millis(200);

/// Runs one episode of one simulation. Returns early with an error when
/// `cancel` is raised.
pub fn run_worker(spec: &WorkerSpec, cancel: &AtomicBool) -> Result<(), OrchestratorError> {
    let mut flow = start_flow(spec)?;
    let mut client = Client::connect_with_retry(spec.broker_addr.as_str(), Duration::from_secs(10))?;
    let (ep, env) = (spec.episode, spec.env);
    let mut trace = Trace::new(spec.n_pe);
    let mut q = vec![0.0; spec.n_pe];
    for n in 0..spec.n_actions {
        for (j, obs) in flow.observe().iter().enumerate() {
            client.put_f64(&state_key(ep, env, j, n), obs)?;
        }
        for (j, qj) in q.iter_mut().enumerate() {
            let key = action_key(ep, env, j, n);
            let a = wait_for(&mut client, &key, spec.get_timeout_s, cancel)?;
            *qj = *a.first().ok_or_else(|| {
                OrchestratorError::Connectivity(format!("empty action under {key}"))
            })?;
            if !qj.is_finite() {
                return Err(OrchestratorError::Numerical(format!("non-finite action under {key}")));
            }
        }
        let f = flow.advance(&q, spec.t_action, Some(&mut trace))?;
        for j in 0..spec.n_pe {
            client.put_f64(&reward_key(ep, env, j, n), &[f.mean.cd, f.mean.cl])?;
        }
    }
    let rows = trace.rows.len() as u64;
    let tensor = Tensor::from_f64(&[rows, trace.width() as u64], &trace.flat())
        .map_err(|e| OrchestratorError::Connectivity(e.to_string()))?;
    client.put_tensor(&trace_key(ep, env), tensor)?;
    Ok(())
}

fn wait_for(
    client: &mut Client,
    key: &str,
    timeout_s: f64,
    cancel: &AtomicBool,
) -> Result<Vec<f64>, OrchestratorError> {
    let deadline = Instant::now() + Duration::from_secs_f64(timeout_s);
    loop {
        if cancel.load(Ordering::SeqCst) {
            return Err(OrchestratorError::Connectivity("worker cancelled".into()));
        }
        let now = Instant::now();
        if now >= deadline {
            return Err(OrchestratorError::Connectivity(format!(
                "timed out after {timeout_s} s waiting for {key}"
            )));
        }
        match client.get_f64(key, POLL_SLICE.min(deadline - now)) {
            Ok(v) => return Ok(v),
            Err(ClientError::NotFound(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

/// How a worker ended unsuccessfully.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerFailure {
    pub exit_code: i32,
    pub message: String,
}

impl From<WorkerFailure> for OrchestratorError {
    fn from(f: WorkerFailure) -> Self {
        if f.exit_code == exit::NUMERICAL {
            OrchestratorError::Numerical(f.message)
        } else {
            OrchestratorError::Connectivity(f.message)
        }
    }
}

/// A running worker.
pub trait WorkerHandle: Send {
    /// `Some` once the worker has ended.
    fn poll(&mut self) -> Option<Result<(), WorkerFailure>>;
    /// Stops the worker and waits for it.
    fn kill(&mut self);
}

/// Starts workers.
pub trait WorkerLauncher: Send + Sync {
    fn launch(&self, spec: &WorkerSpec) -> Result<Box<dyn WorkerHandle>, OrchestratorError>;
}

/// Workers as threads of the current process.
#[derive(Clone, Copy, Debug, Default)]
pub struct ThreadLauncher;

struct ThreadWorker {
    cancel: Arc<AtomicBool>,
    join: Option<JoinHandle<Result<(), OrchestratorError>>>,
    done: Option<Result<(), WorkerFailure>>,
}

impl ThreadWorker {
    fn finish(&mut self) {
        if let Some(h) = self.join.take() {
            self.done = Some(match h.join() {
                Ok(Ok(())) => Ok(()),
                Ok(Err(e)) => Err(WorkerFailure {
                    exit_code: e.exit_code(),
                    message: e.to_string(),
                }),
                Err(_) => Err(WorkerFailure {
                    exit_code: exit::CONNECTIVITY,
                    message: "worker thread panicked".into(),
                }),
            });
        }
    }
}

impl WorkerHandle for ThreadWorker {
    fn poll(&mut self) -> Option<Result<(), WorkerFailure>> {
        if self.join.as_ref().is_some_and(JoinHandle::is_finished) {
            self.finish();
        }
        self.done.clone()
    }

    fn kill(&mut self) {
        self.cancel.store(true, Ordering::SeqCst);
        self.finish();
    }
}

impl WorkerLauncher for ThreadLauncher {
    fn launch(&self, spec: &WorkerSpec) -> Result<Box<dyn WorkerHandle>, OrchestratorError> {
        let cancel = Arc::new(AtomicBool::new(false));
        let spec = spec.clone();
        let c = Arc::clone(&cancel);
        let join = std::thread::Builder::new()
            .name(format!("worker-ep{}-env{}", spec.episode, spec.env))
            .spawn(move || run_worker(&spec, &c))?;
        Ok(Box::new(ThreadWorker {
            cancel,
            join: Some(join),
            done: None,
        }))
    }
}

/// Workers as child processes running `<exe> worker --spec <file>`.
#[derive(Clone, Debug)]
pub struct ProcessLauncher {
    pub exe: PathBuf,
    /// Directory for the spec files.
    pub spec_dir: PathBuf,
}

struct ProcessWorker {
    child: Child,
    done: Option<Result<(), WorkerFailure>>,
}

impl WorkerHandle for ProcessWorker {
    fn poll(&mut self) -> Option<Result<(), WorkerFailure>> {
        if self.done.is_none() {
            match self.child.try_wait() {
                Ok(Some(status)) => {
                    self.done = Some(if status.success() {
                        Ok(())
                    } else {
                        Err(WorkerFailure {
                            exit_code: status.code().unwrap_or(exit::CONNECTIVITY),
                            message: format!("worker process exited with {status}"),
                        })
                    });
                }
                Ok(None) => {}
                Err(e) => {
                    self.done = Some(Err(WorkerFailure {
                        exit_code: exit::CONNECTIVITY,
                        message: format!("cannot query worker process: {e}"),
                    }))
                }
            }
        }
        self.done.clone()
    }

    fn kill(&mut self) {
        if self.poll().is_none() {
            let _ = self.child.kill();
            let _ = self.child.wait();
            self.done = Some(Err(WorkerFailure {
                exit_code: exit::CONNECTIVITY,
                message: "worker process killed".into(),
            }));
        }
    }
}

impl Drop for ProcessWorker {
    fn drop(&mut self) {
        self.kill();
    }
}

impl ProcessLauncher {
    fn spec_path(&self, spec: &WorkerSpec) -> PathBuf {
        self.spec_dir
            .join(format!("worker_ep{}_env{}.json", spec.episode, spec.env))
    }
}

impl WorkerLauncher for ProcessLauncher {
    fn launch(&self, spec: &WorkerSpec) -> Result<Box<dyn WorkerHandle>, OrchestratorError> {
        std::fs::create_dir_all(&self.spec_dir)?;
        let path = self.spec_path(spec);
        std::fs::write(&path, spec.to_json())?;
        let child = Command::new(&self.exe)
            .arg("worker")
            .arg("--spec")
            .arg(&path)
            .spawn()
            .map_err(|e| {
                OrchestratorError::Connectivity(format!(
                    "cannot start worker {}: {e}",
                    self.exe.display()
                ))
            })?;
        Ok(Box::new(ProcessWorker { child, done: None }))
    }
}

/// Reads a spec file and runs the worker to completion.
pub fn run_worker_file(path: &Path) -> Result<(), OrchestratorError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        OrchestratorError::Config(format!("cannot read worker spec {}: {e}", path.display()))
    })?;
    run_worker(&WorkerSpec::from_json(&text)?, &AtomicBool::new(false))
}
