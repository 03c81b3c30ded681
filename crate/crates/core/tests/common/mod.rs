#![allow(dead_code)]

use std::path::Path;

use afc_core::broker::serve;
use afc_core::orchestrator::{
    load_baseline, run_baseline, save_baseline, train, OrchestratorError, RunConfig, StoredBaseline,
    ThreadLauncher, TrainSummary,
};

/// Coarse grid and short episodes: the whole pipeline in seconds.
pub fn tiny_config(out: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.sim.lx = 16.0;
    c.sim.ly = 8.0;
    c.sim.center = (4.0, 4.0);
    c.sim.h = 0.1;
    c.sim.n_pe = 2;
    c.train.n_episodes = 2;
    c.train.actions_per_episode = 10;
    c.train.hidden = 16;
    c.train.baseline_transient = 40.0;
    c.train.baseline_periods = 8;
    c.train.eval_onset = 2.0;
    c.train.eval_duration = 60.0;
    c.train.eval_periods = 8;
    c.ppo.minibatch = 8;
    c.ppo.epochs = 2;
    c.io.out_dir = out.to_path_buf();
    c
}

pub fn make_baseline(cfg: &RunConfig) -> Result<StoredBaseline, OrchestratorError> {
    let b = run_baseline(&cfg.sim, &cfg.jets, &cfg.train)?;
    save_baseline(&cfg.baseline_dir(), &b, cfg.sim.n_pe)?;
    load_baseline(&cfg.baseline_dir())
}

/// Trains with in-process workers against a private broker.
pub fn train_threads(cfg: &RunConfig, baseline: &StoredBaseline) -> Result<TrainSummary, OrchestratorError> {
    let broker = serve("127.0.0.1:0", cfg.broker.capacity_bytes())?;
    train(cfg, baseline, &ThreadLauncher, &broker.addr().to_string(), |_| {})
}

/// Copies the baseline directory of `from` into `to`.
pub fn copy_baseline(from: &RunConfig, to: &RunConfig) -> std::io::Result<()> {
    let (src, dst) = (from.baseline_dir(), to.baseline_dir());
    std::fs::create_dir_all(&dst)?;
    for e in std::fs::read_dir(&src)? {
        let e = e?;
        std::fs::copy(e.path(), dst.join(e.file_name()))?;
    }
    Ok(())
}

/// Header and numeric rows of a CSV written by the orchestrator.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    afc_core::orchestrator::csv::read_csv(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
