//! `afc`: baseline, training, evaluation, broker and export commands.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afc_core::agent::load_policy;
use afc_core::broker::serve;
use afc_core::orchestrator::worker::run_worker_file;
use afc_core::orchestrator::{
    evaluate, exit, export, load_baseline, run_baseline, save_baseline, save_evaluation, train,
    OrchestratorError, ProcessLauncher, RunConfig,
};
use clap::{Args, Parser, Subcommand};

use config::{load_config, render_config};

#[derive(Parser)]
#[command(name = "afc", version, about = "Active flow control of a cylinder wake with PPO")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Opts {
    /// Config file; every key defaults to the desk profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides [train] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides [broker] addr.
    #[arg(long, global = true)]
    broker_addr: Option<String>,
    /// Overrides [broker] capacity_mb.
    #[arg(long, global = true)]
    broker_capacity_mb: Option<usize>,
    /// Run the broker inside this process.
    #[arg(long, global = true)]
    embedded_broker: bool,
    /// Policy file for evaluate (default: <out>/train/policy.afcp).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Overrides [io] out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Uncontrolled flow statistics and episode start snapshots.
    Baseline,
    /// Train a policy with parallel CFD workers.
    Train,
    /// Deterministic evaluation of a trained policy.
    Evaluate,
    /// Run a standalone broker.
    Broker,
    /// Collect plot-ready CSVs of a finished run.
    Export,
    /// Run one CFD worker (started by `train`).
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        spec: PathBuf,
    },
}

fn resolve(opts: &Opts) -> Result<RunConfig, OrchestratorError> {
    let mut cfg = match &opts.config {
        Some(path) => load_config(path).map_err(|e| OrchestratorError::Config(e.0))?,
        None => RunConfig::default(),
    };
    if let Some(s) = opts.seed {
        cfg.train.seed = s;
    }
    if let Some(a) = &opts.broker_addr {
        cfg.broker.addr = a.clone();
    }
    if let Some(c) = opts.broker_capacity_mb {
        cfg.broker.capacity_mb = c;
    }
    if let Some(o) = &opts.out {
        cfg.io.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_baseline(cfg: &RunConfig) -> Result<String, OrchestratorError> {
    let start = std::time::Instant::now();
    let b = run_baseline(&cfg.sim, &cfg.jets, &cfg.train)?;
    let dir = cfg.baseline_dir();
    save_baseline(&dir, &b, cfg.sim.n_pe)?;
    if let Some((a, c)) = b.st_halves.filter(|(a, c)| (a - c).abs() > 0.02 * b.stats.st) {
        log::warn!("Strouhal number differs between window halves: {a:.4} vs {c:.4}");
    }
    let s = &b.stats;
    Ok(format!(
        "baseline: St = {:.4}, mean Cd = {:.4} (pressure {:.4}, viscous {:.4}), sigma_Cl = {:.4}, mean Cl = {:.4} in {:.0} s -> {}",
        s.st,
        s.mean_cd,
        s.cd_press,
        s.cd_visc,
        s.sigma_cl,
        s.mean_cl,
        start.elapsed().as_secs_f64(),
        dir.display()
    ))
}

fn cmd_train(cfg: &RunConfig, embedded: bool) -> Result<String, OrchestratorError> {
    let baseline = load_baseline(&cfg.baseline_dir())?;
    let _broker = if embedded {
        Some(serve(cfg.broker.addr.as_str(), cfg.broker.capacity_bytes()).map_err(|e| {
            OrchestratorError::Connectivity(format!("cannot start broker on {}: {e}", cfg.broker.addr))
        })?)
    } else {
        None
    };
    let addr = match &_broker {
        Some(b) => b.addr().to_string(),
        None => cfg.broker.addr.clone(),
    };
    let launcher = ProcessLauncher {
        exe: std::env::current_exe()?,
        spec_dir: cfg.train_dir().join("workers"),
    };
    let summary = train(cfg, &baseline, &launcher, &addr, |row| {
        println!("episode {:>3}: reward {:+.6}", row.episode, row.total);
    })?;
    let (first, last) = summary.first_last_mean(5);
    Ok(format!(
        "trained {} episodes: mean reward first 5 = {first:.6}, last 5 = {last:.6} -> {}",
        summary.rows.len(),
        cfg.train_dir().join("policy.afcp").display()
    ))
}

fn cmd_evaluate(cfg: &RunConfig, model: Option<&Path>) -> Result<String, OrchestratorError> {
    let path = model
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.train_dir().join("policy.afcp"));
    if !path.is_file() {
        return Err(OrchestratorError::Config(format!(
            "model file {} does not exist",
            path.display()
        )));
    }
    let policy = load_policy(&path)?;
    let baseline = load_baseline(&cfg.baseline_dir())?;
    let e = evaluate(cfg, &baseline, &policy)?;
    save_evaluation(&cfg.evaluate_dir(), &e)?;
    if !e.steady() {
        log::warn!(
            "controlled flow not steady: mean Cd drifts {:.2}% between the last periods",
            e.cd_drift_pct
        );
    }
    let st_q = e
        .actuation
        .st
        .map_or("none".to_string(), |s| format!("{s:.4}"));
    Ok(format!(
        "Cd reduction: {:.2}%, sigma_Cl reduction: {:.2}% (mean Cd {:.4} vs {:.4}, sigma_Cl {:.4} vs {:.4}, actuation St {st_q})",
        e.cd_reduction_pct,
        e.sigma_cl_reduction_pct,
        e.controlled.mean_cd,
        e.baseline.mean_cd,
        e.controlled.sigma_cl,
        e.baseline.sigma_cl
    ))
}

fn cmd_broker(cfg: &RunConfig) -> Result<String, OrchestratorError> {
    let handle = serve(cfg.broker.addr.as_str(), cfg.broker.capacity_bytes()).map_err(|e| {
        OrchestratorError::Connectivity(format!("cannot start broker on {}: {e}", cfg.broker.addr))
    })?;
    println!("broker listening on {}", handle.addr());
    handle.wait();
    Ok("broker stopped".into())
}

fn cmd_export(cfg: &RunConfig) -> Result<String, OrchestratorError> {
    let files = export(cfg)?;
    Ok(format!(
        "exported {} files to {}",
        files.len(),
        cfg.export_dir().display()
    ))
}

fn run(cli: Cli) -> Result<String, OrchestratorError> {
    if let Cmd::Worker { spec } = &cli.command {
        run_worker_file(spec)?;
        return Ok(String::new());
    }
    let cfg = resolve(&cli.opts)?;
    if cli.opts.dry_run {
        return Ok(render_config(&cfg).trim_end().to_string());
    }
    match cli.command {
        Cmd::Baseline => cmd_baseline(&cfg),
        Cmd::Train => cmd_train(&cfg, cli.opts.embedded_broker),
        Cmd::Evaluate => cmd_evaluate(&cfg, cli.opts.model.as_deref()),
        Cmd::Broker => cmd_broker(&cfg),
        Cmd::Export => cmd_export(&cfg),
        Cmd::Worker { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AFC_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            ExitCode::from(exit::OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
