//! Uncontrolled reference flow: statistics and episode start snapshots.

use std::path::{Path, PathBuf};

use super::config::TrainConfig;
use super::csv::{read_csv, write_csv};
use super::env::ControlledFlow;
use super::stats::{signal_statistics, spectrum, SignalStats, Spectrum};
use super::OrchestratorError;
use crate::flow::checkpoint::{decode_checkpoint_for, encode_checkpoint};
use crate::flow::diagnostics::{compute_cp, CpProfile, ForceRecord};
use crate::flow::{FlowField, JetConfig, SimConfig, Simulation};

/// Flow rate of the short asymmetric kick that triggers shedding early.
const KICK_Q: f64 = 0.05;
const KICK_TIME: f64 = 1.0;

/// Table-style statistics of one flow.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FlowStats {
    pub mean_cl: f64,
    pub sigma_cl: f64,
    pub st: f64,
    pub mean_cd: f64,
    pub cd_press: f64,
    pub cd_visc: f64,
}

impl FlowStats {
    pub const HEADER: [&'static str; 6] =
        ["mean_Cl", "sigma_Cl", "St", "mean_Cd", "Cd_press", "Cd_visc"];

    pub fn row(&self) -> Vec<f64> {
        vec![
            self.mean_cl,
            self.sigma_cl,
            self.st,
            self.mean_cd,
            self.cd_press,
            self.cd_visc,
        ]
    }

    /// Statistics of uniformly sampled force records.
    pub fn from_records(records: &[ForceRecord], dt: f64) -> Result<(Self, SignalStats), OrchestratorError> {
        let cl: Vec<f64> = records.iter().map(|r| r.cl).collect();
        let s = signal_statistics(&cl, dt)?;
        let st = s
            .st
            .ok_or_else(|| OrchestratorError::Config("no periodic shedding detected in the lift signal".into()))?;
        let n = records.len() as f64;
        let cd_press = records.iter().map(|r| r.cd_press).sum::<f64>() / n;
        let cd_visc = records.iter().map(|r| r.cd_visc).sum::<f64>() / n;
        Ok((
            Self {
                mean_cl: s.mean,
                sigma_cl: s.sigma,
                st,
                mean_cd: cd_press + cd_visc,
                cd_press,
                cd_visc,
            },
            s,
        ))
    }
}

/// Output of [`run_baseline`].
#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub stats: FlowStats,
    /// Strouhal numbers of the two halves of the window, when each half is
    /// long enough to resolve them.
    pub st_halves: Option<(f64, f64)>,
    /// Force samples over the statistics window.
    pub records: Vec<ForceRecord>,
    pub sample_interval: f64,
    pub cp: CpProfile,
    pub cl_spectrum: Spectrum,
    /// Flow states at distinct shedding phases.
    pub snapshots: Vec<FlowField>,
}

/// Times at which `x` crosses zero upwards (linear interpolation).
pub fn upcrossings(t: &[f64], x: &[f64]) -> Vec<(usize, f64)> {
    (1..x.len())
        .filter(|&k| x[k - 1] < 0.0 && x[k] >= 0.0)
        .map(|k| {
            let f = x[k - 1] / (x[k - 1] - x[k]);
            (k, t[k - 1] + f * (t[k] - t[k - 1]))
        })
        .collect()
}

/// Runs the uncontrolled flow past its transient, measures
/// `baseline_periods` shedding periods and stores phase-distinct snapshots.
pub fn run_baseline(
    sim_cfg: &SimConfig,
    jets: &JetConfig,
    cfg: &TrainConfig,
) -> Result<BaselineResult, OrchestratorError> {
    let sim = Simulation::new(sim_cfg, jets)?;
    let mut flow = ControlledFlow::new(sim, jets, sim_cfg.cfl, 1)?;
    let ds = cfg.sample_interval;
    // Short top-blowing pulse to break the symmetry.
    flow.advance(&[KICK_Q], KICK_TIME, None)?;
    flow.advance(&[0.0], KICK_TIME, None)?;
    while flow.time() < cfg.baseline_transient - 1e-9 {
        let step = ds.min(cfg.baseline_transient - flow.time());
        flow.advance(&[0.0], step, None)?;
    }
    log::info!("baseline transient done at t = {:.2}", flow.time());

    let t_start = flow.time();
    let max_time = 30.0 * cfg.baseline_periods as f64;
    let mut records = vec![flow.forces()];
    let mut cps = vec![compute_cp(flow.sim().field(), flow.sim().geometry()).cp];
    let mut crossings = Vec::new();
    while crossings.len() < cfg.baseline_periods + 1 {
        if flow.time() - t_start > max_time {
            return Err(OrchestratorError::Config(format!(
                "no periodic shedding: {} lift up-crossings in {max_time} time units",
                crossings.len()
            )));
        }
        let f = flow.advance(&[0.0], ds, None)?;
        records.push(f.last);
        cps.push(compute_cp(flow.sim().field(), flow.sim().geometry()).cp);
        let n = records.len();
        let (a, b) = (records[n - 2], records[n - 1]);
        if a.cl < 0.0 && b.cl >= 0.0 {
            crossings.push(n - 1);
        }
    }
    let (first, last) = (crossings[0], *crossings.last().unwrap());
    let window = &records[first..last];
    let (stats, _) = FlowStats::from_records(window, ds)?;
    let half = first + (last - first) / 2;
    let st_halves = match (
        FlowStats::from_records(&records[first..half], ds),
        FlowStats::from_records(&records[half..last], ds),
    ) {
        (Ok((a, _)), Ok((b, _))) => Some((a.st, b.st)),
        _ => None,
    };
    let cl: Vec<f64> = window.iter().map(|r| r.cl).collect();
    let mut cp_mean = vec![0.0; cps[0].len()];
    for c in &cps[first..last] {
        cp_mean.iter_mut().zip(c).for_each(|(m, v)| *m += v);
    }
    let inv = 1.0 / (last - first) as f64;
    cp_mean.iter_mut().for_each(|m| *m *= inv);
    let theta = compute_cp(flow.sim().field(), flow.sim().geometry()).theta_deg;
    log::info!(
        "baseline: St = {:.4}, mean Cd = {:.4}, sigma Cl = {:.4}, mean Cl = {:.4}",
        stats.st,
        stats.mean_cd,
        stats.sigma_cl,
        stats.mean_cl
    );

    // Snapshots spread over one more period, starting at the current phase.
    let period = 1.0 / stats.st;
    let t0 = flow.time();
    let mut snapshots = vec![flow.sim().field().clone()];
    for k in 1..cfg.n_snapshots {
        let target = t0 + period * k as f64 / cfg.n_snapshots as f64;
        while flow.time() < target - 1e-9 {
            let step = ds.min(target - flow.time());
            flow.advance(&[0.0], step, None)?;
        }
        snapshots.push(flow.sim().field().clone());
    }
    Ok(BaselineResult {
        stats,
        st_halves,
        records: window.to_vec(),
        sample_interval: ds,
        cp: CpProfile {
            theta_deg: theta,
            cp: cp_mean,
        },
        cl_spectrum: spectrum(&cl, ds),
        snapshots,
    })
}

fn snapshot_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("snapshot_{k}.afcs"))
}

/// Writes `baseline_stats.csv`, `cl_cd.csv`, `cp.csv`, `spectrum.csv` and the snapshots.
pub fn save_baseline(dir: &Path, b: &BaselineResult, n_pe: usize) -> Result<(), OrchestratorError> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("baseline_stats.csv"), &FlowStats::HEADER, [b.stats.row()])?;
    write_force_csv(&dir.join("cl_cd.csv"), &b.records, n_pe)?;
    write_cp_csv(&dir.join("cp.csv"), &b.cp)?;
    write_spectrum_csv(&dir.join("spectrum.csv"), &b.cl_spectrum)?;
    for (k, s) in b.snapshots.iter().enumerate() {
        std::fs::write(snapshot_path(dir, k), encode_checkpoint(s))?;
    }
    Ok(())
}

/// `t, Cd_pe.., Cl_pe..` with the 2D forces replicated to every pseudo-environment.
pub fn write_force_csv(path: &Path, records: &[ForceRecord], n_pe: usize) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((0..n_pe).map(|j| format!("Cd_pe{j}")));
    header.extend((0..n_pe).map(|j| format!("Cl_pe{j}")));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &h,
        records.iter().map(|r| {
            let mut row = vec![r.t];
            row.extend(std::iter::repeat_n(r.cd, n_pe));
            row.extend(std::iter::repeat_n(r.cl, n_pe));
            row
        }),
    )
}

pub fn write_cp_csv(path: &Path, cp: &CpProfile) -> std::io::Result<()> {
    write_csv(
        path,
        &["theta_deg", "Cp"],
        cp.theta_deg.iter().zip(&cp.cp).map(|(t, c)| vec![*t, *c]),
    )
}

pub fn write_spectrum_csv(path: &Path, s: &Spectrum) -> std::io::Result<()> {
    write_csv(
        path,
        &["St", "power"],
        s.st.iter().zip(&s.power).map(|(f, p)| vec![*f, *p]),
    )
}

/// Baseline data needed by training and evaluation.
#[derive(Clone, Debug)]
pub struct StoredBaseline {
    pub stats: FlowStats,
    pub snapshot_paths: Vec<PathBuf>,
}

impl StoredBaseline {
    pub fn load_snapshot(&self, k: usize, nx: usize, ny: usize) -> Result<FlowField, OrchestratorError> {
        let bytes = std::fs::read(&self.snapshot_paths[k])?;
        Ok(decode_checkpoint_for(&bytes, nx, ny).map_err(crate::flow::FlowError::from)?)
    }
}

/// Reads what [`save_baseline`] wrote.
pub fn load_baseline(dir: &Path) -> Result<StoredBaseline, OrchestratorError> {
    let stats_path = dir.join("baseline_stats.csv");
    let (header, rows) = read_csv(&stats_path).map_err(|e| {
        OrchestratorError::Config(format!("cannot read baseline {}: {e}", stats_path.display()))
    })?;
    if header != FlowStats::HEADER || rows.len() != 1 {
        return Err(OrchestratorError::Config(format!(
            "{} does not hold one row of baseline statistics",
            stats_path.display()
        )));
    }
    let r = &rows[0];
    let stats = FlowStats {
        mean_cl: r[0],
        sigma_cl: r[1],
        st: r[2],
        mean_cd: r[3],
        cd_press: r[4],
        cd_visc: r[5],
    };
    let snapshot_paths: Vec<PathBuf> = (0..)
        .map(|k| snapshot_path(dir, k))
        .take_while(|p| p.exists())
        .collect();
    if snapshot_paths.is_empty() {
        return Err(OrchestratorError::Config(format!(
            "no baseline snapshots in {}",
            dir.display()
        )));
    }
    Ok(StoredBaseline {
        stats,
        snapshot_paths,
    })
}
