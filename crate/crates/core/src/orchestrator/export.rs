//! Collects the plotting tables of a finished run into one directory.

use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::csv::{read_csv, write_csv};
use super::OrchestratorError;

fn input(path: PathBuf) -> Result<(Vec<String>, Vec<Vec<f64>>), OrchestratorError> {
    read_csv(&path).map_err(|e| {
        OrchestratorError::Config(format!("missing or unreadable {}: {e}", path.display()))
    })
}

fn copy(src: PathBuf, dst: &Path) -> Result<(), OrchestratorError> {
    let (h, rows) = input(src)?;
    let h: Vec<&str> = h.iter().map(String::as_str).collect();
    Ok(write_csv(dst, &h, rows)?)
}

/// Writes `cl_cd.csv`, `reward.csv`, `action.csv`, `cp.csv` (baseline and
/// controlled side by side) and `spectrum.csv` to `cfg.export_dir()`.
/// Returns the written paths.
pub fn export(cfg: &RunConfig) -> Result<Vec<PathBuf>, OrchestratorError> {
    let out = cfg.export_dir();
    std::fs::create_dir_all(&out)?;
    let (tr, ev, bl) = (cfg.train_dir(), cfg.evaluate_dir(), cfg.baseline_dir());
    let mut written = Vec::new();
    for (src, name) in [
        (ev.join("cl_cd.csv"), "cl_cd.csv"),
        (tr.join("reward.csv"), "reward.csv"),
        (ev.join("action.csv"), "action.csv"),
        (ev.join("spectrum.csv"), "spectrum.csv"),
    ] {
        let dst = out.join(name);
        copy(src, &dst)?;
        written.push(dst);
    }
    let (_, base) = input(bl.join("cp.csv"))?;
    let (_, ctrl) = input(ev.join("cp.csv"))?;
    if base.len() != ctrl.len() || base.iter().zip(&ctrl).any(|(a, b)| (a[0] - b[0]).abs() > 1e-6) {
        return Err(OrchestratorError::Config(
            "baseline and evaluation Cp profiles use different surface angles".into(),
        ));
    }
    let dst = out.join("cp.csv");
    write_csv(
        &dst,
        &["theta_deg", "Cp_baseline", "Cp_controlled"],
        base.iter().zip(&ctrl).map(|(a, b)| vec![a[0], a[1], b[1]]),
    )?;
    written.push(dst);
    Ok(written)
}
