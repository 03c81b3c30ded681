//! Deterministic evaluation of a trained policy against the baseline.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::baseline::{write_cp_csv, FlowStats, StoredBaseline};
use super::config::RunConfig;
use super::csv::write_csv;
use super::env::{ControlledFlow, Trace};
use super::stats::{mean_sigma, signal_statistics, spectrum, SignalStats, StatsError};
use super::train::{episode_timing, write_trace_csvs};
use super::OrchestratorError;
use crate::agent::{ActMode, PolicyParams};
use crate::flow::diagnostics::{compute_cp, CpProfile};
use crate::flow::Simulation;

/// A spectral peak is dominant when it carries this multiple of the mean
/// spectral power.
pub const DOMINANCE: f64 = 10.0;
/// Largest relative change of mean Cd between the last two pairs of periods
/// for the controlled flow to count as steady, in percent.
pub const STEADY_DRIFT_PCT: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub baseline: FlowStats,
    pub controlled: FlowStats,
    pub cd_reduction_pct: f64,
    pub sigma_cl_reduction_pct: f64,
    /// Statistics of the applied flow rate over the window.
    pub actuation: SignalStats,
    /// Peak-to-mean power ratio of the actuation spectrum (0 without a peak).
    pub actuation_peak_ratio: f64,
    pub cd_drift_pct: f64,
    /// Uncontrolled onset followed by controlled substeps.
    pub trace: Trace,
    /// Time-averaged Cp over the window.
    pub cp: CpProfile,
    /// `St, power_Cl, power_Q` of the window.
    pub spectrum: Vec<[f64; 3]>,
}

impl Evaluation {
    pub fn actuation_has_dominant_peak(&self) -> bool {
        self.actuation.st.is_some() && self.actuation_peak_ratio >= DOMINANCE
    }

    pub fn steady(&self) -> bool {
        self.cd_drift_pct < STEADY_DRIFT_PCT
    }
}

/// Samples `(t, x)` (increasing `t`) at `t0, t0 + dt, ...` up to `t1`.
pub fn resample(t: &[f64], x: &[f64], t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt + 1e-9).floor() as usize + 1;
    let mut k = 0;
    (0..n)
        .map(|i| {
            let s = t0 + i as f64 * dt;
            while k + 2 < t.len() && t[k + 1] < s {
                k += 1;
            }
            let f = ((s - t[k]) / (t[k + 1] - t[k])).clamp(0.0, 1.0);
            x[k] + f * (x[k + 1] - x[k])
        })
        .collect()
}

/// Statistics that tolerate a series whose dominant frequency is too low
/// for the window (reported as no peak).
fn lenient_stats(x: &[f64], dt: f64) -> Result<SignalStats, OrchestratorError> {
    match signal_statistics(x, dt) {
        Ok(s) => Ok(s),
        Err(StatsError::TooFewPeriods { .. }) => {
            let (mean, sigma) = mean_sigma(x);
            Ok(SignalStats {
                mean,
                sigma,
                st: None,
                secondary_st: None,
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// Runs baseline snapshot 0 uncontrolled for `eval_onset`, then under the
/// deterministic policy for `eval_duration`, and compares the last
/// `eval_periods` baseline periods with the baseline.
pub fn evaluate(
    cfg: &RunConfig,
    baseline: &StoredBaseline,
    policy: &PolicyParams<f32>,
) -> Result<Evaluation, OrchestratorError> {
    cfg.validate()?;
    let tc = &cfg.train;
    let n_pe = cfg.sim.n_pe;
    let mut sim = Simulation::new(&cfg.sim, &cfg.jets)?;
    let field = baseline.load_snapshot(0, sim.field().nx(), sim.field().ny())?;
    sim.set_field(field)?;
    let mut flow = ControlledFlow::new(sim, &cfg.jets, cfg.sim.cfl, n_pe)?;
    let timing = episode_timing(baseline.stats.st, tc.episode_periods, tc.actions_per_episode);
    let t_start = flow.time();
    let mut trace = Trace::new(n_pe);
    let zero = vec![0.0; n_pe];
    while flow.time() - t_start < tc.eval_onset - 1e-9 {
        let step = timing.t_action.min(tc.eval_onset - (flow.time() - t_start));
        flow.advance(&zero, step, Some(&mut trace))?;
    }
    let n_actions = (tc.eval_duration / timing.t_action).ceil() as usize;
    let window = tc.eval_periods as f64 / baseline.stats.st;
    if window > n_actions as f64 * timing.t_action {
        return Err(OrchestratorError::Config(format!(
            "eval_duration {} is shorter than the {} period statistics window",
            tc.eval_duration, tc.eval_periods
        )));
    }
    let first_in_window = n_actions - (window / timing.t_action).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let (mut cd_press, mut cd_visc) = (0.0, 0.0);
    let mut cp_sum: Option<CpProfile> = None;
    let mut t_window = 0.0;
    for n in 0..n_actions {
        let q: Vec<f64> = flow
            .observe()
            .iter()
            .map(|obs| policy.act(obs, ActMode::Deterministic, &mut rng).map(|a| a.q))
            .collect::<Result<_, _>>()?;
        if n == first_in_window {
            t_window = flow.time();
        }
        let f = flow.advance(&q, timing.t_action, Some(&mut trace))?;
        if n >= first_in_window {
            cd_press += f.mean.cd_press;
            cd_visc += f.mean.cd_visc;
            let cp = compute_cp(flow.sim().field(), flow.sim().geometry());
            match &mut cp_sum {
                None => cp_sum = Some(cp),
                Some(s) => s.cp.iter_mut().zip(&cp.cp).for_each(|(a, b)| *a += b),
            }
        }
    }
    let n_window = (n_actions - first_in_window) as f64;
    let mut cp = cp_sum.expect("window holds at least one interval");
    cp.cp.iter_mut().for_each(|c| *c /= n_window);

    let t = trace.column(0);
    let cl = trace.column(1 + 2 * n_pe);
    let cd = trace.column(1 + n_pe);
    let q_applied: Vec<f64> = trace
        .rows
        .iter()
        .map(|r| r[1..1 + n_pe].iter().sum::<f64>() / n_pe as f64)
        .collect();
    let ds = tc.sample_interval;
    let t_end = flow.time();
    let cl_w = resample(&t, &cl, t_window, t_end, ds);
    let cd_w = resample(&t, &cd, t_window, t_end, ds);
    let q_w = resample(&t, &q_applied, t_window, t_end, ds);
    let cl_stats = lenient_stats(&cl_w, ds)?;
    let actuation = lenient_stats(&q_w, ds)?;
    let (cd_press, cd_visc) = (cd_press / n_window, cd_visc / n_window);
    let controlled = FlowStats {
        mean_cl: cl_stats.mean,
        sigma_cl: cl_stats.sigma,
        st: cl_stats.st.unwrap_or(0.0),
        mean_cd: cd_press + cd_visc,
        cd_press,
        cd_visc,
    };
    // Drift of mean Cd between the last two pairs of baseline periods.
    let pair = ((2.0 / baseline.stats.st) / ds).round() as usize;
    let cd_drift_pct = if cd_w.len() >= 2 * pair && pair > 0 {
        let a = mean_sigma(&cd_w[cd_w.len() - 2 * pair..cd_w.len() - pair]).0;
        let b = mean_sigma(&cd_w[cd_w.len() - pair..]).0;
        100.0 * (b - a).abs() / a.abs()
    } else {
        f64::INFINITY
    };
    let s_cl = spectrum(&cl_w, ds);
    let s_q = spectrum(&q_w, ds);
    let actuation_peak_ratio = match actuation.st {
        Some(_) => {
            let mean = s_q.power.iter().sum::<f64>() / s_q.power.len() as f64;
            let peak = s_q.power.iter().copied().fold(0.0, f64::max);
            if mean > 0.0 { peak / mean } else { 0.0 }
        }
        None => 0.0,
    };
    let b = &baseline.stats;
    Ok(Evaluation {
        baseline: *b,
        controlled,
        cd_reduction_pct: 100.0 * (b.mean_cd - controlled.mean_cd) / b.mean_cd,
        sigma_cl_reduction_pct: 100.0 * (b.sigma_cl - controlled.sigma_cl) / b.sigma_cl,
        actuation,
        actuation_peak_ratio,
        cd_drift_pct,
        trace,
        cp,
        spectrum: s_cl
            .st
            .iter()
            .zip(&s_cl.power)
            .zip(&s_q.power)
            .map(|((f, a), b)| [*f, *a, *b])
            .collect(),
    })
}

/// Writes `stats.csv` (baseline and controlled rows), `cl_cd.csv`,
/// `action.csv`, `cp.csv` and `spectrum.csv`.
pub fn save_evaluation(dir: &Path, e: &Evaluation) -> Result<(), OrchestratorError> {
    std::fs::create_dir_all(dir)?;
    let mut header = vec!["controlled"];
    header.extend(FlowStats::HEADER);
    header.extend(["Cd_reduction_pct", "sigma_Cl_reduction_pct"]);
    let row = |c: f64, s: &FlowStats| {
        let mut r = vec![c];
        r.extend(s.row());
        r.extend([e.cd_reduction_pct, e.sigma_cl_reduction_pct]);
        r
    };
    write_csv(
        &dir.join("stats.csv"),
        &header,
        [row(0.0, &e.baseline), row(1.0, &e.controlled)],
    )?;
    write_trace_csvs(dir, &e.trace)?;
    write_cp_csv(&dir.join("cp.csv"), &e.cp)?;
    write_csv(
        &dir.join("spectrum.csv"),
        &["St", "power_Cl", "power_Q"],
        e.spectrum.iter().map(|r| r.to_vec()),
    )?;
    Ok(())
}
