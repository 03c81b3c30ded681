//! A simulation with its jets driven by per-pseudo-environment flow rates.
//!
//! The solver is two-dimensional, so the pseudo-environments share one
//! flow: the applied flow rate is the mean of their commands, and
//! observations and forces are replicated to every pseudo-environment.

use std::f64::consts::PI;

use crate::flow::diagnostics::{compute_forces, ForceRecord};
use crate::flow::witness::{neighbor_observations, WitnessLayout};
use crate::flow::{FlowError, JetConfig, Simulation, DIAMETER, RHO};

/// Substep rows `t, Q_0..Q_{n-1}, Cd_0.., Cl_0..`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub n_pe: usize,
    pub rows: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(n_pe: usize) -> Self {
        Self {
            n_pe,
            rows: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        1 + 3 * self.n_pe
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((0..self.n_pe).map(|j| format!("Q_pe{j}")));
        h.extend((0..self.n_pe).map(|j| format!("Cd_pe{j}")));
        h.extend((0..self.n_pe).map(|j| format!("Cl_pe{j}")));
        h
    }

    pub fn flat(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }

    pub fn from_flat(n_pe: usize, flat: &[f64]) -> Self {
        let w = 1 + 3 * n_pe;
        Self {
            n_pe,
            rows: flat.chunks_exact(w).map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }
}

/// Time averages of the force coefficients over one control interval.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntervalForces {
    pub mean: ForceRecord,
    /// Forces at the end of the interval.
    pub last: ForceRecord,
    pub substeps: usize,
}

/// Largest wall-normal jet speed for flow rate `q`.
pub fn jet_peak_speed(q: f64, jets: &JetConfig) -> f64 {
    q.abs() * PI / (RHO * DIAMETER * jets.omega())
}

pub struct ControlledFlow {
    sim: Simulation,
    layout: WitnessLayout,
    jets: JetConfig,
    cfl: f64,
    q: Vec<f64>,
}

impl ControlledFlow {
    pub fn new(sim: Simulation, jets: &JetConfig, cfl: f64, n_pe: usize) -> Result<Self, FlowError> {
        assert!(n_pe >= 1);
        let layout = WitnessLayout::around(sim.geometry())?;
        Ok(Self {
            sim,
            layout,
            jets: jets.clone(),
            cfl,
            q: vec![0.0; n_pe],
        })
    }

    pub fn sim(&self) -> &Simulation {
        &self.sim
    }

    pub fn n_pe(&self) -> usize {
        self.q.len()
    }

    /// Flow rates commanded at the end of the last interval.
    pub fn current_q(&self) -> &[f64] {
        &self.q
    }

    pub fn time(&self) -> f64 {
        self.sim.time()
    }

    pub fn forces(&self) -> ForceRecord {
        compute_forces(self.sim.field(), self.sim.geometry(), self.sim.nu())
    }

    /// Witness Cp of one pseudo-environment.
    pub fn probe(&self) -> Vec<f64> {
        self.layout.sample(self.sim.field(), self.sim.geometry())
    }

    /// Agent inputs `[left, self, right]` of every pseudo-environment.
    pub fn observe(&self) -> Vec<Vec<f64>> {
        let p = self.probe();
        neighbor_observations(&vec![p; self.n_pe()])
    }

    /// Advances by `duration`, ramping each command linearly from its current
    /// value to `q_new`. Every substep applies the command at its end time.
    pub fn advance(
        &mut self,
        q_new: &[f64],
        duration: f64,
        mut trace: Option<&mut Trace>,
    ) -> Result<IntervalForces, FlowError> {
        assert_eq!(q_new.len(), self.n_pe());
        assert!(duration > 0.0);
        let q_old = self.q.clone();
        let peak = q_old
            .iter()
            .chain(q_new)
            .map(|q| jet_peak_speed(*q, &self.jets))
            .fold(0.0, f64::max);
        let dt_max = self.sim.stable_dt(self.cfl, peak);
        let n = ((duration / dt_max) - 1e-9).ceil().max(1.0) as usize;
        let dt = duration / n as f64;
        let mut sum = ForceRecord::default();
        let mut last = ForceRecord::default();
        let mut q_now = vec![0.0; q_new.len()];
        for k in 1..=n {
            let s = k as f64 / n as f64;
            for ((qn, a), b) in q_now.iter_mut().zip(&q_old).zip(q_new) {
                *qn = if k == n { *b } else { a + (b - a) * s };
            }
            let applied = q_now.iter().sum::<f64>() / q_now.len() as f64;
            self.sim.step(applied, dt)?;
            last = self.forces();
            sum.cd_press += last.cd_press;
            sum.cd_visc += last.cd_visc;
            sum.cl_press += last.cl_press;
            sum.cl_visc += last.cl_visc;
            if let Some(tr) = trace.as_deref_mut() {
                let mut row = Vec::with_capacity(tr.width());
                row.push(last.t);
                row.extend_from_slice(&q_now);
                row.extend(std::iter::repeat_n(last.cd, q_now.len()));
                row.extend(std::iter::repeat_n(last.cl, q_now.len()));
                tr.rows.push(row);
            }
        }
        self.q.copy_from_slice(q_new);
        let inv = 1.0 / n as f64;
        let (cd_press, cd_visc) = (sum.cd_press * inv, sum.cd_visc * inv);
        let (cl_press, cl_visc) = (sum.cl_press * inv, sum.cl_visc * inv);
        // Keep the decomposition exact for the averages too.
        let mean = ForceRecord {
            t: last.t,
            cd: cd_press + cd_visc,
            cl: cl_press + cl_visc,
            cd_press,
            cd_visc,
            cl_press,
            cl_visc,
        };
        Ok(IntervalForces {
            mean,
            last,
            substeps: n,
        })
    }

    pub fn into_sim(self) -> Simulation {
        self.sim
    }
}
