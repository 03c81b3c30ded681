//! Reference problems with known answers for checking the solver.

use std::f64::consts::PI;

use super::config::{JetConfig, SimConfig, DIAMETER, RHO};
use super::geometry::{Boundaries, DomainGeometry};
use super::jets::{jet_profile, JetSide};
use super::solver::{FlowField, Simulation};
use super::FlowError;

/// Taylor–Green vortex on the unit periodic square, wavenumber `2 pi`:
/// `u = sin(kx) cos(ky) F`, `v = -cos(kx) sin(ky) F`, `F = exp(-2 nu k^2 t)`.
pub struct TaylorGreen {
    pub nu: f64,
}

impl TaylorGreen {
    pub const K: f64 = 2.0 * PI;

    pub fn decay(&self, t: f64) -> f64 {
        (-2.0 * self.nu * Self::K * Self::K * t).exp()
    }

    pub fn field(&self, g: &DomainGeometry, t: f64) -> FlowField {
        let (k, f) = (Self::K, self.decay(t));
        FlowField::from_fn(
            g,
            |x, y| (k * x).sin() * (k * y).cos() * f,
            |x, y| -(k * x).cos() * (k * y).sin() * f,
            |x, y| 0.25 * RHO * ((2.0 * k * x).cos() + (2.0 * k * y).cos()) * f * f,
        )
    }

    /// Analytic kinetic energy `0.5 int |u|^2` over the unit square.
    pub fn energy(&self, t: f64) -> f64 {
        0.25 * self.decay(t).powi(2)
    }
}

/// `0.5 sum |u|^2 h^2` over the interior faces (periodic duplicates excluded).
pub fn kinetic_energy(field: &FlowField, g: &DomainGeometry) -> f64 {
    let mut e = 0.0;
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            e += field.u.get(i, j).powi(2) + field.v.get(i, j).powi(2);
        }
    }
    0.5 * e * g.h * g.h
}

/// Relative L2 difference of the face velocities of two fields.
pub fn velocity_l2_error(a: &FlowField, b: &FlowField, g: &DomainGeometry) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            num += (a.u.get(i, j) - b.u.get(i, j)).powi(2) + (a.v.get(i, j) - b.v.get(i, j)).powi(2);
            den += b.u.get(i, j).powi(2) + b.v.get(i, j).powi(2);
        }
    }
    (num / den).sqrt()
}

/// Outcome of [`run_taylor_green`].
#[derive(Clone, Copy, Debug)]
pub struct TaylorGreenRun {
    pub steps: usize,
    /// `|E_h - E| / E` at the final time.
    pub energy_error: f64,
    pub velocity_error: f64,
    /// Largest post-projection divergence over all steps.
    pub max_divergence: f64,
}

/// Integrates the vortex on an `n x n` grid up to `t_end` with steps of at
/// most `dt_max` (and within the solver stability limit).
pub fn run_taylor_green(n: usize, nu: f64, t_end: f64, dt_max: f64) -> Result<TaylorGreenRun, FlowError> {
    let g = DomainGeometry::empty(n, n, 1.0 / n as f64, Boundaries::Periodic);
    let tg = TaylorGreen { nu };
    let config = SimConfig {
        re: 1.0 / nu,
        ..SimConfig::default()
    };
    let mut sim = Simulation::with_field(g.clone(), &config, tg.field(&g, 0.0));
    let dt_limit = sim.stable_dt(config.cfl, 0.0).min(dt_max);
    let steps = (t_end / dt_limit - 1e-9).ceil() as usize;
    let dt = t_end / steps as f64;
    let mut max_divergence: f64 = 0.0;
    for _ in 0..steps {
        let r = sim.step(0.0, dt)?;
        max_divergence = max_divergence.max(r.max_divergence);
    }
    let exact = tg.field(&g, t_end);
    let e_h = kinetic_energy(sim.field(), &g);
    Ok(TaylorGreenRun {
        steps,
        energy_error: (e_h - tg.energy(t_end)).abs() / tg.energy(t_end),
        velocity_error: velocity_l2_error(sim.field(), &exact, &g),
        max_divergence,
    })
}

/// Mass flux `int rho v_r (D/2) dtheta` through one jet arc, by the midpoint
/// rule with `panels` panels in the offset from the arc centre.
pub fn jet_mass_flux(q: f64, side: JetSide, jets: &JetConfig, panels: usize) -> f64 {
    let w = jets.omega();
    let d = w / panels as f64;
    (0..panels)
        .map(|k| side.sign() * jet_profile(q, -0.5 * w + (k as f64 + 0.5) * d, jets))
        .sum::<f64>()
        * RHO
        * 0.5
        * DIAMETER
        * d
}

/// The same domain with every jet marker turned into a plain no-slip marker.
pub fn without_jets(g: &DomainGeometry) -> DomainGeometry {
    let mut g = g.clone();
    if let Some(body) = g.body.as_mut() {
        body.markers.iter_mut().for_each(|m| m.jet = None);
    }
    g
}
