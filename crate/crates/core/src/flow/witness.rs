//! Witness-point probes that form the agent observation.
//!
//! Each pseudo-environment carries 85 probes: three rings of 24 points at
//! `r = 0.6, 0.8, 1.0 D` around the cylinder plus 13 points on the wake
//! centreline at `x/D = 0.75 .. 3.75`. The ring angles are offset by half a
//! step so no ring point duplicates a centreline point. The probed value is
//! the pressure coefficient.

use std::f64::consts::PI;

use super::diagnostics::{pressure_at, pressure_coefficient, reference_pressure};
use super::geometry::DomainGeometry;
use super::solver::FlowField;
use super::FlowError;

/// Probes per pseudo-environment.
pub const N_WITNESS: usize = 85;
/// Agent input length: left neighbour, self, right neighbour.
pub const OBS_LEN: usize = 3 * N_WITNESS;

const RING_RADII: [f64; 3] = [0.6, 0.8, 1.0];
const RING_POINTS: usize = 24;
const WAKE_POINTS: usize = 13;

/// Probe coordinates in the `xy` plane.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessLayout {
    pub points: Vec<(f64, f64)>,
}

impl WitnessLayout {
    /// The standard layout around the cylinder of `g`.
    pub fn around(g: &DomainGeometry) -> Result<Self, FlowError> {
        let body = g
            .body
            .as_ref()
            .ok_or_else(|| FlowError::Config("witness layout needs a cylinder".into()))?;
        let (cx, cy) = body.center;
        let mut points = Vec::with_capacity(N_WITNESS);
        for r in RING_RADII {
            for k in 0..RING_POINTS {
                let th = 2.0 * PI * (k as f64 + 0.5) / RING_POINTS as f64;
                points.push((cx + r * th.cos(), cy + r * th.sin()));
            }
        }
        for k in 0..WAKE_POINTS {
            points.push((cx + 0.75 + 0.25 * k as f64, cy));
        }
        for &(x, y) in &points {
            if !g.contains(x, y) || (x - cx).hypot(y - cy) <= body.radius {
                return Err(FlowError::Config(format!(
                    "witness point ({x}, {y}) is outside the fluid"
                )));
            }
        }
        Ok(Self { points })
    }

    /// Cp at every probe.
    pub fn sample(&self, field: &FlowField, g: &DomainGeometry) -> Vec<f64> {
        let p_ref = reference_pressure(field);
        self.points
            .iter()
            .map(|&(x, y)| pressure_coefficient(pressure_at(&field.p, g.h, x, y), p_ref))
            .collect()
    }
}

/// Builds the agent inputs `[left, self, right]` with spanwise-periodic
/// neighbours from per-pseudo-environment probe vectors.
pub fn neighbor_observations(per_pe: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = per_pe.len();
    (0..n)
        .map(|j| {
            let left = &per_pe[(j + n - 1) % n];
            let right = &per_pe[(j + 1) % n];
            let mut obs = Vec::with_capacity(left.len() + per_pe[j].len() + right.len());
            obs.extend_from_slice(left);
            obs.extend_from_slice(&per_pe[j]);
            obs.extend_from_slice(right);
            obs
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::config::{JetConfig, SimConfig};
    use crate::flow::geometry::build_domain;
    use crate::flow::grid::Field2;

    fn geometry() -> DomainGeometry {
        build_domain(&SimConfig::default(), &JetConfig::default()).unwrap()
    }

    #[test]
    fn layout_has_85_fluid_points() {
        let g = geometry();
        let w = WitnessLayout::around(&g).unwrap();
        assert_eq!(w.points.len(), N_WITNESS);
        for (a, p) in w.points.iter().enumerate() {
            for q in &w.points[a + 1..] {
                assert!((p.0 - q.0).hypot(p.1 - q.1) > 1e-6, "duplicate probe");
            }
        }
    }

    #[test]
    fn reference_pressure_everywhere_gives_zero() {
        let g = geometry();
        let w = WitnessLayout::around(&g).unwrap();
        let mut f = FlowField::uniform(g.nx, g.ny, 1.0);
        f.p = Field2::filled(g.nx, g.ny, 0.3);
        let obs = neighbor_observations(&[w.sample(&f, &g)]);
        assert_eq!(obs[0].len(), OBS_LEN);
        assert!(obs[0].iter().all(|&c| c.abs() < 1e-12));
    }

    #[test]
    fn single_pe_neighbours_are_copies() {
        let v: Vec<f64> = (0..N_WITNESS).map(|k| k as f64).collect();
        let obs = neighbor_observations(std::slice::from_ref(&v));
        assert_eq!(&obs[0][..85], &v[..]);
        assert_eq!(&obs[0][85..170], &v[..]);
        assert_eq!(&obs[0][170..], &v[..]);
    }

    #[test]
    fn periodic_neighbours() {
        let per: Vec<Vec<f64>> = (0..10).map(|j| vec![j as f64; N_WITNESS]).collect();
        let obs = neighbor_observations(&per);
        assert_eq!(obs[0][0], 9.0);
        assert_eq!(obs[0][85], 0.0);
        assert_eq!(obs[0][170], 1.0);
        assert_eq!(obs[9][170], 0.0);
    }
}
