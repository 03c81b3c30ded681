//! Aerodynamic forces and wall pressure coefficient.
//!
//! Surface quantities are sampled on a ring of points just outside the
//! immersed-boundary forcing band, at `r = D/2 + 1.5 h`.

use std::f64::consts::PI;

use super::config::{RHO, U_INF};
use super::geometry::{Cylinder, DomainGeometry};
use super::grid::Field2;
use super::solver::FlowField;

/// Number of samples in the surface integrals and the Cp profile.
pub const N_SURFACE: usize = 360;

/// Force coefficients of one sample time.
///
/// Coefficients use `1/2 rho U^2 S` with `S = L_jet D`; since the force on one
/// pseudo-environment is the per-unit-span force times `L_jet`, `L_jet` cancels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForceRecord {
    pub t: f64,
    pub cd: f64,
    pub cl: f64,
    pub cd_press: f64,
    pub cd_visc: f64,
    pub cl_press: f64,
    pub cl_visc: f64,
}

/// Wall pressure coefficient against the angle from the front stagnation point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CpProfile {
    pub theta_deg: Vec<f64>,
    pub cp: Vec<f64>,
}

/// Radius of the sampling ring.
pub fn offset_radius(body: &Cylinder, h: f64) -> f64 {
    body.radius + 1.5 * h
}

/// Bilinear interpolation of a quantity defined at `(i + ox, j + oy) h` by `f(i, j)`.
fn bilinear(h: f64, ox: f64, oy: f64, x: f64, y: f64, f: impl Fn(isize, isize) -> f64) -> f64 {
    let a = x / h - ox;
    let b = y / h - oy;
    let i = a.floor();
    let j = b.floor();
    let (fa, fb) = (a - i, b - j);
    let (i, j) = (i as isize, j as isize);
    (1.0 - fa) * (1.0 - fb) * f(i, j)
        + fa * (1.0 - fb) * f(i + 1, j)
        + (1.0 - fa) * fb * f(i, j + 1)
        + fa * fb * f(i + 1, j + 1)
}

/// Pressure interpolated from cell centres.
pub fn pressure_at(p: &Field2, h: f64, x: f64, y: f64) -> f64 {
    bilinear(h, 0.5, 0.5, x, y, |i, j| p.get(i, j))
}

/// Velocity gradient `(du/dx, du/dy, dv/dx, dv/dy)` at a point.
///
/// Normal derivatives live at cell centres, cross derivatives at cell corners.
pub fn velocity_gradient(field: &FlowField, h: f64, x: f64, y: f64) -> [f64; 4] {
    let (u, v) = (&field.u, &field.v);
    let ux = bilinear(h, 0.5, 0.5, x, y, |i, j| (u.get(i + 1, j) - u.get(i, j)) / h);
    let vy = bilinear(h, 0.5, 0.5, x, y, |i, j| (v.get(i, j + 1) - v.get(i, j)) / h);
    let uy = bilinear(h, 0.0, 0.0, x, y, |i, j| (u.get(i, j) - u.get(i, j - 1)) / h);
    let vx = bilinear(h, 0.0, 0.0, x, y, |i, j| (v.get(i, j) - v.get(i - 1, j)) / h);
    [ux, uy, vx, vy]
}

/// Drag and lift from the pressure and viscous tractions on the sampling ring.
///
/// Returns zeros when the geometry has no body.
pub fn compute_forces(field: &FlowField, g: &DomainGeometry, nu: f64) -> ForceRecord {
    let Some(body) = &g.body else {
        return ForceRecord {
            t: field.t,
            ..ForceRecord::default()
        };
    };
    let mu = RHO * nu;
    let r = offset_radius(body, g.h);
    let ds = 2.0 * PI * r / N_SURFACE as f64;
    let (cx, cy) = body.center;
    let (mut fxp, mut fyp, mut fxv, mut fyv) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..N_SURFACE {
        let th = 2.0 * PI * k as f64 / N_SURFACE as f64;
        let (nx, ny) = (th.cos(), th.sin());
        let (x, y) = (cx + r * nx, cy + r * ny);
        let p = pressure_at(&field.p, g.h, x, y);
        let [ux, uy, vx, vy] = velocity_gradient(field, g.h, x, y);
        fxp -= p * nx * ds;
        fyp -= p * ny * ds;
        fxv += mu * (2.0 * ux * nx + (uy + vx) * ny) * ds;
        fyv += mu * ((uy + vx) * nx + 2.0 * vy * ny) * ds;
    }
    let scale = 1.0 / (0.5 * RHO * U_INF * U_INF * body.radius * 2.0);
    let (cd_press, cd_visc) = (fxp * scale, fxv * scale);
    let (cl_press, cl_visc) = (fyp * scale, fyv * scale);
    ForceRecord {
        t: field.t,
        cd: cd_press + cd_visc,
        cl: cl_press + cl_visc,
        cd_press,
        cd_visc,
        cl_press,
        cl_visc,
    }
}

/// Reference pressure: mean over the inlet plane.
pub fn reference_pressure(field: &FlowField) -> f64 {
    let ny = field.p.ny();
    (0..ny as isize).map(|j| field.p.get(0, j)).sum::<f64>() / ny as f64
}

/// Pressure coefficient with respect to the inlet-plane reference.
pub fn pressure_coefficient(p: f64, p_ref: f64) -> f64 {
    (p - p_ref) / (0.5 * RHO * U_INF * U_INF)
}

/// Cp on the sampling ring, `theta = 0` at the front stagnation point and
/// increasing over the upper surface.
pub fn compute_cp(field: &FlowField, g: &DomainGeometry) -> CpProfile {
    let Some(body) = &g.body else {
        return CpProfile::default();
    };
    let p_ref = reference_pressure(field);
    let r = offset_radius(body, g.h);
    let (cx, cy) = body.center;
    let mut out = CpProfile::default();
    for k in 0..N_SURFACE {
        let theta = 360.0 * k as f64 / N_SURFACE as f64;
        let phi = PI - theta.to_radians();
        let p = pressure_at(&field.p, g.h, cx + r * phi.cos(), cy + r * phi.sin());
        out.theta_deg.push(theta);
        out.cp.push(pressure_coefficient(p, p_ref));
    }
    out
}
