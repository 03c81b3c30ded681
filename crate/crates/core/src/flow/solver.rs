//! Fractional-step Navier-Stokes integrator on the staggered grid.
//!
//! One step:
//! 1. explicit Adams-Bashforth (variable step) for advection and diffusion,
//! 2. direct-forcing immersed boundary applied to the predictor including the
//!    previous pressure gradient,
//! 3. pressure Poisson solve (PCG, warm-started from the previous pressure),
//! 4. projection onto the divergence-free space.

use super::config::{JetConfig, SimConfig, U_INF};
use super::geometry::{build_domain, Boundaries, DomainGeometry};
use super::grid::Field2;
use super::ib::IbForcing;
use super::jets::jet_velocity;
use super::poisson::{pcg_solve, FastDiagonalization, PcgWorkspace, PoissonOperator};
use super::FlowError;
use crate::par;

/// Velocity and pressure on the staggered grid.
///
/// `u` has `(nx + 1) x ny` faces at `(i h, (j + 1/2) h)`, `v` has
/// `nx x (ny + 1)` faces at `((i + 1/2) h, j h)`, `p` lives at cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub u: Field2,
    pub v: Field2,
    pub p: Field2,
    pub t: f64,
}

impl FlowField {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            u: Field2::zeros(nx + 1, ny),
            v: Field2::zeros(nx, ny + 1),
            p: Field2::zeros(nx, ny),
            t: 0.0,
        }
    }

    pub fn nx(&self) -> usize {
        self.p.nx()
    }

    pub fn ny(&self) -> usize {
        self.p.ny()
    }

    /// Uniform stream `(u_inf, 0)` with zero pressure.
    pub fn uniform(nx: usize, ny: usize, u_inf: f64) -> Self {
        let mut f = Self::zeros(nx, ny);
        f.u = Field2::filled(nx + 1, ny, u_inf);
        f
    }

    /// Fills the interior from analytic velocity and pressure functions.
    pub fn from_fn(
        g: &DomainGeometry,
        u: impl Fn(f64, f64) -> f64,
        v: impl Fn(f64, f64) -> f64,
        p: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let (nx, ny, h) = (g.nx, g.ny, g.h);
        let mut f = Self::zeros(nx, ny);
        for j in 0..ny {
            for i in 0..=nx {
                f.u.set(i as isize, j as isize, u(i as f64 * h, (j as f64 + 0.5) * h));
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                f.v.set(i as isize, j as isize, v((i as f64 + 0.5) * h, j as f64 * h));
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                f.p.set(i as isize, j as isize, p((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
            }
        }
        f
    }

    /// Inviscid flow past the cylinder of `g`, with Bernoulli pressure
    /// (`p = 0` in the far field). Zero inside the body.
    pub fn potential_flow(g: &DomainGeometry) -> Self {
        let body = g.body.as_ref().expect("potential flow needs a cylinder");
        let (cx, cy) = body.center;
        let r2 = body.radius * body.radius;
        let vel = move |x: f64, y: f64| -> (f64, f64) {
            let (dx, dy) = (x - cx, y - cy);
            let rr = dx * dx + dy * dy;
            if rr <= r2 {
                return (0.0, 0.0);
            }
            let r4 = rr * rr;
            (
                U_INF * (1.0 - r2 * (dx * dx - dy * dy) / r4),
                -2.0 * U_INF * r2 * dx * dy / r4,
            )
        };
        let mut f = Self::from_fn(
            g,
            |x, y| vel(x, y).0,
            |x, y| vel(x, y).1,
            |x, y| {
                let (a, b) = vel(x, y);
                if (x - cx).powi(2) + (y - cy).powi(2) <= r2 {
                    0.5 * U_INF * U_INF
                } else {
                    0.5 * (U_INF * U_INF - a * a - b * b)
                }
            },
        );
        if let Boundaries::Channel { u_inf } = g.boundaries {
            for j in 0..g.ny as isize {
                f.u.set(0, j, u_inf);
            }
            for i in 0..g.nx as isize {
                f.v.set(i, 0, 0.0);
                f.v.set(i, g.ny as isize, 0.0);
            }
        }
        f
    }

    pub fn all_finite(&self) -> bool {
        self.u.all_finite() && self.v.all_finite() && self.p.all_finite() && self.t.is_finite()
    }

    /// Largest velocity component magnitude.
    pub fn max_speed(&self) -> f64 {
        self.u.max_abs_interior().max(self.v.max_abs_interior())
    }
}

/// Diagnostics of one time step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    /// `max |div u|` over all cells after projection.
    pub max_divergence: f64,
    /// Velocity impulse imparted to the fluid by the immersed boundary, per unit time.
    pub ib_force: (f64, f64),
}

/// One simulation instance: geometry, state and solver work space.
pub struct Simulation {
    geometry: DomainGeometry,
    nu: f64,
    field: FlowField,
    op: PoissonOperator,
    precond: FastDiagonalization,
    pcg: PcgWorkspace,
    poisson_tol: f64,
    poisson_max_iter: usize,
    ib: Option<IbForcing>,
    ib_iterations: usize,
    hu: Vec<f64>,
    hv: Vec<f64>,
    hu_prev: Vec<f64>,
    hv_prev: Vec<f64>,
    prev_dt: Option<f64>,
    rhs: Vec<f64>,
    pressure: Vec<f64>,
    targets: Vec<(f64, f64)>,
    offsets: Vec<(f64, f64)>,
    last: StepReport,
}

impl Simulation {
    /// Cylinder case described by `config`, started from potential flow.
    pub fn new(config: &SimConfig, jets: &JetConfig) -> Result<Self, FlowError> {
        let geometry = build_domain(config, jets)?;
        let field = FlowField::potential_flow(&geometry);
        Ok(Self::with_field(geometry, config, field))
    }

    /// Arbitrary geometry and initial state. Numerical knobs come from `config`.
    pub fn with_field(geometry: DomainGeometry, config: &SimConfig, field: FlowField) -> Self {
        assert_eq!((field.nx(), field.ny()), (geometry.nx, geometry.ny));
        let op = PoissonOperator::for_geometry(&geometry);
        let precond = FastDiagonalization::new(&op);
        let ib = geometry
            .body
            .as_ref()
            .map(|b| IbForcing::new(&b.markers, geometry.h));
        let n_markers = geometry.body.as_ref().map_or(0, |b| b.markers.len());
        let nu_len = field.u.raw().len();
        let nv_len = field.v.raw().len();
        let n = geometry.nx * geometry.ny;
        let mut sim = Self {
            nu: config.nu(),
            op,
            precond,
            pcg: PcgWorkspace::default(),
            poisson_tol: config.poisson_tol,
            poisson_max_iter: config.poisson_max_iter,
            ib,
            ib_iterations: config.ib_iterations,
            hu: vec![0.0; nu_len],
            hv: vec![0.0; nv_len],
            hu_prev: vec![0.0; nu_len],
            hv_prev: vec![0.0; nv_len],
            prev_dt: None,
            rhs: vec![0.0; n],
            pressure: vec![0.0; n],
            targets: vec![(0.0, 0.0); n_markers],
            offsets: vec![(0.0, 0.0); n_markers],
            last: StepReport::default(),
            field,
            geometry,
        };
        sim.fill_ghosts();
        sim
    }

    pub fn geometry(&self) -> &DomainGeometry {
        &self.geometry
    }

    pub fn field(&self) -> &FlowField {
        &self.field
    }

    pub fn time(&self) -> f64 {
        self.field.t
    }

    pub fn last_report(&self) -> StepReport {
        self.last
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Replaces the state, e.g. after loading a checkpoint. The multistep
    /// history is discarded, so the next step is a forward-Euler start.
    pub fn set_field(&mut self, field: FlowField) -> Result<(), FlowError> {
        if (field.nx(), field.ny()) != (self.geometry.nx, self.geometry.ny) {
            return Err(FlowError::Config(format!(
                "field is {}x{}, grid is {}x{}",
                field.nx(),
                field.ny(),
                self.geometry.nx,
                self.geometry.ny
            )));
        }
        self.field = field;
        self.prev_dt = None;
        self.fill_ghosts();
        Ok(())
    }

    /// Largest step satisfying the CFL target for the current state and the
    /// given extra wall speed (jet peak velocity).
    pub fn stable_dt(&self, cfl: f64, wall_speed: f64) -> f64 {
        let speed = self.field.max_speed().max(U_INF).max(wall_speed.abs());
        let h = self.geometry.h;
        let advective = cfl * h / speed;
        // AB2 is stable on the negative real axis only down to -1 (half the
        // Euler range), so 2D diffusion needs nu dt / h^2 <= 1/8; keep a margin.
        let diffusive = 0.1 * h * h / self.nu;
        advective.min(diffusive)
    }

    fn fill_ghosts(&mut self) {
        fill_velocity_ghosts(&self.geometry, &mut self.field.u, &mut self.field.v);
        fill_pressure_ghosts(&self.geometry, &mut self.field.p);
    }

    /// Advances the flow by `dt` with jet flow rate `jet_q` applied to the
    /// jet markers (ignored without a body).
    pub fn step(&mut self, jet_q: f64, dt: f64) -> Result<StepReport, FlowError> {
        assert!(dt > 0.0 && dt.is_finite(), "invalid time step {dt}");
        let g = &self.geometry;
        let (nx, ny, h) = (g.nx, g.ny, g.h);
        let channel = matches!(g.boundaries, Boundaries::Channel { .. });

        // 1. explicit right-hand side
        advection_diffusion(g, self.nu, &self.field.u, &self.field.v, &mut self.hu, &mut self.hv);
        let (c_new, c_old) = match self.prev_dt {
            Some(prev) => {
                let w = dt / prev;
                (1.0 + 0.5 * w, -0.5 * w)
            }
            None => (1.0, 0.0),
        };
        {
            let (su, sv) = (self.field.u.stride(), self.field.v.stride());
            let (hu, hup) = (&self.hu, &self.hu_prev);
            let (i_lo, i_hi) = if channel { (1, nx) } else { (0, nx) };
            let u_data = self.field.u.raw_mut();
            par::for_each_row(u_data, su, |row_j, row| {
                if row_j == 0 || row_j > ny {
                    return;
                }
                let base = row_j * su;
                for i in i_lo..i_hi {
                    let k = i + 1;
                    row[k] += dt * (c_new * hu[base + k] + c_old * hup[base + k]);
                }
            });
            if let Boundaries::Channel { u_inf } = g.boundaries {
                // convective outflow
                let u = &mut self.field.u;
                for j in 0..ny as isize {
                    let ub = u.get(nx as isize, j);
                    let ui = u.get(nx as isize - 1, j);
                    u.set(nx as isize, j, ub - dt * u_inf * (ub - ui) / h);
                }
            }
            let (hv, hvp) = (&self.hv, &self.hv_prev);
            let (j_lo, j_hi) = if channel { (1, ny) } else { (0, ny) };
            let v_data = self.field.v.raw_mut();
            par::for_each_row(v_data, sv, |row_j, row| {
                let j = row_j as isize - 1;
                if j < j_lo as isize || j >= j_hi as isize {
                    return;
                }
                let base = row_j * sv;
                for i in 0..nx {
                    let k = i + 1;
                    row[k] += dt * (c_new * hv[base + k] + c_old * hvp[base + k]);
                }
            });
        }
        std::mem::swap(&mut self.hu, &mut self.hu_prev);
        std::mem::swap(&mut self.hv, &mut self.hv_prev);
        self.prev_dt = Some(dt);

        // 2. immersed boundary on u# - dt grad p^n
        let mut ib_force = (0.0, 0.0);
        if let (Some(ib), Some(body)) = (&self.ib, &self.geometry.body) {
            fill_velocity_ghosts(&self.geometry, &mut self.field.u, &mut self.field.v);
            let p = &self.field.p;
            for (k, m) in body.markers.iter().enumerate() {
                self.targets[k] = jet_velocity(jet_q, m.theta, &body.jets);
                let su = &ib.u_stencils[k];
                let sv = &ib.v_stencils[k];
                let mut gx = 0.0;
                let mut gy = 0.0;
                for b in 0..3 {
                    for a in 0..3 {
                        let (iu, ju) = (su.i0 + a as isize, su.j0 + b as isize);
                        gx += su.w[b * 3 + a] * (p.get(iu, ju) - p.get(iu - 1, ju)) / h;
                        let (iv, jv) = (sv.i0 + a as isize, sv.j0 + b as isize);
                        gy += sv.w[b * 3 + a] * (p.get(iv, jv) - p.get(iv, jv - 1)) / h;
                    }
                }
                self.offsets[k] = (dt * gx, dt * gy);
            }
            let impulse = ib.enforce(
                &mut self.field.u,
                &mut self.field.v,
                &self.targets,
                &self.offsets,
                self.ib_iterations,
            );
            ib_force = (impulse.0 / dt, impulse.1 / dt);
        }
        fill_velocity_ghosts(&self.geometry, &mut self.field.u, &mut self.field.v);

        // 3. pressure: A p = -div(u#) / dt, warm start from p^n
        divergence(&self.geometry, &self.field.u, &self.field.v, &mut self.rhs);
        let inv_dt = -1.0 / dt;
        self.rhs.iter_mut().for_each(|r| *r *= inv_dt);
        self.field.p.interior_to(&mut self.pressure);
        let report = pcg_solve(
            &self.op,
            &mut self.precond,
            &self.rhs,
            &mut self.pressure,
            self.poisson_tol,
            self.poisson_max_iter,
            &mut self.pcg,
        )?;
        self.field.p.set_interior(&self.pressure);
        fill_pressure_ghosts(&self.geometry, &mut self.field.p);

        // 4. projection
        project(&self.geometry, &mut self.field.u, &mut self.field.v, &self.field.p, dt);
        fill_velocity_ghosts(&self.geometry, &mut self.field.u, &mut self.field.v);
        self.field.t += dt;

        divergence(&self.geometry, &self.field.u, &self.field.v, &mut self.rhs);
        let max_div = max_abs(&self.rhs);
        if !max_div.is_finite() || !self.field.u.all_finite() || !self.field.v.all_finite() {
            return Err(FlowError::NonFinite { t: self.field.t });
        }
        self.last = StepReport {
            dt,
            cg_iterations: report.iterations,
            cg_residual: report.relative_residual,
            max_divergence: max_div,
            ib_force,
        };
        Ok(self.last)
    }

    /// Marker velocities of the current state (no-slip diagnostics).
    pub fn marker_velocities(&self) -> Vec<(f64, f64)> {
        self.ib
            .as_ref()
            .map(|ib| ib.sample(&self.field.u, &self.field.v))
            .unwrap_or_default()
    }

    /// Cell divergences of the current state, row-major.
    pub fn divergence(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.geometry.nx * self.geometry.ny];
        divergence(&self.geometry, &self.field.u, &self.field.v, &mut out);
        out
    }
}

fn max_abs(v: &[f64]) -> f64 {
    par::max_chunked(v.len(), |r| {
        v[r].iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
    })
}

/// Sets ghost values (and periodic duplicates) of the velocity arrays.
pub fn fill_velocity_ghosts(g: &DomainGeometry, u: &mut Field2, v: &mut Field2) {
    let (nx, ny) = (g.nx as isize, g.ny as isize);
    match g.boundaries {
        Boundaries::Channel { .. } => {
            for i in 0..=nx {
                // free slip: du/dy = 0
                u.set(i, -1, u.get(i, 0));
                u.set(i, ny, u.get(i, ny - 1));
            }
            for j in 0..=ny {
                // v = 0 on the inlet plane, zero gradient at the outlet
                v.set(-1, j, -v.get(0, j));
                v.set(nx, j, v.get(nx - 1, j));
            }
        }
        Boundaries::Periodic => {
            for j in 0..ny {
                u.set(nx, j, u.get(0, j));
                u.set(-1, j, u.get(nx - 1, j));
            }
            for i in -1..=nx {
                u.set(i, -1, u.get(i, ny - 1));
                u.set(i, ny, u.get(i, 0));
            }
            for i in 0..nx {
                v.set(i, ny, v.get(i, 0));
                v.set(i, -1, v.get(i, ny - 1));
            }
            for j in -1..=ny {
                v.set(-1, j, v.get(nx - 1, j));
                v.set(nx, j, v.get(0, j));
            }
        }
    }
}

/// Sets pressure ghosts consistent with the Poisson boundary conditions.
pub fn fill_pressure_ghosts(g: &DomainGeometry, p: &mut Field2) {
    let (nx, ny) = (g.nx as isize, g.ny as isize);
    match g.boundaries {
        Boundaries::Channel { .. } => {
            for j in 0..ny {
                p.set(-1, j, p.get(0, j));
                p.set(nx, j, -p.get(nx - 1, j));
            }
            for i in -1..=nx {
                p.set(i, -1, p.get(i, 0));
                p.set(i, ny, p.get(i, ny - 1));
            }
        }
        Boundaries::Periodic => {
            for j in 0..ny {
                p.set(-1, j, p.get(nx - 1, j));
                p.set(nx, j, p.get(0, j));
            }
            for i in -1..=nx {
                p.set(i, -1, p.get(i, ny - 1));
                p.set(i, ny, p.get(i, 0));
            }
        }
    }
}

/// `out[j * nx + i] = (u_{i+1,j} - u_{i,j} + v_{i,j+1} - v_{i,j}) / h`.
pub fn divergence(g: &DomainGeometry, u: &Field2, v: &Field2, out: &mut [f64]) {
    let (nx, h) = (g.nx, g.h);
    let inv_h = 1.0 / h;
    let (su, sv) = (u.stride(), v.stride());
    let (ud, vd) = (u.raw(), v.raw());
    par::for_each_row(out, nx, |j, row| {
        let bu = (j + 1) * su + 1;
        let bv = (j + 1) * sv + 1;
        for (i, o) in row.iter_mut().enumerate() {
            *o = (ud[bu + i + 1] - ud[bu + i] + vd[bv + sv + i] - vd[bv + i]) * inv_h;
        }
    });
}

/// `u -= dt grad p` on every face that is not a Dirichlet boundary.
fn project(g: &DomainGeometry, u: &mut Field2, v: &mut Field2, p: &Field2, dt: f64) {
    let (nx, ny, h) = (g.nx, g.ny, g.h);
    let c = dt / h;
    let channel = matches!(g.boundaries, Boundaries::Channel { .. });
    let sp = p.stride();
    let pd = p.raw();
    let su = u.stride();
    let (i_lo, i_hi) = if channel { (1, nx + 1) } else { (0, nx) };
    par::for_each_row(u.raw_mut(), su, |row_j, row| {
        if row_j == 0 || row_j > ny {
            return;
        }
        let bp = row_j * sp + 1;
        for i in i_lo..i_hi {
            row[i + 1] -= c * (pd[bp + i] - pd[bp + i - 1]);
        }
    });
    let sv = v.stride();
    let (j_lo, j_hi) = if channel { (1, ny) } else { (0, ny) };
    par::for_each_row(v.raw_mut(), sv, |row_j, row| {
        let j = row_j as isize - 1;
        if j < j_lo as isize || j >= j_hi as isize {
            return;
        }
        let bp = row_j * sp + 1;
        for i in 0..nx {
            row[i + 1] -= c * (pd[bp + i] - pd[bp + i - sp]);
        }
    });
}

/// Explicit advection (divergence form) plus diffusion for the updated faces.
fn advection_diffusion(
    g: &DomainGeometry,
    nu: f64,
    u: &Field2,
    v: &Field2,
    hu: &mut [f64],
    hv: &mut [f64],
) {
    let (nx, ny, h) = (g.nx, g.ny, g.h);
    let inv_h = 1.0 / h;
    let diff = nu / (h * h);
    let channel = matches!(g.boundaries, Boundaries::Channel { .. });
    let (su, sv) = (u.stride(), v.stride());
    let (ud, vd) = (u.raw(), v.raw());

    let (i_lo, i_hi) = if channel { (1, nx) } else { (0, nx) };
    par::for_each_row(hu, su, |row_j, row| {
        if row_j == 0 || row_j > ny {
            return;
        }
        let bu = row_j * su + 1;
        // v faces below and above this u row: v(i, j) and v(i, j + 1)
        let bvs = row_j * sv + 1;
        let bvn = bvs + sv;
        for i in i_lo..i_hi {
            let k = bu + i;
            let uc = ud[k];
            let ue = ud[k + 1];
            let uw = ud[k - 1];
            let un = ud[k + su];
            let us = ud[k - su];
            let vn = 0.5 * (vd[bvn + i - 1] + vd[bvn + i]);
            let vs = 0.5 * (vd[bvs + i - 1] + vd[bvs + i]);
            let conv = (0.25 * ((ue + uc) * (ue + uc) - (uc + uw) * (uc + uw))
                + 0.5 * ((uc + un) * vn - (us + uc) * vs))
                * inv_h;
            let lap = (ue + uw + un + us - 4.0 * uc) * diff;
            row[i + 1] = lap - conv;
        }
    });

    let (j_lo, j_hi) = if channel { (1, ny) } else { (0, ny) };
    par::for_each_row(hv, sv, |row_j, row| {
        let j = row_j as isize - 1;
        if j < j_lo as isize || j >= j_hi as isize {
            return;
        }
        let bv = row_j * sv + 1;
        // u faces of the cells below (j - 1) and above (j)
        let bun = row_j * su + 1;
        let bus = bun - su;
        for i in 0..nx {
            let k = bv + i;
            let vc = vd[k];
            let ve = vd[k + 1];
            let vw = vd[k - 1];
            let vn = vd[k + sv];
            let vs = vd[k - sv];
            let ue = 0.5 * (ud[bun + i + 1] + ud[bus + i + 1]);
            let uw = 0.5 * (ud[bun + i] + ud[bus + i]);
            let conv = (0.5 * (ue * (vc + ve) - uw * (vw + vc))
                + 0.25 * ((vc + vn) * (vc + vn) - (vs + vc) * (vs + vc)))
                * inv_h;
            let lap = (ve + vw + vn + vs - 4.0 * vc) * diff;
            row[i + 1] = lap - conv;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::poisson::PoissonOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn channel(nx: usize, ny: usize) -> DomainGeometry {
        DomainGeometry::empty(nx, ny, 0.1, Boundaries::Channel { u_inf: 1.0 })
    }

    #[test]
    fn projection_operator_matches_poisson_operator() {
        for g in [
            channel(12, 9),
            DomainGeometry::empty(10, 8, 0.125, Boundaries::Periodic),
        ] {
            let op = PoissonOperator::for_geometry(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let x: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut p = Field2::zeros(g.nx, g.ny);
            p.set_interior(&x);
            fill_pressure_ghosts(&g, &mut p);
            // -div(grad p) through the projection path, with dt = 1 on zero velocity.
            let mut u = Field2::zeros(g.nx + 1, g.ny);
            let mut v = Field2::zeros(g.nx, g.ny + 1);
            project(&g, &mut u, &mut v, &p, 1.0);
            fill_velocity_ghosts(&g, &mut u, &mut v);
            let mut div = vec![0.0; op.len()];
            divergence(&g, &u, &v, &mut div);
            let mut ax = vec![0.0; op.len()];
            op.apply(&x, &mut ax);
            for (a, d) in ax.iter().zip(&div) {
                assert!((a - d).abs() < 1e-9, "{a} vs {d}");
            }
        }
    }

    #[test]
    fn uniform_stream_is_an_equilibrium() {
        let g = channel(40, 20);
        let field = FlowField::uniform(40, 20, 1.0);
        let mut sim = Simulation::with_field(g, &SimConfig::default(), field.clone());
        for _ in 0..20 {
            sim.step(0.0, 0.02).unwrap();
        }
        assert_eq!(sim.field().u, {
            let mut f = field.clone();
            fill_velocity_ghosts(sim.geometry(), &mut f.u, &mut f.v);
            f.u
        });
        assert!(sim.field().v.max_abs_interior() == 0.0);
        assert!(sim.field().p.max_abs_interior() == 0.0);
    }

    #[test]
    fn random_field_becomes_divergence_free() {
        let g = channel(30, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut field = FlowField::uniform(30, 20, 1.0);
        for j in 0..20 {
            for i in 1..=30 {
                field.u.add(i, j, 0.1 * rng.random_range(-1.0..1.0));
            }
        }
        let mut sim = Simulation::with_field(g, &SimConfig::default(), field);
        let rep = sim.step(0.0, 0.01).unwrap();
        assert!(rep.max_divergence < 1e-9, "{rep:?}");
    }
}
