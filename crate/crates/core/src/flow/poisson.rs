//! Pressure Poisson solve: preconditioned conjugate gradient on the
//! cell-centred 5-point operator `A = -div grad`.
//!
//! The default preconditioner diagonalizes `A` with a cosine (or Fourier)
//! transform along `y` and solves the remaining tridiagonal systems along
//! `x`. On the uniform grids used here that inverse is exact, so CG usually
//! stops after one iteration; the CG loop still owns convergence control.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::geometry::{Boundaries, DomainGeometry};
use super::FlowError;
use crate::par;

/// Boundary treatment of the pressure along `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XBoundary {
    /// Zero normal gradient on the west face, zero value on the east face.
    NeumannDirichlet,
    Periodic,
}

/// Boundary treatment of the pressure along `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YBoundary {
    Neumann,
    Periodic,
}

/// The discrete operator `A = -div grad` on an `nx * ny` cell grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonOperator {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub x_bc: XBoundary,
    pub y_bc: YBoundary,
}

impl PoissonOperator {
    pub fn for_geometry(g: &DomainGeometry) -> Self {
        let (x_bc, y_bc) = match g.boundaries {
            Boundaries::Channel { .. } => (XBoundary::NeumannDirichlet, YBoundary::Neumann),
            Boundaries::Periodic => (XBoundary::Periodic, YBoundary::Periodic),
        };
        Self {
            nx: g.nx,
            ny: g.ny,
            h: g.h,
            x_bc,
            y_bc,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when constants lie in the null space of `A`.
    pub fn is_singular(&self) -> bool {
        self.x_bc == XBoundary::Periodic
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let inv_h2 = 1.0 / (self.h * self.h);
        let x_bc = self.x_bc;
        let y_bc = self.y_bc;
        par::for_each_row(out, nx, |j, row| {
            let c = &x[j * nx..(j + 1) * nx];
            let south: Option<&[f64]> = if j > 0 {
                Some(&x[(j - 1) * nx..j * nx])
            } else if y_bc == YBoundary::Periodic {
                Some(&x[(ny - 1) * nx..ny * nx])
            } else {
                None
            };
            let north: Option<&[f64]> = if j + 1 < ny {
                Some(&x[(j + 1) * nx..(j + 2) * nx])
            } else if y_bc == YBoundary::Periodic {
                Some(&x[..nx])
            } else {
                None
            };
            for i in 0..nx {
                let xc = c[i];
                let mut s = 0.0;
                s += if i > 0 {
                    xc - c[i - 1]
                } else if x_bc == XBoundary::Periodic {
                    xc - c[nx - 1]
                } else {
                    0.0
                };
                s += if i + 1 < nx {
                    xc - c[i + 1]
                } else if x_bc == XBoundary::Periodic {
                    xc - c[0]
                } else {
                    2.0 * xc
                };
                if let Some(sr) = south {
                    s += xc - sr[i];
                }
                if let Some(nr) = north {
                    s += xc - nr[i];
                }
                row[i] = s * inv_h2;
            }
        });
    }

    /// Diagonal of `A`.
    pub fn diagonal(&self) -> Vec<f64> {
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut d = vec![0.0; self.len()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let mut c = 0.0;
                c += if i > 0 || self.x_bc == XBoundary::Periodic { 1.0 } else { 0.0 };
                c += if i + 1 < self.nx || self.x_bc == XBoundary::Periodic { 1.0 } else { 2.0 };
                c += if j > 0 || self.y_bc == YBoundary::Periodic { 1.0 } else { 0.0 };
                c += if j + 1 < self.ny || self.y_bc == YBoundary::Periodic { 1.0 } else { 0.0 };
                d[j * self.nx + i] = c * inv_h2;
            }
        }
        d
    }
}

/// Approximate inverse of [`PoissonOperator`] used inside CG.
pub trait Preconditioner: Send {
    /// `z = M^{-1} r`.
    fn apply(&mut self, r: &[f64], z: &mut [f64]);
}

/// Diagonal scaling.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(op: &PoissonOperator) -> Self {
        Self {
            inv_diag: op.diagonal().into_iter().map(|d| 1.0 / d).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Orthogonal transform along `y` that diagonalizes the 1D operator.
struct YTransform {
    n: usize,
    kind: YBoundary,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(-i pi k / 2n)` for the cosine transform.
    twiddle: Vec<Complex64>,
    /// Dimensionless eigenvalue of each coefficient slot.
    eigen: Vec<f64>,
    scratch_len: usize,
}

impl YTransform {
    fn new(n: usize, kind: YBoundary) -> Self {
        let mut planner = FftPlanner::new();
        let len = match kind {
            YBoundary::Neumann => 2 * n,
            YBoundary::Periodic => n,
        };
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let pi = std::f64::consts::PI;
        let twiddle = (0..n)
            .map(|k| Complex64::from_polar(1.0, -pi * k as f64 / (2 * n) as f64))
            .collect();
        let eigen = match kind {
            YBoundary::Neumann => (0..n)
                .map(|k| 2.0 - 2.0 * (pi * k as f64 / n as f64).cos())
                .collect(),
            YBoundary::Periodic => (0..n)
                .map(|m| {
                    let k = m.div_ceil(2);
                    2.0 - 2.0 * (2.0 * pi * k as f64 / n as f64).cos()
                })
                .collect(),
        };
        Self {
            n,
            kind,
            forward,
            inverse,
            twiddle,
            eigen,
            scratch_len,
        }
    }

    fn buffers(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let len = match self.kind {
            YBoundary::Neumann => 2 * self.n,
            YBoundary::Periodic => self.n,
        };
        (
            vec![Complex64::default(); len],
            vec![Complex64::default(); self.scratch_len],
        )
    }

    /// Replaces `col` by its transform coefficients.
    fn forward(&self, col: &mut [f64], buf: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.n;
        match self.kind {
            YBoundary::Neumann => {
                for (k, &x) in col.iter().enumerate() {
                    buf[k] = Complex64::new(x, 0.0);
                    buf[2 * n - 1 - k] = Complex64::new(x, 0.0);
                }
                self.forward.process_with_scratch(buf, scratch);
                for k in 0..n {
                    col[k] = 0.5 * (self.twiddle[k] * buf[k]).re;
                }
            }
            YBoundary::Periodic => {
                for (k, &x) in col.iter().enumerate() {
                    buf[k] = Complex64::new(x, 0.0);
                }
                self.forward.process_with_scratch(buf, scratch);
                col[0] = buf[0].re;
                for m in 1..n {
                    let k = m.div_ceil(2);
                    col[m] = if m % 2 == 1 { buf[k].re } else { buf[k].im };
                }
            }
        }
    }

    /// Inverse of [`Self::forward`].
    fn inverse(&self, col: &mut [f64], buf: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.n;
        match self.kind {
            YBoundary::Neumann => {
                let inv_n = 1.0 / n as f64;
                for k in 0..n {
                    let w = if k == 0 { inv_n } else { 2.0 * inv_n };
                    buf[k] = self.twiddle[k].conj() * (w * col[k]);
                }
                for b in &mut buf[n..] {
                    *b = Complex64::default();
                }
                self.inverse.process_with_scratch(buf, scratch);
                for k in 0..n {
                    col[k] = buf[k].re;
                }
            }
            YBoundary::Periodic => {
                buf[0] = Complex64::new(col[0], 0.0);
                for k in 1..=n / 2 {
                    let re = col[2 * k - 1];
                    let im = if 2 * k < n { col[2 * k] } else { 0.0 };
                    buf[k] = Complex64::new(re, im);
                    buf[n - k] = Complex64::new(re, -im);
                }
                self.inverse.process_with_scratch(buf, scratch);
                let inv_n = 1.0 / n as f64;
                for k in 0..n {
                    col[k] = buf[k].re * inv_n;
                }
            }
        }
    }
}

/// Direct solver for [`PoissonOperator`] by transform along `y` and
/// tridiagonal elimination along `x`.
pub struct FastDiagonalization {
    op: PoissonOperator,
    transform: YTransform,
    /// Thomas pivots, layout `[i * ny + m]`.
    pivots: Vec<f64>,
    /// Sherman-Morrison correction vector for cyclic systems, same layout.
    cyclic_z: Vec<f64>,
    /// Per mode: `1 / (1 + v.z)` for cyclic systems; NaN marks the singular mode.
    cyclic_scale: Vec<f64>,
    cols: Vec<f64>,
}

impl FastDiagonalization {
    pub fn new(op: &PoissonOperator) -> Self {
        let (nx, ny) = (op.nx, op.ny);
        let transform = YTransform::new(ny, op.y_bc);
        let mut pivots = vec![0.0; nx * ny];
        let mut cyclic_z = Vec::new();
        let mut cyclic_scale = Vec::new();
        match op.x_bc {
            XBoundary::NeumannDirichlet => {
                for (m, &lam) in transform.eigen.iter().enumerate() {
                    let diag = |i: usize| {
                        let base = if i == 0 {
                            1.0
                        } else if i + 1 == nx {
                            3.0
                        } else {
                            2.0
                        };
                        base + lam
                    };
                    factor(nx, ny, m, diag, &mut pivots);
                }
            }
            XBoundary::Periodic => {
                cyclic_z = vec![0.0; nx * ny];
                cyclic_scale = vec![0.0; ny];
                for (m, &lam) in transform.eigen.iter().enumerate() {
                    if lam.abs() < 1e-14 {
                        cyclic_scale[m] = f64::NAN;
                        continue;
                    }
                    let b0 = 2.0 + lam;
                    let gamma = -b0;
                    let diag = |i: usize| {
                        if i == 0 {
                            b0 - gamma
                        } else if i + 1 == nx {
                            b0 - 1.0 / gamma
                        } else {
                            b0
                        }
                    };
                    factor(nx, ny, m, diag, &mut pivots);
                    // Solve A' z = u with u = (gamma, 0, ..., 0, -1).
                    let mut rhs = vec![0.0; nx];
                    rhs[0] = gamma;
                    rhs[nx - 1] = -1.0;
                    let z = thomas_single(nx, ny, m, &pivots, &rhs);
                    let vz = z[0] - z[nx - 1] / gamma;
                    cyclic_scale[m] = 1.0 / (1.0 + vz);
                    for i in 0..nx {
                        cyclic_z[i * ny + m] = z[i];
                    }
                }
            }
        }
        Self {
            op: *op,
            transform,
            pivots,
            cyclic_z,
            cyclic_scale,
            cols: vec![0.0; nx * ny],
        }
    }

    /// Solves `A z = r` for `z`.
    pub fn solve(&mut self, r: &[f64], z: &mut [f64]) {
        let (nx, ny) = (self.op.nx, self.op.ny);
        let h2 = self.op.h * self.op.h;
        let cols = &mut self.cols;
        // Transpose into columns, scaling by h^2.
        par::for_each_row(cols, ny, |i, col| {
            for (j, c) in col.iter_mut().enumerate() {
                *c = r[j * nx + i] * h2;
            }
        });
        let t = &self.transform;
        par::for_each_row(cols, ny, |_, col| {
            let (mut buf, mut scratch) = t.buffers();
            t.forward(col, &mut buf, &mut scratch);
        });
        match self.op.x_bc {
            XBoundary::NeumannDirichlet => thomas_all(nx, ny, &self.pivots, cols),
            XBoundary::Periodic => {
                let singular: Vec<usize> = (0..ny)
                    .filter(|&m| self.cyclic_scale[m].is_nan())
                    .collect();
                // Singular modes are handled separately; keep them out of the sweep.
                let saved: Vec<Vec<f64>> = singular
                    .iter()
                    .map(|&m| (0..nx).map(|i| cols[i * ny + m]).collect())
                    .collect();
                thomas_all(nx, ny, &self.pivots, cols);
                for m in 0..ny {
                    let s = self.cyclic_scale[m];
                    if s.is_nan() {
                        continue;
                    }
                    let gamma = -(2.0 + t.eigen[m]);
                    let vy = cols[m] - cols[(nx - 1) * ny + m] / gamma;
                    let f = vy * s;
                    for i in 0..nx {
                        cols[i * ny + m] -= f * self.cyclic_z[i * ny + m];
                    }
                }
                for (&m, d) in singular.iter().zip(saved) {
                    let x = periodic_laplacian_1d(&d);
                    for i in 0..nx {
                        cols[i * ny + m] = x[i];
                    }
                }
            }
        }
        par::for_each_row(cols, ny, |_, col| {
            let (mut buf, mut scratch) = t.buffers();
            t.inverse(col, &mut buf, &mut scratch);
        });
        let cols = &self.cols;
        par::for_each_row(z, nx, |j, row| {
            for (i, zi) in row.iter_mut().enumerate() {
                *zi = cols[i * ny + j];
            }
        });
    }
}

impl Preconditioner for FastDiagonalization {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        self.solve(r, z);
    }
}

/// Thomas pivots for the tridiagonal matrix with diagonal `diag(i)` and unit
/// negative off-diagonals, stored as `pivots[i * ny + m] = 1 / (b_i - pivot_{i-1})`.
fn factor(nx: usize, ny: usize, m: usize, diag: impl Fn(usize) -> f64, pivots: &mut [f64]) {
    let mut prev = 0.0;
    for i in 0..nx {
        let w = 1.0 / (diag(i) - prev);
        pivots[i * ny + m] = w;
        prev = w;
    }
}

/// In-place Thomas sweep over all modes at once.
fn thomas_all(nx: usize, ny: usize, pivots: &[f64], cols: &mut [f64]) {
    // forward
    for k in 0..ny {
        cols[k] *= pivots[k];
    }
    for i in 1..nx {
        let (prev, cur) = cols.split_at_mut(i * ny);
        let prev = &prev[(i - 1) * ny..];
        let cur = &mut cur[..ny];
        let w = &pivots[i * ny..(i + 1) * ny];
        for k in 0..ny {
            cur[k] = (cur[k] + prev[k]) * w[k];
        }
    }
    // back substitution
    for i in (0..nx - 1).rev() {
        let (cur, next) = cols.split_at_mut((i + 1) * ny);
        let cur = &mut cur[i * ny..];
        let next = &next[..ny];
        let w = &pivots[i * ny..(i + 1) * ny];
        for k in 0..ny {
            cur[k] += w[k] * next[k];
        }
    }
}

fn thomas_single(nx: usize, ny: usize, m: usize, pivots: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut d = rhs.to_vec();
    d[0] *= pivots[m];
    for i in 1..nx {
        d[i] = (d[i] + d[i - 1]) * pivots[i * ny + m];
    }
    for i in (0..nx - 1).rev() {
        d[i] += pivots[i * ny + m] * d[i + 1];
    }
    d
}

/// Zero-mean solution of `2x_i - x_{i-1} - x_{i+1} = d_i` on a periodic line.
/// The mean of `d` is removed first.
fn periodic_laplacian_1d(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mean = d.iter().sum::<f64>() / n as f64;
    // g_i = x_i - x_{i-1} satisfies g_{i+1} = g_i - d_i.
    let mut partial = vec![0.0; n];
    for i in 1..n {
        partial[i] = partial[i - 1] + (d[i - 1] - mean);
    }
    let g0 = partial.iter().sum::<f64>() / n as f64;
    let mut x = vec![0.0; n];
    for i in 1..n {
        x[i] = x[i - 1] + (g0 - partial[i]);
    }
    let xm = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v -= xm);
    x
}

/// Outcome of a converged CG solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PcgReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, or the absolute residual when `b = 0`.
    pub relative_residual: f64,
}

/// Reusable CG work vectors.
#[derive(Clone, Debug, Default)]
pub struct PcgWorkspace {
    r: Vec<f64>,
    z: Vec<f64>,
    d: Vec<f64>,
    ad: Vec<f64>,
    b: Vec<f64>,
}

fn remove_mean(v: &mut [f64]) {
    let m = par::sum_chunked(v.len(), |r| v[r].iter().sum()) / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A x = b` starting from the current contents of `x`.
///
/// Stops when `||r|| <= tol * ||b||` (or `||r|| <= abs_tol`). For singular
/// operators the mean of `b` and of `x` is removed.
pub fn pcg_solve(
    op: &PoissonOperator,
    precond: &mut dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    ws: &mut PcgWorkspace,
) -> Result<PcgReport, FlowError> {
    const ABS_TOL: f64 = 1e-13;
    let n = op.len();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    for v in [&mut ws.r, &mut ws.z, &mut ws.d, &mut ws.ad, &mut ws.b] {
        v.resize(n, 0.0);
    }
    ws.b.copy_from_slice(b);
    if op.is_singular() {
        remove_mean(&mut ws.b);
        remove_mean(x);
    }
    let b_norm = par::dot(&ws.b, &ws.b).sqrt();
    let target = (tol * b_norm).max(ABS_TOL);
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };

    op.apply(x, &mut ws.ad);
    for ((r, bi), ai) in ws.r.iter_mut().zip(&ws.b).zip(&ws.ad) {
        *r = bi - ai;
    }
    let mut r_norm = par::dot(&ws.r, &ws.r).sqrt();
    if r_norm <= target {
        return Ok(PcgReport {
            iterations: 0,
            relative_residual: r_norm / scale,
        });
    }
    precond.apply(&ws.r, &mut ws.z);
    if op.is_singular() {
        remove_mean(&mut ws.z);
    }
    ws.d.copy_from_slice(&ws.z);
    let mut rz = par::dot(&ws.r, &ws.z);
    for it in 1..=max_iter {
        op.apply(&ws.d, &mut ws.ad);
        let dad = par::dot(&ws.d, &ws.ad);
        if !(dad > 0.0) {
            return Err(FlowError::PoissonNotConverged {
                iterations: it,
                residual: r_norm / scale,
            });
        }
        let alpha = rz / dad;
        for (xi, di) in x.iter_mut().zip(&ws.d) {
            *xi += alpha * di;
        }
        for (ri, ai) in ws.r.iter_mut().zip(&ws.ad) {
            *ri -= alpha * ai;
        }
        r_norm = par::dot(&ws.r, &ws.r).sqrt();
        if r_norm <= target {
            return Ok(PcgReport {
                iterations: it,
                relative_residual: r_norm / scale,
            });
        }
        precond.apply(&ws.r, &mut ws.z);
        if op.is_singular() {
            remove_mean(&mut ws.z);
        }
        let rz_new = par::dot(&ws.r, &ws.z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (di, zi) in ws.d.iter_mut().zip(&ws.z) {
            *di = zi + beta * *di;
        }
    }
    if r_norm.is_finite() && r_norm / scale <= tol {
        return Ok(PcgReport {
            iterations: max_iter,
            relative_residual: r_norm / scale,
        });
    }
    Err(FlowError::PoissonNotConverged {
        iterations: max_iter,
        residual: r_norm / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn ops() -> Vec<PoissonOperator> {
        vec![
            PoissonOperator {
                nx: 24,
                ny: 15,
                h: 0.1,
                x_bc: XBoundary::NeumannDirichlet,
                y_bc: YBoundary::Neumann,
            },
            PoissonOperator {
                nx: 16,
                ny: 12,
                h: 1.0 / 16.0,
                x_bc: XBoundary::Periodic,
                y_bc: YBoundary::Periodic,
            },
            PoissonOperator {
                nx: 9,
                ny: 7,
                h: 0.3,
                x_bc: XBoundary::Periodic,
                y_bc: YBoundary::Periodic,
            },
        ]
    }

    #[test]
    fn cosine_transform_round_trip_and_eigenvectors() {
        for kind in [YBoundary::Neumann, YBoundary::Periodic] {
            for n in [1usize, 2, 5, 8, 15] {
                let t = YTransform::new(n, kind);
                let (mut buf, mut scratch) = t.buffers();
                let x = random(n, n as u64);
                let mut c = x.clone();
                t.forward(&mut c, &mut buf, &mut scratch);
                t.inverse(&mut c, &mut buf, &mut scratch);
                for (a, b) in c.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-12, "{kind:?} n={n}");
                }
                // Each coefficient slot is an eigenvector of the 1D operator.
                for m in 0..n {
                    let mut e = vec![0.0; n];
                    e[m] = 1.0;
                    t.inverse(&mut e, &mut buf, &mut scratch);
                    for j in 0..n {
                        let up = if j + 1 < n {
                            e[j + 1]
                        } else if kind == YBoundary::Periodic {
                            e[0]
                        } else {
                            e[j]
                        };
                        let dn = if j > 0 {
                            e[j - 1]
                        } else if kind == YBoundary::Periodic {
                            e[n - 1]
                        } else {
                            e[j]
                        };
                        let le = 2.0 * e[j] - up - dn;
                        assert!((le - t.eigen[m] * e[j]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn fast_solver_inverts_operator() {
        for op in ops() {
            let mut fd = FastDiagonalization::new(&op);
            let mut x = random(op.len(), 3);
            if op.is_singular() {
                remove_mean(&mut x);
            }
            let mut b = vec![0.0; op.len()];
            op.apply(&x, &mut b);
            let mut z = vec![0.0; op.len()];
            fd.solve(&b, &mut z);
            if op.is_singular() {
                remove_mean(&mut z);
            }
            for (a, e) in z.iter().zip(&x) {
                assert!((a - e).abs() < 1e-9, "{op:?}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn jacobi_and_fast_pcg_agree() {
        for op in ops() {
            let mut b = random(op.len(), 11);
            if op.is_singular() {
                remove_mean(&mut b);
            }
            let mut ws = PcgWorkspace::default();
            let mut x1 = vec![0.0; op.len()];
            let rep1 = pcg_solve(&op, &mut Jacobi::new(&op), &b, &mut x1, 1e-12, 5000, &mut ws)
                .unwrap();
            let mut x2 = vec![0.0; op.len()];
            let rep2 = pcg_solve(
                &op,
                &mut FastDiagonalization::new(&op),
                &b,
                &mut x2,
                1e-12,
                50,
                &mut ws,
            )
            .unwrap();
            assert!(rep2.iterations <= 2, "{rep2:?}");
            assert!(rep1.iterations > rep2.iterations);
            for (a, c) in x1.iter().zip(&x2) {
                assert!((a - c).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn warm_start_at_solution_returns_immediately() {
        let op = ops()[0];
        let x = random(op.len(), 5);
        let mut b = vec![0.0; op.len()];
        op.apply(&x, &mut b);
        let mut guess = x.clone();
        let rep = pcg_solve(
            &op,
            &mut Jacobi::new(&op),
            &b,
            &mut guess,
            1e-6,
            10,
            &mut PcgWorkspace::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let op = ops()[0];
        let b = random(op.len(), 8);
        let mut x = vec![0.0; op.len()];
        let err = pcg_solve(
            &op,
            &mut Jacobi::new(&op),
            &b,
            &mut x,
            1e-12,
            2,
            &mut PcgWorkspace::default(),
        )
        .unwrap_err();
        assert!(matches!(err, FlowError::PoissonNotConverged { .. }));
    }

    #[test]
    fn operator_is_symmetric() {
        for op in ops() {
            let x = random(op.len(), 1);
            let y = random(op.len(), 2);
            let mut ax = vec![0.0; op.len()];
            let mut ay = vec![0.0; op.len()];
            op.apply(&x, &mut ax);
            op.apply(&y, &mut ay);
            let a = par::dot(&ax, &y);
            let b = par::dot(&x, &ay);
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn periodic_line_solve() {
        let mut x: Vec<f64> = random(10, 4);
        let m = x.iter().sum::<f64>() / 10.0;
        x.iter_mut().for_each(|v| *v -= m);
        let d: Vec<f64> = (0..10)
            .map(|i| 2.0 * x[i] - x[(i + 9) % 10] - x[(i + 1) % 10])
            .collect();
        let got = periodic_laplacian_1d(&d);
        for (a, b) in got.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
