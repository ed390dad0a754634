//! Frame-field integration: `dF = F (U dw + V dw̄)` with `U, V` built from the
//! conformal factor `φ` (so that `I = 2e^{2φ}|dw|²`) and the differential `q`.

use nalgebra::Matrix4;
use num_complex::Complex64;
use thiserror::Error;

use crate::adscore::{gram, SpacetimePoint};
use crate::horo;
use crate::qdiff::{EndChart, QdiffError};
use crate::vortex::{CylinderGrid, GridSolution};

pub type CMat4 = Matrix4<Complex64>;

/// Steps per loop used by [`holonomy_loop`].
pub const HOLONOMY_STEPS: usize = 8192;
/// Largest tolerated local truncation estimate `(h‖M‖)⁵/120` of one RK4 step.
pub const MAX_LOCAL_ERROR: f64 = 1e-3;
/// Tolerated imaginary part of the embedding column, relative to its size.
pub const REALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error(transparent)]
    OutOfChart(#[from] QdiffError),
    #[error("step {h} too large (limit {limit}, local error estimate {estimate:e})")]
    StepTooLarge { h: f64, limit: f64, estimate: f64 },
    #[error("last frame column is not real (imaginary part {imag:e})")]
    NotReal { imag: f64 },
    #[error("last frame column is not time-like (⟨σ,σ⟩ = {norm_sq})")]
    NotTimelike { norm_sq: f64 },
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    /// Columns `v₁, v₂, N, σ`.
    pub f: CMat4,
    pub basepoint: Complex64,
}

impl FrameState {
    pub fn new(f: CMat4, basepoint: Complex64) -> Self {
        Self { f, basepoint }
    }

    /// `B₀ A₀` with `B₀ = Id`.
    pub fn initial(basepoint: Complex64) -> Self {
        Self::new(horo::constants().a0, basepoint)
    }

    pub fn with_isometry(b0: &Matrix4<f64>, basepoint: Complex64) -> Self {
        Self::new(b0.map(c) * horo::constants().a0, basepoint)
    }
}

/// `φ, φ_x, φ_y` and `q` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiSample {
    pub phi: f64,
    pub phi_x: f64,
    pub phi_y: f64,
    pub q: Complex64,
}

/// Source of `φ` and `q` along integration paths.
pub trait FieldSample: Sync {
    fn sample(&self, w: Complex64) -> Result<PhiSample, FrameError>;

    /// Upper bound on the integration step.
    fn max_step(&self) -> f64 {
        f64::INFINITY
    }
}

/// Constant `φ` and `q`; `φ = 0, q = 1` is the horospherical surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField {
    pub phi: f64,
    pub q: Complex64,
}

impl ConstantField {
    pub fn horospherical() -> Self {
        Self { phi: 0.0, q: c(1.0) }
    }

    /// `q = −R`, `φ = ½ log|R|`.
    pub fn unit_model(residue: Complex64) -> Self {
        Self { phi: 0.5 * residue.norm().ln(), q: -residue }
    }
}

impl FieldSample for ConstantField {
    fn sample(&self, _w: Complex64) -> Result<PhiSample, FrameError> {
        Ok(PhiSample { phi: self.phi, phi_x: 0.0, phi_y: 0.0, q: self.q })
    }
}

/// `φ = u + ½ log g` with `u` interpolated from a grid solution by
/// Catmull–Rom bicubics (periodic in x) and `g` evaluated analytically.
#[derive(Debug, Clone)]
pub struct ConformalField {
    chart: EndChart,
    grid: CylinderGrid,
    u: Vec<f64>,
}

fn cr_weights(t: f64) -> [f64; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

fn cr_dweights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
        0.5 * (9.0 * t2 - 10.0 * t),
        0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
        0.5 * (3.0 * t2 - 2.0 * t),
    ]
}

impl ConformalField {
    pub fn from_solution(sol: &GridSolution) -> Self {
        Self { chart: sol.chart.clone(), grid: sol.grid, u: sol.u.clone() }
    }

    /// `u ≡ 0`: exact for model ends.
    pub fn model(chart: &EndChart, grid: CylinderGrid) -> Self {
        Self { chart: chart.clone(), grid, u: vec![0.0; grid.len()] }
    }

    pub fn chart(&self) -> &EndChart {
        &self.chart
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }

    /// `φ` at the grid nodes.
    pub fn phi_nodes(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = self.u.clone();
        for j in 0..g.ny() {
            let half_log_g = 0.5 * self.chart.log_g_jet(g.y(j)).0;
            for i in 0..g.nx() {
                out[g.idx(i, j)] += half_log_g;
            }
        }
        out
    }

    /// `|q|²` at the grid nodes.
    pub fn q_abs_sq_nodes(&self) -> Result<Vec<f64>, FrameError> {
        let g = &self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                out[g.idx(i, j)] = self.chart.q_at(Complex64::new(g.x(i), g.y(j)))?.norm_sqr();
            }
        }
        Ok(out)
    }

    fn row(&self, j: isize) -> impl Fn(usize) -> f64 + '_ {
        let ny = self.grid.ny() as isize;
        let nx = self.grid.nx();
        move |i: usize| {
            let at = |jj: isize| self.u[jj as usize * nx + i];
            if j < 0 {
                3.0 * at(0) - 3.0 * at(1) + at(2)
            } else if j >= ny {
                3.0 * at(ny - 1) - 3.0 * at(ny - 2) + at(ny - 3)
            } else {
                at(j)
            }
        }
    }

    /// `(u, u_x, u_y)` at an arbitrary point of the chart.
    pub fn interpolate_u(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let g = &self.grid;
        let (dx, dy) = (g.dx(), g.dy());
        let fx = x.rem_euclid(std::f64::consts::TAU) / dx;
        let i0 = (fx.floor() as usize).min(g.nx() - 1);
        let tx = fx - i0 as f64;
        let fy = ((y - g.y0()) / dy).clamp(0.0, (g.ny() - 1) as f64);
        let j0 = (fy.floor() as usize).min(g.ny() - 2);
        let ty = fy - j0 as f64;
        let (wx, dwx) = (cr_weights(tx), cr_dweights(tx));
        let (wy, dwy) = (cr_weights(ty), cr_dweights(ty));
        let nx = g.nx() as isize;
        let (mut v, mut vx, mut vy) = (0.0, 0.0, 0.0);
        for (b, (&wyb, &dwyb)) in wy.iter().zip(&dwy).enumerate() {
            let row = self.row(j0 as isize - 1 + b as isize);
            let (mut r, mut rx) = (0.0, 0.0);
            for a in 0..4 {
                let i = (i0 as isize - 1 + a as isize).rem_euclid(nx) as usize;
                let val = row(i);
                r += wx[a] * val;
                rx += dwx[a] * val;
            }
            v += wyb * r;
            vx += wyb * rx;
            vy += dwyb * r;
        }
        (v, vx / dx, vy / dy)
    }
}

impl FieldSample for ConformalField {
    fn sample(&self, w: Complex64) -> Result<PhiSample, FrameError> {
        let q = self.chart.q_at(w)?;
        let (u, ux, uy) = self.interpolate_u(w.re, w.im);
        let (lg, dlg, _) = self.chart.log_g_jet(w.im);
        Ok(PhiSample { phi: u + 0.5 * lg, phi_x: ux, phi_y: uy + 0.5 * dlg, q })
    }

    fn max_step(&self) -> f64 {
        self.grid.dx().min(self.grid.dy())
    }
}

/// `U` (the `dw` part) and `V` (the `dw̄` part) of the connection form.
pub fn connection_from_sample(s: &PhiSample) -> (CMat4, CMat4) {
    let phi_w = Complex64::new(0.5 * s.phi_x, -0.5 * s.phi_y);
    let phi_wb = phi_w.conj();
    let ep = c(s.phi.exp());
    let qe = s.q * (-s.phi).exp();
    let qbe = qe.conj();
    let o = c(0.0);
    #[rustfmt::skip]
    let u = Matrix4::new(
        phi_w, o, o, ep,
        o, -phi_w, qe, o,
        qe, o, o, o,
        o, ep, o, o,
    );
    #[rustfmt::skip]
    let v = Matrix4::new(
        -phi_wb, o, qbe, o,
        o, phi_wb, o, ep,
        o, qbe, o, o,
        ep, o, o, o,
    );
    (u, v)
}

pub fn connection_matrices(w: Complex64, field: &dyn FieldSample) -> Result<(CMat4, CMat4), FrameError> {
    Ok(connection_from_sample(&field.sample(w)?))
}

fn generator(field: &dyn FieldSample, w: Complex64, dw: Complex64) -> Result<CMat4, FrameError> {
    let (u, v) = connection_matrices(w, field)?;
    Ok(u * dw + v * dw.conj())
}

fn max_entry(m: &CMat4) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Classical RK4 on `F′ = F(Uẇ + Vẇ̄)` along the polyline that starts at
/// `start.basepoint` and visits `path` in order. Each segment is cut into
/// the fewest equal steps of length at most `h`.
pub fn integrate_ray(start: &FrameState, path: &[Complex64], field: &dyn FieldSample, h: f64) -> Result<FrameState, FrameError> {
    let limit = field.max_step();
    if !(h > 0.0) || h > limit * (1.0 + 1e-12) {
        return Err(FrameError::StepTooLarge { h, limit, estimate: f64::NAN });
    }
    let mut f = start.f;
    let mut p = start.basepoint;
    for &target in path {
        let len = (target - p).norm();
        if len == 0.0 {
            continue;
        }
        let n = (len / h).ceil().max(1.0) as usize;
        let dw = (target - p) / c(n as f64);
        let step = dw.norm();
        for k in 0..n {
            let w0 = p + dw * c(k as f64);
            let m0 = generator(field, w0, dw)?;
            let mh = generator(field, w0 + dw * c(0.5), dw)?;
            let m1 = generator(field, w0 + dw, dw)?;
            let estimate = (max_entry(&m0) * 4.0).powi(5) / 120.0;
            if estimate > MAX_LOCAL_ERROR {
                return Err(FrameError::StepTooLarge { h: step, limit, estimate });
            }
            let k1 = f * m0;
            let k2 = (f + k1 * c(0.5)) * mh;
            let k3 = (f + k2 * c(0.5)) * mh;
            let k4 = (f + k3) * m1;
            f += (k1 + (k2 + k3) * c(2.0) + k4) * c(1.0 / 6.0);
        }
        p = target;
    }
    Ok(FrameState::new(f, p))
}

/// `Φ_y(2π)` for `Φ′ = Φ A_y(x)`, `Φ(0) = Id`, along the horizontal loop at height `y`.
pub fn holonomy_loop(field: &dyn FieldSample, y: f64) -> Result<CMat4, FrameError> {
    holonomy_loop_steps(field, y, HOLONOMY_STEPS)
}

pub fn holonomy_loop_steps(field: &dyn FieldSample, y: f64, steps: usize) -> Result<CMat4, FrameError> {
    let tau = std::f64::consts::TAU;
    let start = FrameState::new(CMat4::identity(), Complex64::new(0.0, y));
    let out = integrate_ray(&start, &[Complex64::new(tau, y)], field, tau / steps as f64 * (1.0 + 1e-9))?;
    Ok(out.f)
}

/// Log-moduli of the eigenvalues of a `G`-unitary matrix, descending. The
/// two smallest are read off `H⁻¹ = G Hᴴ G`, whose dominant eigenvalues are
/// computed accurately even when `H` is badly conditioned.
pub fn holonomy_log_moduli(h: &CMat4) -> [f64; 4] {
    let g = gram().map(c);
    let top = |m: &CMat4| -> [f64; 2] {
        let mut mods: Vec<f64> = match m.eigenvalues() {
            Some(ev) => ev.iter().map(|z| z.norm().ln()).collect(),
            None => m.clone().schur().unpack().1.diagonal().iter().map(|z| z.norm().ln()).collect(),
        };
        mods.sort_by(|a, b| b.total_cmp(a));
        [mods[0], mods[1]]
    };
    let a = top(h);
    let b = top(&(g * h.adjoint() * g));
    [a[0], a[1], -b[1], -b[0]]
}

/// Real part of the last column, rescaled onto `⟨x,x⟩ = −1`.
pub fn embedding_point(frame: &FrameState) -> Result<SpacetimePoint, FrameError> {
    let col = frame.f.column(3);
    let size = col.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let imag = col.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if imag > REALITY_TOL * size {
        return Err(FrameError::NotReal { imag });
    }
    let p = SpacetimePoint::new(col[0].re, col[1].re, col[2].re, col[3].re);
    let n = p.norm_sq();
    if !(n < 0.0) {
        return Err(FrameError::NotTimelike { norm_sq: n });
    }
    let s = (-n).sqrt();
    Ok(SpacetimePoint { x: p.x.map(|v| v / s) })
}

/// `⟨σ,σ⟩ + 1` of the raw last column, without renormalisation.
pub fn raw_quadric_defect(frame: &FrameState) -> f64 {
    let col = frame.f.column(3);
    SpacetimePoint::new(col[0].re, col[1].re, col[2].re, col[3].re).quadric_defect()
}

/// `‖Fᴴ G F − G‖_∞` (largest entry).
pub fn unitarity_defect(frame: &FrameState) -> f64 {
    let g = gram().map(c);
    max_entry(&(frame.f.adjoint() * g * frame.f - g))
}

/// [`unitarity_defect`] divided by `max(1, max|F_ij|²)`; the absolute defect
/// of an exact frame is itself of order `ε‖F‖²`.
pub fn relative_unitarity_defect(frame: &FrameState) -> f64 {
    unitarity_defect(frame) / max_entry(&frame.f).powi(2).max(1.0)
}

/// Sup over interior nodes of `½Δφ − e^{2φ} + e^{−2φ}|q|²` with the flat
/// five-point Laplacian in `w`.
pub fn flatness_defect_nodes(phi: &[f64], q_abs_sq: &[f64], grid: &CylinderGrid) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (cx, cy) = (1.0 / (grid.dx() * grid.dx()), 1.0 / (grid.dy() * grid.dy()));
    let mut sup: f64 = 0.0;
    for j in 1..ny - 1 {
        for i in 0..nx {
            let n = j * nx + i;
            let lap = cx * (phi[j * nx + (i + nx - 1) % nx] - 2.0 * phi[n] + phi[j * nx + (i + 1) % nx])
                + cy * (phi[n - nx] - 2.0 * phi[n] + phi[n + nx]);
            let e = (2.0 * phi[n]).exp();
            sup = sup.max((0.5 * lap - e + q_abs_sq[n] / e).abs());
        }
    }
    sup
}

pub fn flatness_defect(field: &ConformalField) -> Result<f64, FrameError> {
    Ok(flatness_defect_nodes(&field.phi_nodes(), &field.q_abs_sq_nodes()?, field.grid()))
}
