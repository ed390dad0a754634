//! The vortex equation `½Δ_g u = e^{2u} − e^{−2u}‖q‖²_g + ½K_g` on a periodic
//! cylinder grid: residual, damped Newton solver and barrier pairs.
//!
//! Fields are stored row-major, node `(i, j)` at index `j * nx + i`, with `i`
//! the periodic x-index and `j` the y-index (row 0 at `y0`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::banded::BandedSpd;
use crate::qdiff::{EndChart, EndMode, QdiffError};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 50;
const MAX_HALVINGS: usize = 30;
/// Round-off allowance in the discrete barrier inequalities.
pub const BARRIER_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VortexError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no convergence after {iters} Newton iterations, residual {residual:e}")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("ill-posed coefficients: {0}")]
    IllPosed(#[from] QdiffError),
    #[error("no barrier pair found on the scan lattice")]
    NoBarrierFound,
    #[error("barriers of the form β e^(−2αy) need a non-zero residue")]
    CuspEnd,
    #[error("field has {got} values, grid has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderGrid {
    nx: usize,
    ny: usize,
    y0: f64,
    ymax: f64,
}

impl CylinderGrid {
    pub fn new(nx: usize, ny: usize, y0: f64, ymax: f64) -> Result<Self, VortexError> {
        if nx < 8 || nx % 2 != 0 {
            return Err(VortexError::InvalidGrid(format!("nx = {nx} must be even and at least 8")));
        }
        if ny < 8 {
            return Err(VortexError::InvalidGrid(format!("ny = {ny} must be at least 8")));
        }
        if !(ymax > y0 && y0.is_finite() && ymax.is_finite()) {
            return Err(VortexError::InvalidGrid(format!("empty y-range [{y0}, {ymax}]")));
        }
        Ok(Self { nx, ny, y0, ymax })
    }

    /// Grid spanning the full range of `chart`.
    pub fn for_chart(chart: &EndChart, nx: usize, ny: usize) -> Result<Self, VortexError> {
        Self::new(nx, ny, chart.y0(), chart.ymax())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn ymax(&self) -> f64 {
        self.ymax
    }
    pub fn dx(&self) -> f64 {
        std::f64::consts::TAU / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        (self.ymax - self.y0) / (self.ny - 1) as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.ymax
        } else {
            self.y0 + j as f64 * self.dy()
        }
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Grid with `dx` and `dy` halved over the same range.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx, ny: 2 * self.ny - 1, ..*self }
    }

    fn check_len(&self, n: usize) -> Result<(), VortexError> {
        if n != self.len() {
            return Err(VortexError::ShapeMismatch { expected: self.len(), got: n });
        }
        Ok(())
    }
}

/// Per-row background data and per-node `‖q‖²_g`.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub g: Vec<f64>,
    pub k: Vec<f64>,
    pub q_norm: Vec<f64>,
}

impl Coefficients {
    pub fn new(chart: &EndChart, grid: &CylinderGrid) -> Result<Self, VortexError> {
        let mut g = Vec::with_capacity(grid.ny);
        let mut k = Vec::with_capacity(grid.ny);
        for j in 0..grid.ny {
            let (gj, kj) = chart.background_at(grid.y(j))?;
            if !(gj > 0.0 && gj.is_finite() && kj.is_finite()) {
                return Err(QdiffError::InvalidChart(format!("bad background at y = {}", grid.y(j))).into());
            }
            g.push(gj);
            k.push(kj);
        }
        let mut q_norm = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let w = num_complex::Complex64::new(grid.x(i), grid.y(j));
                q_norm[grid.idx(i, j)] = chart.q_norm_sq(w)?;
            }
        }
        Ok(Self { g, k, q_norm })
    }
}

fn laplacian_at(u: &[f64], grid: &CylinderGrid, i: usize, j: usize) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let (dx, dy) = (grid.dx(), grid.dy());
    let c = u[j * nx + i];
    let l = u[j * nx + (i + nx - 1) % nx];
    let r = u[j * nx + (i + 1) % nx];
    let uxx = (l - 2.0 * c + r) / (dx * dx);
    let uyy = if j == 0 {
        (2.0 * c - 5.0 * u[nx + i] + 4.0 * u[2 * nx + i] - u[3 * nx + i]) / (dy * dy)
    } else if j + 1 == ny {
        let k = |m: usize| u[(ny - 1 - m) * nx + i];
        (2.0 * c - 5.0 * k(1) + 4.0 * k(2) - k(3)) / (dy * dy)
    } else {
        (u[(j - 1) * nx + i] - 2.0 * c + u[(j + 1) * nx + i]) / (dy * dy)
    };
    uxx + uyy
}

fn residual_with(u: &[f64], grid: &CylinderGrid, co: &Coefficients) -> Vec<f64> {
    let nx = grid.nx;
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let (g, k) = (co.g[j], co.k[j]);
        for (i, r) in row.iter_mut().enumerate() {
            let n = j * nx + i;
            let e = (2.0 * u[n]).exp();
            *r = 0.5 * laplacian_at(u, grid, i, j) / g - e + co.q_norm[n] / e - 0.5 * k;
        }
    });
    out
}

fn interior_sup(f: &[f64], grid: &CylinderGrid) -> f64 {
    f[grid.nx..grid.len() - grid.nx].iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `F(u) = ½(1/g)(∂xx+∂yy)u − e^{2u} + e^{−2u}‖q‖²_g − ½K_g` at every node;
/// boundary rows use a one-sided second difference in y.
pub fn pde_residual(u: &[f64], chart: &EndChart, grid: &CylinderGrid) -> Result<Vec<f64>, VortexError> {
    grid.check_len(u.len())?;
    let co = Coefficients::new(chart, grid)?;
    Ok(residual_with(u, grid, &co))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerValue {
    Value(f64),
    BarrierMidpoint,
}

/// Dirichlet data on the `y0` row (inner) and the `Ymax` row (outer).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCondition {
    pub inner: InnerValue,
    pub outer: f64,
}

impl Default for BoundaryCondition {
    fn default() -> Self {
        Self { inner: InnerValue::BarrierMidpoint, outer: 0.0 }
    }
}

impl BoundaryCondition {
    pub fn constant(inner: f64, outer: f64) -> Self {
        Self { inner: InnerValue::Value(inner), outer }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub bc: BoundaryCondition,
    /// Starting field; boundary rows are overwritten by `bc`. Zero if absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS, bc: BoundaryCondition::default(), initial: None }
    }
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub grid: CylinderGrid,
    pub u: Vec<f64>,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub chart: EndChart,
}

impl GridSolution {
    /// The exact solution `u ≡ 0` of a model end (no tail, no collar).
    pub fn zero(chart: &EndChart, grid: CylinderGrid) -> Self {
        Self { grid, u: vec![0.0; grid.len()], residual_norm: 0.0, newton_iters: 0, chart: chart.clone() }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[self.grid.idx(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn row_max_abs(&self, j: usize) -> f64 {
        let nx = self.grid.nx;
        self.u[j * nx..(j + 1) * nx].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Least-squares slope of `log max_x |u|` against `y` over rows with
    /// `y ∈ [y_lo, y_hi]` where the row maximum is non-zero.
    pub fn decay_slope(&self, y_lo: f64, y_hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = (0..self.grid.ny)
            .filter(|&j| (y_lo..=y_hi).contains(&self.grid.y(j)))
            .filter_map(|j| {
                let m = self.row_max_abs(j);
                (m > 0.0).then(|| (self.grid.y(j), m.ln()))
            })
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    }

    /// Sup-norm deviation from a finer solution over the shared nodes.
    pub fn max_abs_deviation_from(&self, reference: &GridSolution) -> f64 {
        let mut dev: f64 = 0.0;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let v = reference.sample(self.grid.x(i), self.grid.y(j));
                dev = dev.max((self.at(i, j) - v).abs());
            }
        }
        dev
    }

    /// Samples a finer grid at a coarse node; exact when the node is shared.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let fi = x / g.dx();
        let fj = (y - g.y0) / g.dy();
        let (i, j) = (fi.round() as usize % g.nx, fj.round() as usize);
        debug_assert!((fi - fi.round()).abs() < 1e-9 && (fj - fj.round()).abs() < 1e-9);
        self.at(i, j.min(g.ny - 1))
    }
}

fn apply_bc(u: &mut [f64], grid: &CylinderGrid, inner: f64, outer: f64) {
    let nx = grid.nx;
    let len = grid.len();
    u[..nx].iter_mut().for_each(|v| *v = inner);
    u[len - nx..].iter_mut().for_each(|v| *v = outer);
}

fn resolve_inner(bc: &BoundaryCondition, chart: &EndChart, grid: &CylinderGrid) -> Result<f64, VortexError> {
    match bc.inner {
        InnerValue::Value(v) => Ok(v),
        InnerValue::BarrierMidpoint => match chart.mode() {
            EndMode::Cusp => Ok(0.0),
            EndMode::Flat => {
                let pair = make_barriers(chart, grid)?;
                Ok(0.5 * (pair.u_plus[0] + pair.u_minus[0]))
            }
        },
    }
}

/// Damped Newton from `u ≡ 0` with the default iteration cap.
pub fn solve_vortex(
    chart: &EndChart,
    grid: &CylinderGrid,
    bc: BoundaryCondition,
    tol: f64,
) -> Result<GridSolution, VortexError> {
    solve_vortex_with(chart, grid, &SolverOptions { tol, bc, ..SolverOptions::default() })
}

/// Damped Newton iteration; the reported iteration count is the number of
/// residual evaluations, so an exact initial guess reports one iteration.
pub fn solve_vortex_with(chart: &EndChart, grid: &CylinderGrid, opts: &SolverOptions) -> Result<GridSolution, VortexError> {
    let co = Coefficients::new(chart, grid)?;
    let inner = resolve_inner(&opts.bc, chart, grid)?;
    let mut u = match &opts.initial {
        Some(init) => {
            grid.check_len(init.len())?;
            init.clone()
        }
        None => vec![0.0; grid.len()],
    };
    apply_bc(&mut u, grid, inner, opts.bc.outer);

    let mut f = residual_with(&u, grid, &co);
    let mut norm = interior_sup(&f, grid);
    for iter in 1..=opts.max_iters {
        if norm <= opts.tol {
            return Ok(GridSolution { grid: *grid, u, residual_norm: norm, newton_iters: iter, chart: chart.clone() });
        }
        if iter == opts.max_iters {
            break;
        }
        let delta = newton_step(&u, &f, grid, &co)
            .ok_or(VortexError::NoConvergence { iters: iter, residual: norm })?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            let ft = residual_with(&trial, grid, &co);
            let nt = interior_sup(&ft, grid);
            if nt.is_finite() && nt < norm {
                accepted = Some((trial, ft, nt));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((un, fn_, nn)) => {
                u = un;
                f = fn_;
                norm = nn;
            }
            None => return Err(VortexError::NoConvergence { iters: iter, residual: norm }),
        }
    }
    Err(VortexError::NoConvergence { iters: opts.max_iters, residual: norm })
}

/// Solves `J δ = −F` on interior nodes. Each row of the Jacobian is scaled
/// by `−2g`, which makes the system symmetric positive definite.
fn newton_step(u: &[f64], f: &[f64], grid: &CylinderGrid, co: &Coefficients) -> Option<Vec<f64>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let m = ny - 2;
    let n = nx * m;
    let (cx, cy) = (1.0 / (grid.dx() * grid.dx()), 1.0 / (grid.dy() * grid.dy()));
    let mut a = BandedSpd::zeros(n, nx);
    let mut rhs = vec![0.0; n];
    for jj in 0..m {
        let j = jj + 1;
        let g = co.g[j];
        for i in 0..nx {
            let node = j * nx + i;
            let k = jj * nx + i;
            let e = (2.0 * u[node]).exp();
            let react = 2.0 * g * (2.0 * e + 2.0 * co.q_norm[node] / e);
            a.add_lower(k, k, 2.0 * (cx + cy) + react);
            if i > 0 {
                a.add_lower(k, k - 1, -cx);
            }
            if i == nx - 1 {
                a.add_lower(k, k + 1 - nx, -cx);
            }
            if jj > 0 {
                a.add_lower(k, k - nx, -cy);
            }
            rhs[k] = 2.0 * g * f[node];
        }
    }
    a.factor().ok()?;
    a.solve(&mut rhs);
    let mut delta = vec![0.0; grid.len()];
    delta[nx..nx + n].copy_from_slice(&rhs);
    Some(delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierPair {
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub cap: f64,
}

impl BarrierPair {
    /// `u⁺ = β e^{−2αy}` and `u⁻ = max(−β e^{−2αy}, −B)` with `B = β e^{−2α y_C}`,
    /// `y_C` the lower collar edge (or `y0` without a collar).
    pub fn exponential(chart: &EndChart, grid: &CylinderGrid, alpha: f64, beta: f64) -> Self {
        let y_c = chart.collar().map_or(grid.y0, |c| c.y_lo.max(grid.y0));
        let cap = beta * (-2.0 * alpha * y_c).exp();
        let mut u_plus = vec![0.0; grid.len()];
        let mut u_minus = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            let v = beta * (-2.0 * alpha * grid.y(j)).exp();
            for i in 0..grid.nx {
                u_plus[grid.idx(i, j)] = v;
                u_minus[grid.idx(i, j)] = (-v).max(-cap);
            }
        }
        Self { u_minus, u_plus, alpha, beta, cap }
    }
}

pub const ALPHA_LATTICE: [f64; 10] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];
pub const BETA_LATTICE: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

/// Scans `α` ascending, then `β` ascending, returning the first pair that
/// passes [`check_barrier`].
pub fn make_barriers(chart: &EndChart, grid: &CylinderGrid) -> Result<BarrierPair, VortexError> {
    if chart.mode() == EndMode::Cusp {
        return Err(VortexError::CuspEnd);
    }
    let co = Coefficients::new(chart, grid)?;
    for &alpha in &ALPHA_LATTICE {
        for &beta in &BETA_LATTICE {
            let pair = BarrierPair::exponential(chart, grid, alpha, beta);
            if check_with(&pair, grid, &co) {
                return Ok(pair);
            }
        }
    }
    Err(VortexError::NoBarrierFound)
}

/// `F(u⁺) ≤ 0` and `F(u⁻) ≥ 0` at interior nodes and `u⁻ ≤ u⁺` everywhere.
pub fn check_barrier(pair: &BarrierPair, chart: &EndChart, grid: &CylinderGrid) -> Result<bool, VortexError> {
    grid.check_len(pair.u_plus.len())?;
    grid.check_len(pair.u_minus.len())?;
    let co = Coefficients::new(chart, grid)?;
    Ok(check_with(pair, grid, &co))
}

fn check_with(pair: &BarrierPair, grid: &CylinderGrid, co: &Coefficients) -> bool {
    if pair.u_minus.iter().zip(&pair.u_plus).any(|(m, p)| m > p) {
        return false;
    }
    let nx = grid.nx;
    let interior = nx..grid.len() - nx;
    let fp = residual_with(&pair.u_plus, grid, co);
    if fp[interior.clone()].iter().any(|&v| v > BARRIER_SLACK) {
        return false;
    }
    let fm = residual_with(&pair.u_minus, grid, co);
    fm[interior].iter().all(|&v| v >= -BARRIER_SLACK)
}

/// `max(u⁻ − u, u − u⁺, 0)` over all nodes.
pub fn sandwich_violation(sol: &GridSolution, pair: &BarrierPair) -> f64 {
    sol.u
        .iter()
        .zip(pair.u_minus.iter().zip(&pair.u_plus))
        .fold(0.0, |m, (u, (lo, hi))| m.max(lo - u).max(u - hi))
}

/// `(4 u_fine − u_coarse)/3` on the coarse nodes, cancelling the leading
/// `O(dx² + dy²)` term of the discretization error. `fine` must live on
/// `coarse.grid.refined()`.
pub fn richardson_extrapolate(coarse: &GridSolution, fine: &GridSolution) -> Result<GridSolution, VortexError> {
    let g = coarse.grid;
    let f = g.refined();
    if fine.grid != f {
        return Err(VortexError::InvalidGrid(format!(
            "expected a {}x{} refinement, got {}x{}",
            f.nx(),
            f.ny(),
            fine.grid.nx(),
            fine.grid.ny()
        )));
    }
    let mut u = coarse.u.clone();
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let k = g.idx(i, j);
            u[k] = (4.0 * fine.u[f.idx(2 * i, 2 * j)] - coarse.u[k]) / 3.0;
        }
    }
    Ok(GridSolution {
        grid: g,
        u,
        residual_norm: coarse.residual_norm.max(fine.residual_norm),
        newton_iters: coarse.newton_iters + fine.newton_iters,
        chart: coarse.chart.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdiff::Collar;
    use approx::assert_abs_diff_eq;

    #[test]
    fn richardson_raises_the_order() {
        let chart = EndChart::new(Complex64::new(1.0, 0.0), vec![Complex64::new(0.1, 0.0)], 1.0, 9.0).unwrap();
        let solve = |nx, ny| solve_vortex(&chart, &CylinderGrid::for_chart(&chart, nx, ny).unwrap(), BoundaryCondition::default(), 1e-12).unwrap();
        let (c, f, r) = (solve(16, 33), solve(32, 65), solve(64, 129));
        let reference = solve(128, 257);
        let at = |s: &GridSolution, reference: &GridSolution| {
            let (g, h) = (s.grid, reference.grid);
            let m = (h.nx() / g.nx(), (h.ny() - 1) / (g.ny() - 1));
            (0..g.ny())
                .flat_map(|j| (0..g.nx()).map(move |i| (i, j)))
                .fold(0.0f64, |a, (i, j)| a.max((s.at(i, j) - reference.at(m.0 * i, m.1 * j)).abs()))
        };
        let plain = at(&c, &reference);
        let extrapolated = at(&richardson_extrapolate(&c, &f).unwrap(), &reference);
        assert!(extrapolated < 0.2 * plain, "{extrapolated:e} vs {plain:e}");
        assert!(richardson_extrapolate(&c, &r).is_err());
    }
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sup(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn grid_validation() {
        assert!(CylinderGrid::new(7, 8, 1.0, 2.0).is_err());
        assert!(CylinderGrid::new(6, 8, 1.0, 2.0).is_err());
        assert!(CylinderGrid::new(8, 7, 1.0, 2.0).is_err());
        assert!(CylinderGrid::new(8, 8, 2.0, 1.0).is_err());
        let g = CylinderGrid::new(64, 129, 1.0, 9.0).unwrap();
        assert_abs_diff_eq!(g.dy(), 1.0 / 16.0);
        assert_eq!(g.y(128), 9.0);
        let r = g.refined();
        assert_eq!((r.nx(), r.ny()), (128, 257));
        assert_abs_diff_eq!(r.dy(), 1.0 / 32.0);
    }

    #[test]
    fn residual_examples() {
        let grid = CylinderGrid::new(16, 17, 1.0, 5.0).unwrap();
        let unit = EndChart::unit_model(c(1.0, 0.0), 1.0, 5.0).unwrap();
        assert!(sup(&pde_residual(&vec![0.0; grid.len()], &unit, &grid).unwrap()) < 1e-15);

        let cusp = EndChart::unit_model(c(0.0, 0.0), 1.0, 5.0).unwrap();
        assert!(sup(&pde_residual(&vec![0.0; grid.len()], &cusp, &grid).unwrap()) < 1e-14);

        let r = pde_residual(&vec![0.1; grid.len()], &unit, &grid).unwrap();
        let expected = -(0.2f64).exp() + (-0.2f64).exp();
        assert_abs_diff_eq!(expected, -0.40267, epsilon = 1e-5);
        for v in r {
            assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
        }
        assert!(matches!(
            pde_residual(&[0.0; 3], &unit, &grid),
            Err(VortexError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn residual_matches_smooth_field() {
        // u = 0.01 cos x e^{-y}: the stencil must reproduce the analytic Laplacian to O(h²)
        let chart = EndChart::unit_model(c(2.0, 0.0), 1.0, 3.0).unwrap();
        let grid = CylinderGrid::new(64, 65, 1.0, 3.0).unwrap();
        let mut u = vec![0.0; grid.len()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                u[grid.idx(i, j)] = 0.01 * grid.x(i).cos() * (-grid.y(j)).exp();
            }
        }
        let f = pde_residual(&u, &chart, &grid).unwrap();
        for j in [0, 10, 64] {
            for i in 0..grid.nx() {
                let v = u[grid.idx(i, j)];
                let exact = -(2.0 * v).exp() + (-2.0 * v).exp();
                assert!((f[grid.idx(i, j)] - exact).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn unit_model_converges_in_one_iteration() {
        let chart = EndChart::unit_model(c(3.0, 4.0), 1.0, 9.0).unwrap();
        let grid = CylinderGrid::for_chart(&chart, 16, 17).unwrap();
        let sol = solve_vortex(&chart, &grid, BoundaryCondition::constant(0.0, 0.0), 1e-10).unwrap();
        assert_eq!(sol.newton_iters, 1);
        assert_eq!(sol.max_abs(), 0.0);

        let cusp = EndChart::unit_model(c(0.0, 0.0), 1.0, 9.0).unwrap();
        let sol = solve_vortex(&cusp, &grid, BoundaryCondition::default(), 1e-10).unwrap();
        assert!(sol.max_abs() == 0.0 && sol.newton_iters == 1);
    }

    #[test]
    fn midpoint_bc_is_zero_for_model_end() {
        let chart = EndChart::unit_model(c(1.0, 0.0), 1.0, 9.0).unwrap();
        let grid = CylinderGrid::for_chart(&chart, 16, 17).unwrap();
        let sol = solve_vortex(&chart, &grid, BoundaryCondition::default(), 1e-10).unwrap();
        assert_eq!(sol.max_abs(), 0.0);
    }

    #[test]
    fn perturbed_solve_converges_and_decays() {
        let chart = EndChart::new(c(1.0, 0.0), vec![c(0.1, 0.0)], 1.0, 9.0).unwrap();
        let grid = CylinderGrid::for_chart(&chart, 32, 65).unwrap();
        let sol = solve_vortex(&chart, &grid, BoundaryCondition::constant(0.0, 0.0), 1e-10).unwrap();
        assert!(sol.residual_norm <= 1e-10);
        assert!(sol.newton_iters <= 15);
        assert!(sol.max_abs() > 1e-4);
        let slope = sol.decay_slope(2.0, 7.0).unwrap();
        assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
        // linearised amplitude a₁/2 e^{-y}
        let j = (0..grid.ny()).find(|&j| grid.y(j) >= 4.0).unwrap();
        let amp = sol.row_max_abs(j);
        let lin = 0.05 * (-grid.y(j)).exp();
        assert!((amp - lin).abs() < 0.05 * lin, "{amp} vs {lin}");
    }

    #[test]
    fn no_convergence_is_reported() {
        let chart = EndChart::new(c(1.0, 0.0), vec![c(0.1, 0.0)], 1.0, 9.0).unwrap();
        let grid = CylinderGrid::for_chart(&chart, 16, 33).unwrap();
        let opts = SolverOptions { max_iters: 2, bc: BoundaryCondition::constant(0.0, 0.0), ..SolverOptions::default() };
        match solve_vortex_with(&chart, &grid, &opts) {
            Err(VortexError::NoConvergence { iters, residual }) => {
                assert_eq!(iters, 2);
                assert!(residual > 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn barrier_examples() {
        let grid = CylinderGrid::new(32, 33, 1.0, 9.0).unwrap();
        let unit = EndChart::unit_model(c(1.0, 0.0), 1.0, 9.0).unwrap();
        let pair = make_barriers(&unit, &grid).unwrap();
        assert!(check_barrier(&pair, &unit, &grid).unwrap());

        let tailed = EndChart::new(c(3.0, 4.0), vec![c(0.1, 0.0)], 1.0, 9.0).unwrap();
        let pair = make_barriers(&tailed, &grid).unwrap();
        assert!(pair.u_minus.iter().all(|&v| v <= 0.0));
        assert!(pair.u_plus.iter().all(|&v| v >= 0.0));

        let cusp = EndChart::unit_model(c(0.0, 0.0), 1.0, 9.0).unwrap();
        assert_eq!(make_barriers(&cusp, &grid), Err(VortexError::CuspEnd));

        let n = grid.len();
        let bad = BarrierPair { u_minus: vec![-2.0; n], u_plus: vec![-1.0; n], alpha: 0.0, beta: 0.0, cap: 0.0 };
        assert!(!check_barrier(&bad, &unit, &grid).unwrap());
        let zero = BarrierPair { u_minus: vec![0.0; n], u_plus: vec![0.0; n], alpha: 0.0, beta: 0.0, cap: 0.0 };
        assert!(check_barrier(&zero, &unit, &grid).unwrap());
    }

    #[test]
    fn sandwich_and_uniqueness() {
        let chart = EndChart::new(c(3.0, 4.0), vec![c(0.1, 0.0)], 1.0, 9.0).unwrap();
        let grid = CylinderGrid::for_chart(&chart, 32, 65).unwrap();
        let pair = make_barriers(&chart, &grid).unwrap();
        let a = solve_vortex(&chart, &grid, BoundaryCondition::default(), 1e-10).unwrap();
        assert!(sandwich_violation(&a, &pair) <= 0.0);
        let opts = SolverOptions { initial: Some(pair.u_plus.clone()), ..SolverOptions::default() };
        let b = solve_vortex_with(&chart, &grid, &opts).unwrap();
        let diff = a.u.iter().zip(&b.u).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-8);
    }

    #[test]
    fn collar_chart_solves() {
        let chart = EndChart::new(c(1.0, 1.0), vec![c(0.05, 0.0)], 0.5, 8.0)
            .unwrap()
            .with_collar(Collar { y_lo: 1.0, y_hi: 2.5 })
            .unwrap();
        let grid = CylinderGrid::for_chart(&chart, 32, 65).unwrap();
        let pair = make_barriers(&chart, &grid).unwrap();
        let sol = solve_vortex(&chart, &grid, BoundaryCondition::default(), 1e-10).unwrap();
        assert!(sol.u.iter().all(|v| v.is_finite()));
        assert!(sandwich_violation(&sol, &pair) <= 0.0);
    }
}
