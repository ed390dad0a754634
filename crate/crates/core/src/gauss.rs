//! Shape operator, the induced metrics `h_{l,r}`, boundary lengths and
//! discrete curvature checks on a grid solution.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::qdiff::{EndChart, QdiffError};
use crate::vortex::{CylinderGrid, GridSolution};

/// `|det(E ± JB)|` at or below this marks a degenerate node.
pub const DEGENERATE_DET: f64 = 1e-8;
/// Curvature checks only use nodes with `1 − λ` at least this large.
pub const CURVATURE_MARGIN: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussError {
    #[error(transparent)]
    Chart(#[from] QdiffError),
    #[error("metric is degenerate at node ({i}, {j})")]
    Degenerate { i: usize, j: usize },
    #[error("no node with a positive-definite neighbourhood")]
    NoValidNode,
    #[error("cos(r)E + sin(r)B is singular")]
    Singular,
    #[error("row {0} is outside the grid")]
    BadRow(usize),
}

pub fn j_matrix() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// Coefficient of `I = 2e^{2φ}|dw|²` and the shape operator `B` at each node.
#[derive(Debug, Clone)]
pub struct SurfaceData {
    pub grid: CylinderGrid,
    pub i_coef: Vec<f64>,
    pub b: Vec<Matrix2<f64>>,
}

/// `B = e^{−2φ} [[Re f, −Im f], [−Im f, −Re f]]` for `q = f dw²`.
pub fn shape_from_coefficient(phi: f64, f: Complex64) -> Matrix2<f64> {
    Matrix2::new(f.re, -f.im, -f.im, -f.re) * (-2.0 * phi).exp()
}

pub fn shape_operator(sol: &GridSolution, chart: &EndChart) -> Result<SurfaceData, GaussError> {
    let grid = sol.grid;
    let mut i_coef = vec![0.0; grid.len()];
    let mut b = vec![Matrix2::zeros(); grid.len()];
    for j in 0..grid.ny() {
        let y = grid.y(j);
        let half_log_g = 0.5 * chart.log_g_jet(y).0;
        for i in 0..grid.nx() {
            let n = grid.idx(i, j);
            let phi = sol.u[n] + half_log_g;
            i_coef[n] = 2.0 * (2.0 * phi).exp();
            b[n] = shape_from_coefficient(phi, chart.q_at(Complex64::new(grid.x(i), y))?);
        }
    }
    Ok(SurfaceData { grid, i_coef, b })
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub lambda: Vec<f64>,
    /// Over rows `1..ny−1`.
    pub max_interior: f64,
    pub margin: f64,
    /// Nodes with `λ ≥ 1 − 1e−12`, the limiting model regime.
    pub at_limit: usize,
}

/// `λ = √(−det B)` node-wise.
pub fn principal_curvature(data: &SurfaceData) -> CurvatureReport {
    let lambda: Vec<f64> = data.b.iter().map(|b| (-b.determinant()).max(0.0).sqrt()).collect();
    let nx = data.grid.nx();
    let interior = &lambda[nx..lambda.len() - nx];
    let max_interior = interior.iter().fold(0.0f64, |m, v| m.max(*v));
    let at_limit = lambda.iter().filter(|&&l| l >= 1.0 - 1e-12).count();
    CurvatureReport { max_interior, margin: 1.0 - max_interior, at_limit, lambda }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// A symmetric 2×2 tensor per node in `(∂x, ∂y)`.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub grid: CylinderGrid,
    pub h: Vec<Matrix2<f64>>,
    pub degenerate: Vec<bool>,
}

impl MetricField {
    pub fn conformal(grid: CylinderGrid, coef: impl Fn(f64, f64) -> f64) -> Self {
        let mut h = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                h.push(Matrix2::identity() * coef(grid.x(i), grid.y(j)));
            }
        }
        Self { grid, degenerate: vec![false; h.len()], h }
    }
}

/// Left uses `E − JB`, right `E + JB`.
pub fn side_operator(b: &Matrix2<f64>, side: Side) -> Matrix2<f64> {
    let jb = j_matrix() * b;
    match side {
        Side::Left => Matrix2::identity() - jb,
        Side::Right => Matrix2::identity() + jb,
    }
}

/// `h = I((E∓JB)·, (E∓JB)·)` node-wise.
pub fn induced_metric(data: &SurfaceData, side: Side) -> MetricField {
    let mut h = Vec::with_capacity(data.b.len());
    let mut degenerate = Vec::with_capacity(data.b.len());
    for (b, &ic) in data.b.iter().zip(&data.i_coef) {
        let m = side_operator(b, side);
        degenerate.push(m.determinant().abs() <= DEGENERATE_DET);
        h.push(m.transpose() * m * ic);
    }
    MetricField { grid: data.grid, h, degenerate }
}

/// `∫₀^{2π} √h(∂x,∂x) dx` on row `j` by the periodic trapezoid rule.
pub fn boundary_length(h: &MetricField, j: usize) -> Result<f64, GaussError> {
    let g = &h.grid;
    if j >= g.ny() {
        return Err(GaussError::BadRow(j));
    }
    let mut sum = 0.0;
    for i in 0..g.nx() {
        let hxx = h.h[g.idx(i, j)][(0, 0)];
        if hxx < 0.0 {
            return Err(GaussError::Degenerate { i, j });
        }
        sum += hxx.sqrt();
    }
    Ok(sum * g.dx())
}

/// Row lengths for every grid row.
pub fn boundary_length_profile(h: &MetricField) -> Result<Vec<(f64, f64)>, GaussError> {
    (0..h.grid.ny()).map(|j| Ok((h.grid.y(j), boundary_length(h, j)?))).collect()
}

/// Gaussian curvature by the Brioschi formula with central differences.
/// Boundary rows and nodes whose stencil is not positive definite are NaN.
pub fn discrete_curvature(h: &MetricField) -> Result<Vec<f64>, GaussError> {
    let g = &h.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let (dx, dy) = (g.dx(), g.dy());
    let comp = |i: usize, j: usize, k: usize| -> f64 {
        let m = &h.h[j * nx + i];
        match k {
            0 => m[(0, 0)],
            1 => m[(0, 1)],
            _ => m[(1, 1)],
        }
    };
    let pd = |i: usize, j: usize| {
        let m = &h.h[j * nx + i];
        m[(0, 0)] > 0.0 && m.determinant() > 0.0
    };
    let mut out = vec![f64::NAN; g.len()];
    let mut any = false;
    for j in 1..ny - 1 {
        for i in 0..nx {
            let (l, r) = ((i + nx - 1) % nx, (i + 1) % nx);
            let stencil = [(i, j), (l, j), (r, j), (i, j - 1), (i, j + 1), (l, j - 1), (l, j + 1), (r, j - 1), (r, j + 1)];
            if !stencil.iter().all(|&(a, b)| pd(a, b)) {
                continue;
            }
            let du = |k| (comp(r, j, k) - comp(l, j, k)) / (2.0 * dx);
            let dv = |k| (comp(i, j + 1, k) - comp(i, j - 1, k)) / (2.0 * dy);
            let duu = |k| (comp(r, j, k) - 2.0 * comp(i, j, k) + comp(l, j, k)) / (dx * dx);
            let dvv = |k| (comp(i, j + 1, k) - 2.0 * comp(i, j, k) + comp(i, j - 1, k)) / (dy * dy);
            let duv = |k| {
                (comp(r, j + 1, k) - comp(r, j - 1, k) - comp(l, j + 1, k) + comp(l, j - 1, k)) / (4.0 * dx * dy)
            };
            let (e, f, gg) = (comp(i, j, 0), comp(i, j, 1), comp(i, j, 2));
            let (eu, ev, fu, fv, gu, gv) = (du(0), dv(0), du(1), dv(1), du(2), dv(2));
            let m1 = nalgebra::Matrix3::new(
                -0.5 * dvv(0) + duv(1) - 0.5 * duu(2),
                0.5 * eu,
                fu - 0.5 * ev,
                fv - 0.5 * gu,
                e,
                f,
                0.5 * gv,
                f,
                gg,
            );
            let m2 = nalgebra::Matrix3::new(0.0, 0.5 * ev, 0.5 * gu, 0.5 * ev, e, f, 0.5 * gu, f, gg);
            let den = e * gg - f * f;
            out[j * nx + i] = (m1.determinant() - m2.determinant()) / (den * den);
            any = true;
        }
    }
    if !any {
        return Err(GaussError::NoValidNode);
    }
    Ok(out)
}

/// Largest `|K + 1|` over interior nodes with `1 − λ ≥` [`CURVATURE_MARGIN`].
pub fn curvature_deviation_from_hyperbolic(h: &MetricField, data: &SurfaceData) -> Result<f64, GaussError> {
    let k = discrete_curvature(h)?;
    let lambda = principal_curvature(data).lambda;
    let mut dev: f64 = 0.0;
    let mut any = false;
    for (kv, l) in k.iter().zip(&lambda) {
        if kv.is_finite() && 1.0 - l >= CURVATURE_MARGIN {
            dev = dev.max((kv + 1.0).abs());
            any = true;
        }
    }
    if !any {
        return Err(GaussError::NoValidNode);
    }
    Ok(dev)
}

/// `sup |K(I) − (−1 − det B)|` over interior nodes.
pub fn gauss_equation_defect(sol: &GridSolution, chart: &EndChart) -> Result<f64, GaussError> {
    let data = shape_operator(sol, chart)?;
    let metric = MetricField {
        grid: data.grid,
        h: data.i_coef.iter().map(|&c| Matrix2::identity() * c).collect(),
        degenerate: vec![false; data.i_coef.len()],
    };
    let k = discrete_curvature(&metric)?;
    let mut sup: f64 = 0.0;
    for (kv, b) in k.iter().zip(&data.b) {
        if kv.is_finite() {
            sup = sup.max((kv - (-1.0 - b.determinant())).abs());
        }
    }
    Ok(sup)
}

/// `B_r = (cos r E + sin r B)⁻¹ (−sin r E + cos r B)`.
pub fn normal_flow_shape(b: &Matrix2<f64>, r: f64) -> Result<Matrix2<f64>, GaussError> {
    let (s, c) = r.sin_cos();
    let e = Matrix2::identity();
    let lhs = e * c + b * s;
    if lhs.determinant().abs() <= 1e-14 * (1.0 + b.norm_squared()) {
        return Err(GaussError::Singular);
    }
    let inv = lhs.try_inverse().ok_or(GaussError::Singular)?;
    Ok(inv * (e * (-s) + b * c))
}
