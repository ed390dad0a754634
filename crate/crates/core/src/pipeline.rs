//! End-to-end runs driven by a [`RunConfig`]: solve, trace rays to the
//! boundary torus, transport holonomy, and measure boundary lengths.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adscore::{is_achronal_chain, null_to_torus, AchronalityReport, AdsError, NullDirection, TorusPoint};
use crate::classify::{boundary_lengths, decoration_of, holonomy_type, log_moduli_error, log_moduli_targets, HolonomyKind};
use crate::config::{RayField, RunConfig};
use crate::export::{Cell, Table};
use crate::frame::{
    holonomy_log_moduli, holonomy_loop_steps, integrate_ray, raw_quadric_defect, relative_unitarity_defect,
    ConformalField, ConstantField, FieldSample, FrameError, FrameState, REALITY_TOL,
};
use crate::gauss::{boundary_length_profile, discrete_curvature, induced_metric, principal_curvature, shape_operator, GaussError, Side};
use crate::horo::{diagonal_gap, ray_limit, RayLimit, UnitModelMap, SAWTOOTH_VERTICES};
use crate::qdiff::EndMode;
use crate::vortex::{make_barriers, richardson_extrapolate, sandwich_violation, solve_vortex_with, BarrierPair, GridSolution, VortexError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Vortex(#[from] VortexError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Gauss(#[from] GaussError),
    #[error(transparent)]
    Boundary(#[from] AdsError),
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: GridSolution,
    /// Flat ends only.
    pub barriers: Option<BarrierPair>,
}

impl Solved {
    pub fn sandwich_violation(&self) -> Option<f64> {
        self.barriers.as_ref().map(|b| sandwich_violation(&self.solution, b))
    }
}

pub fn solve(cfg: &RunConfig) -> Result<Solved, VortexError> {
    let mut solution = solve_vortex_with(cfg.chart(), cfg.grid(), &cfg.solver_options())?;
    if cfg.solver.richardson {
        let fine = solve_vortex_with(cfg.chart(), &cfg.grid().refined(), &cfg.solver_options())?;
        solution = richardson_extrapolate(&solution, &fine)?;
    }
    let barriers = match cfg.chart().mode() {
        EndMode::Flat => Some(make_barriers(cfg.chart(), cfg.grid())?),
        EndMode::Cusp => None,
    };
    Ok(Solved { solution, barriers })
}

pub fn solution_table(sol: &GridSolution) -> Table {
    let g = &sol.grid;
    let mut t = Table::new(&["x", "y", "u"]);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            t.push(vec![g.x(i).into(), g.y(j).into(), sol.at(i, j).into()]);
        }
    }
    t
}

/// One traced ray. Defects are relative to the size of the frame.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RaySample {
    pub iota: f64,
    pub length: f64,
    pub point: TorusPoint,
    pub null: [f64; 4],
    pub quadric_defect: f64,
    pub unitarity_defect: f64,
    /// Limit predicted by the model end, when it is a single vertex.
    pub predicted: Option<TorusPoint>,
    /// Angular distance of the direction from the nearest saw-tooth corner.
    pub corner_gap: f64,
}

impl RaySample {
    pub fn prediction_gap(&self) -> Option<f64> {
        self.predicted.map(|p| self.point.distance(&p))
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryRun {
    pub samples: Vec<RaySample>,
    pub vertices: Vec<TorusPoint>,
    pub edges: Vec<(TorusPoint, TorusPoint)>,
    pub achronality: AchronalityReport,
}

impl BoundaryRun {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "kind", "iota", "length", "theta", "theta_prime", "x0", "x1", "x2", "x3", "quadric_defect", "unitarity_defect",
            "model_gap",
        ]);
        for s in &self.samples {
            let mut row: Vec<Cell> = vec!["sample".into(), s.iota.into(), s.length.into(), s.point.theta.into(), s.point.theta_prime.into()];
            row.extend(s.null.iter().map(|v| Cell::from(*v)));
            row.extend([s.quadric_defect.into(), s.unitarity_defect.into(), s.prediction_gap().unwrap_or(f64::NAN).into()]);
            t.push(row);
        }
        for v in &self.vertices {
            let x = NullDirection::from_torus(*v).coords();
            let mut row: Vec<Cell> = vec!["vertex".into(), f64::NAN.into(), f64::NAN.into(), v.theta.into(), v.theta_prime.into()];
            row.extend(x.iter().map(|v| Cell::from(*v)));
            row.extend([f64::NAN.into(), f64::NAN.into(), f64::NAN.into()]);
            t.push(row);
        }
        t
    }

    /// Largest distance to the predicted vertex over rays whose direction
    /// stays at least `window` away from the saw-tooth corners.
    pub fn max_prediction_gap(&self, window: f64) -> Option<f64> {
        self.samples.iter().filter(|s| s.corner_gap >= window).filter_map(RaySample::prediction_gap).reduce(f64::max)
    }
}

fn trace(field: &dyn FieldSample, start: &FrameState, end: Complex64, h: f64) -> Result<(TorusPoint, [f64; 4], f64, f64), PipelineError> {
    let frame = integrate_ray(start, &[end], field, h)?;
    let col = frame.f.column(3);
    let size: f64 = col.iter().map(|z| z.norm_sqr()).sum();
    let imag = col.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if imag > REALITY_TOL * size.sqrt().max(1.0) {
        return Err(FrameError::NotReal { imag }.into());
    }
    let n = NullDirection::project([col[0].re, col[1].re, col[2].re, col[3].re])?;
    Ok((null_to_torus(&n)?, n.coords(), raw_quadric_defect(&frame) / size.max(1.0), relative_unitarity_defect(&frame)))
}

fn vertex_point(x: [f64; 4]) -> Option<TorusPoint> {
    null_to_torus(&NullDirection::new(x).ok()?).ok()
}

fn dedupe(points: impl IntoIterator<Item = TorusPoint>) -> Vec<TorusPoint> {
    let mut out: Vec<TorusPoint> = Vec::new();
    for p in points {
        if !out.iter().any(|q| q.distance(&p) < 1e-9) {
            out.push(p);
        }
    }
    out
}

/// The vertices a model end shows along rays `ι ∈ (0, π)`, in order of `ι`.
pub fn model_vertices(residue: Complex64) -> Vec<TorusPoint> {
    let Some(map) = UnitModelMap::new(residue) else {
        return Vec::new();
    };
    let n = 720;
    dedupe((1..n).filter_map(|k| match map.ray_limit(std::f64::consts::PI * k as f64 / n as f64) {
        RayLimit::Vertex(v) => null_to_torus(&v).ok(),
        RayLimit::Edge(_) => None,
    }))
}

pub fn boundary(cfg: &RunConfig, sol: &GridSolution) -> Result<BoundaryRun, PipelineError> {
    let dirs = cfg.ray_directions();
    let h = cfg.rays.h;
    let (samples, vertices, closed) = match cfg.rays.field {
        RayField::Horospherical => {
            let field = ConstantField::horospherical();
            let start = FrameState::initial(Complex64::new(0.0, 0.0));
            let samples = dirs
                .par_iter()
                .map(|&theta| {
                    let end = Complex64::from_polar(cfg.rays.t_max, theta);
                    let (point, null, qd, ud) = trace(&field, &start, end, h)?;
                    let predicted = match ray_limit(theta) {
                        RayLimit::Vertex(v) => null_to_torus(&v).ok(),
                        RayLimit::Edge(_) => None,
                    };
                    Ok(RaySample {
                        iota: theta,
                        length: cfg.rays.t_max,
                        point,
                        null,
                        quadric_defect: qd,
                        unitarity_defect: ud,
                        predicted,
                        corner_gap: diagonal_gap(theta),
                    })
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            let vertices: Vec<TorusPoint> = SAWTOOTH_VERTICES.iter().filter_map(|x| vertex_point(*x)).collect();
            (samples, vertices, true)
        }
        RayField::Solution => {
            let field = ConformalField::from_solution(sol);
            let chart = cfg.chart();
            let base = Complex64::new(0.0, cfg.base_y());
            let start = FrameState::initial(base);
            let map = UnitModelMap::new(chart.residue());
            let room = chart.ymax() - base.im;
            let samples = dirs
                .par_iter()
                .map(|&iota| {
                    let length = cfg.rays.t_max.min(room / iota.sin());
                    let end = base + Complex64::from_polar(length, iota);
                    let (point, null, qd, ud) = trace(&field, &start, end, h.min(field.max_step()))?;
                    let predicted = map.and_then(|m| match m.ray_limit(iota) {
                        RayLimit::Vertex(v) => null_to_torus(&v).ok(),
                        RayLimit::Edge(_) => None,
                    });
                    Ok(RaySample {
                        iota,
                        length,
                        point,
                        null,
                        quadric_defect: qd,
                        unitarity_defect: ud,
                        predicted,
                        corner_gap: corner_gap(chart.residue(), iota),
                    })
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            (samples, model_vertices(chart.residue()), false)
        }
    };
    let edges = vertices
        .windows(2)
        .map(|w| (w[0], w[1]))
        .chain(closed.then(|| (vertices[vertices.len() - 1], vertices[0])))
        .collect();
    let points: Vec<TorusPoint> = samples.iter().map(|s| s.point).collect();
    let achronality = is_achronal_chain(&points)?;
    Ok(BoundaryRun { samples, vertices, edges, achronality })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolonomyRow {
    pub y: f64,
    pub log_moduli: [f64; 4],
    pub targets: [f64; 4],
    /// Relative to the largest target, absolute for a zero residue.
    pub error: f64,
    pub unitarity_defect: f64,
}

pub fn holonomy(cfg: &RunConfig, sol: &GridSolution) -> Result<Vec<HolonomyRow>, PipelineError> {
    let field = ConformalField::from_solution(sol);
    let r = cfg.residue();
    let targets = log_moduli_targets(r);
    let steps = cfg.holonomy.steps;
    cfg.holonomy
        .heights
        .par_iter()
        .map(|&y| {
            let h = holonomy_loop_steps(&field, y, steps)?;
            let log_moduli = holonomy_log_moduli(&h);
            let unitarity_defect = relative_unitarity_defect(&FrameState::new(h, Complex64::new(0.0, y)));
            Ok(HolonomyRow { y, log_moduli, targets, error: log_moduli_error(&log_moduli, r), unitarity_defect })
        })
        .collect()
}

pub fn holonomy_table(rows: &[HolonomyRow]) -> Table {
    let mut t = Table::new(&["y", "l1", "l2", "l3", "l4", "target1", "target2", "target3", "target4", "rel_error"]);
    for row in rows {
        let mut cells: Vec<Cell> = vec![row.y.into()];
        cells.extend(row.log_moduli.iter().chain(&row.targets).map(|v| Cell::from(*v)));
        cells.push(row.error.into());
        t.push(cells);
    }
    t
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LengthRow {
    pub y: f64,
    pub left: f64,
    pub right: f64,
    pub target_left: f64,
    pub target_right: f64,
}

impl LengthRow {
    /// `max` of the two relative errors; absolute against a zero target.
    pub fn error(&self) -> f64 {
        let rel = |v: f64, t: f64| if t > 0.0 { (v - t).abs() / t } else { v.abs() };
        rel(self.left, self.target_left).max(rel(self.right, self.target_right))
    }
}

#[derive(Debug, Clone)]
pub struct LengthRun {
    pub rows: Vec<LengthRow>,
    pub lambda: Vec<f64>,
    pub k_left: Vec<f64>,
    pub k_right: Vec<f64>,
}

pub fn lengths(cfg: &RunConfig, sol: &GridSolution) -> Result<LengthRun, PipelineError> {
    let data = shape_operator(sol, cfg.chart())?;
    let (hl, hr) = (induced_metric(&data, Side::Left), induced_metric(&data, Side::Right));
    let (tl, tr) = boundary_lengths(cfg.residue());
    let rows = boundary_length_profile(&hl)?
        .into_iter()
        .zip(boundary_length_profile(&hr)?)
        .map(|((y, left), (_, right))| LengthRow { y, left, right, target_left: tl, target_right: tr })
        .collect();
    let nan = || vec![f64::NAN; sol.grid.len()];
    Ok(LengthRun {
        rows,
        lambda: principal_curvature(&data).lambda,
        k_left: discrete_curvature(&hl).unwrap_or_else(|_| nan()),
        k_right: discrete_curvature(&hr).unwrap_or_else(|_| nan()),
    })
}

impl LengthRun {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["y", "length_left", "length_right", "target_left", "target_right", "rel_error"]);
        for r in &self.rows {
            t.push(vec![r.y.into(), r.left.into(), r.right.into(), r.target_left.into(), r.target_right.into(), r.error().into()]);
        }
        t
    }

    pub fn curvature_table(&self, sol: &GridSolution) -> Table {
        let g = &sol.grid;
        let mut t = Table::new(&["x", "y", "lambda", "k_left", "k_right"]);
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let n = g.idx(i, j);
                t.push(vec![g.x(i).into(), g.y(j).into(), self.lambda[n].into(), self.k_left[n].into(), self.k_right[n].into()]);
            }
        }
        t
    }
}

/// Angular distance from `iota` to the nearest direction whose model limit
/// is a saw-tooth corner rather than a vertex.
pub fn corner_gap(residue: Complex64, iota: f64) -> f64 {
    match UnitModelMap::new(residue) {
        Some(m) => diagonal_gap(m.omega_direction(iota)),
        None => f64::INFINITY,
    }
}

/// Distance from `p` to the closest of `points`.
pub fn nearest(points: &[TorusPoint], p: &TorusPoint) -> f64 {
    points.iter().map(|q| q.distance(p)).fold(f64::INFINITY, f64::min)
}

fn kind_label(k: HolonomyKind) -> &'static str {
    match k {
        HolonomyKind::Hyperbolic(_) => "hyperbolic",
        HolonomyKind::Parabolic => "parabolic",
    }
}

/// One row per residue: spectrum, factor types, lengths, saw-tooth and
/// decoration.
pub fn classify_table(residues: &[Complex64]) -> Table {
    let mut t = Table::new(&[
        "re", "im", "lambda1", "lambda2", "lambda3", "lambda4", "left", "right", "length_left", "length_right", "sawtooth",
        "vertex_rank", "eps", "rule",
    ]);
    let deco = decoration_of(residues);
    for (k, &r) in residues.iter().enumerate() {
        let rep = holonomy_type(r);
        let mut row: Vec<Cell> = vec![r.re.into(), r.im.into()];
        row.extend(rep.lambda.iter().map(|v| Cell::from(*v)));
        row.push(kind_label(rep.left).into());
        row.push(kind_label(rep.right).into());
        row.push(rep.length_left.into());
        row.push(rep.length_right.into());
        row.push(format!("{:?}", rep.sawtooth).into());
        row.push(format!("{:?}", rep.vertex_rank).into());
        row.push(Cell::Int(i64::from(deco.eps[k])));
        row.push(deco.rules[k].label().into());
        t.push(row);
    }
    t
}
