//! TOML run configuration shared by the command-line subcommands.
//!
//! ```toml
//! [chart]
//! residue_re = 1.0
//! residue_im = 0.0
//! tail = [[1, 0.1, 0.0]]   # [m, re, im]: coefficient of e^{imw}
//! y0 = 1.0
//! ymax = 9.0
//! mode = "flat"            # optional, checked against the residue
//! collar = [2.0, 4.0]      # optional, flat ends only
//!
//! [solver]
//! nx = 64
//! ny = 129
//! tol = 1e-10
//! max_iters = 50
//! bc_inner = "midpoint"    # or a number
//! bc_outer = 0.0
//! richardson = false       # extrapolate from a second, refined solve
//!
//! [rays]
//! field = "solution"       # or "horospherical"
//! count = 24
//! t_max = 12.0
//! h = 0.005
//! base_y = 2.0
//!
//! [holonomy]
//! heights = [2.0, 4.0, 6.0, 8.0]
//! gate = 1e-3
//! steps = 8192
//!
//! out = "out"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frame::HOLONOMY_STEPS;
use crate::qdiff::{Collar, EndChart, EndMode, QdiffError};
use crate::vortex::{BoundaryCondition, CylinderGrid, InnerValue, SolverOptions, VortexError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error(transparent)]
    Chart(#[from] QdiffError),
    #[error(transparent)]
    Grid(#[from] VortexError),
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub residue_re: f64,
    #[serde(default)]
    pub residue_im: f64,
    #[serde(default)]
    pub tail: Vec<(i64, f64, f64)>,
    pub y0: f64,
    pub ymax: f64,
    #[serde(default)]
    pub mode: Option<EndMode>,
    #[serde(default)]
    pub collar: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InnerSpec {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub nx: usize,
    pub ny: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub bc_inner: InnerSpec,
    pub bc_outer: f64,
    /// Also solve on the refined grid and extrapolate.
    pub richardson: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 129,
            tol: crate::vortex::DEFAULT_TOL,
            max_iters: crate::vortex::DEFAULT_MAX_ITERS,
            bc_inner: InnerSpec::Keyword("midpoint".into()),
            bc_outer: 0.0,
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RayField {
    /// Frames of the solved end.
    Solution,
    /// The closed-form reference surface `φ = 0`, `q = 1`, over a full turn.
    Horospherical,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaySpec {
    pub field: RayField,
    /// Evenly spaced directions `ι_k = πk/(count+1)`, or a full turn for
    /// the horospherical reference.
    pub count: usize,
    /// Explicit directions; overrides `count`.
    pub iota: Option<Vec<f64>>,
    pub t_max: f64,
    pub h: f64,
    /// Height of the basepoint; defaults to `y0 + 1`.
    pub base_y: Option<f64>,
}

impl Default for RaySpec {
    fn default() -> Self {
        Self { field: RayField::Solution, count: 24, iota: None, t_max: 12.0, h: 0.005, base_y: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolonomySpec {
    pub heights: Vec<f64>,
    pub gate: f64,
    pub steps: usize,
}

impl Default for HolonomySpec {
    fn default() -> Self {
        Self { heights: Vec::new(), gate: 1e-3, steps: HOLONOMY_STEPS }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    chart: ChartSpec,
    #[serde(default)]
    solver: SolverSpec,
    #[serde(default)]
    rays: RaySpec,
    #[serde(default)]
    holonomy: HolonomySpec,
    #[serde(default)]
    out: Option<PathBuf>,
}

/// A validated configuration together with the digest of its source text.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub chart_spec: ChartSpec,
    pub solver: SolverSpec,
    pub rays: RaySpec,
    pub holonomy: HolonomySpec,
    pub out: Option<PathBuf>,
    pub hash: ConfigHash,
    chart: EndChart,
    grid: CylinderGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigHash(pub [u8; 32]);

impl ConfigHash {
    pub fn of(text: &str) -> Self {
        Self(Sha256::digest(text.as_bytes()).into())
    }
}

impl fmt::Display for ConfigHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b:02x}"))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let chart = build_chart(&raw.chart)?;
        check_solver(&raw.solver)?;
        check_rays(&raw.rays, &raw.chart)?;
        check_holonomy(&raw.holonomy, &raw.chart)?;
        let grid = CylinderGrid::for_chart(&chart, raw.solver.nx, raw.solver.ny)?;
        Ok(Self {
            chart_spec: raw.chart,
            solver: raw.solver,
            rays: raw.rays,
            holonomy: raw.holonomy,
            out: raw.out,
            hash: ConfigHash::of(text),
            chart,
            grid,
        })
    }

    pub fn chart(&self) -> &EndChart {
        &self.chart
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }

    pub fn residue(&self) -> Complex64 {
        self.chart.residue()
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        let inner = match &self.solver.bc_inner {
            InnerSpec::Value(v) => InnerValue::Value(*v),
            InnerSpec::Keyword(_) => InnerValue::BarrierMidpoint,
        };
        BoundaryCondition { inner, outer: self.solver.bc_outer }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iters: self.solver.max_iters,
            bc: self.boundary_condition(),
            initial: None,
        }
    }

    pub fn base_y(&self) -> f64 {
        self.rays.base_y.unwrap_or(self.chart.y0() + 1.0)
    }

    /// Ray directions in increasing order.
    pub fn ray_directions(&self) -> Vec<f64> {
        if let Some(list) = &self.rays.iota {
            let mut v = list.clone();
            v.sort_by(f64::total_cmp);
            return v;
        }
        let n = self.rays.count;
        match self.rays.field {
            RayField::Solution => (1..=n).map(|k| std::f64::consts::PI * k as f64 / (n + 1) as f64).collect(),
            RayField::Horospherical => (0..n).map(|k| std::f64::consts::TAU * (k as f64 + 0.5) / n as f64).collect(),
        }
    }
}

fn build_chart(spec: &ChartSpec) -> Result<EndChart, ConfigError> {
    let residue = Complex64::new(spec.residue_re, spec.residue_im);
    let highest = spec.tail.iter().map(|t| t.0).max().unwrap_or(0);
    let mut tail = vec![Complex64::new(0.0, 0.0); highest.max(0) as usize];
    for &(m, re, im) in &spec.tail {
        if m < 1 {
            return Err(invalid("chart.tail", format!("mode index must be at least 1, got {m}")));
        }
        let slot = &mut tail[(m - 1) as usize];
        if slot.norm() != 0.0 {
            return Err(invalid("chart.tail", format!("mode {m} listed twice")));
        }
        *slot = Complex64::new(re, im);
    }
    let mut chart = EndChart::new(residue, tail, spec.y0, spec.ymax)?;
    if let Some(mode) = spec.mode {
        if mode != chart.mode() {
            return Err(invalid("chart.mode", format!("{mode:?} does not match residue {residue}")));
        }
    }
    if let Some([y_lo, y_hi]) = spec.collar {
        chart = chart.with_collar(Collar { y_lo, y_hi })?;
    }
    Ok(chart)
}

fn check_solver(s: &SolverSpec) -> Result<(), ConfigError> {
    if !(s.tol > 0.0) {
        return Err(invalid("solver.tol", "must be positive"));
    }
    if s.max_iters == 0 {
        return Err(invalid("solver.max_iters", "must be positive"));
    }
    match &s.bc_inner {
        InnerSpec::Keyword(k) if k != "midpoint" => {
            Err(invalid("solver.bc_inner", format!("expected a number or \"midpoint\", got \"{k}\"")))
        }
        InnerSpec::Value(v) if !v.is_finite() => Err(invalid("solver.bc_inner", "must be finite")),
        _ if !s.bc_outer.is_finite() => Err(invalid("solver.bc_outer", "must be finite")),
        _ => Ok(()),
    }
}

fn check_rays(r: &RaySpec, chart: &ChartSpec) -> Result<(), ConfigError> {
    if !(r.h > 0.0) {
        return Err(invalid("rays.h", "must be positive"));
    }
    if !(r.t_max > 0.0) {
        return Err(invalid("rays.t_max", "must be positive"));
    }
    if let Some(list) = &r.iota {
        if r.field == RayField::Solution && list.iter().any(|i| !(*i > 0.0 && *i < std::f64::consts::PI)) {
            return Err(invalid("rays.iota", "directions must lie in (0, π)"));
        }
    }
    if let Some(b) = r.base_y {
        if !(b >= chart.y0 && b < chart.ymax) {
            return Err(invalid("rays.base_y", format!("must lie in [{}, {})", chart.y0, chart.ymax)));
        }
    }
    Ok(())
}

fn check_holonomy(h: &HolonomySpec, chart: &ChartSpec) -> Result<(), ConfigError> {
    if !(h.gate > 0.0) {
        return Err(invalid("holonomy.gate", "must be positive"));
    }
    if h.steps == 0 {
        return Err(invalid("holonomy.steps", "must be positive"));
    }
    if let Some(y) = h.heights.iter().find(|y| !(**y >= chart.y0 && **y <= chart.ymax)) {
        return Err(invalid("holonomy.heights", format!("{y} outside [{}, {}]", chart.y0, chart.ymax)));
    }
    Ok(())
}
