//! One puncture end in the cylinder coordinate `w = x + iy`, `z = e^{iw}`.
//!
//! The quadratic differential pulls back to `−(R + Σ a_m e^{imw}) dw²` and the
//! background metric `g |dw|²` is either the flat metric `|R|` (non-zero
//! residue) or the cusp metric `1/(2y²)` (zero residue), optionally blended
//! across a collar `[y_lo, y_hi]` for flat ends.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Modes beyond this are dropped when converting z-chart Laurent data.
pub const DEFAULT_TAIL_MODES: usize = 8;

/// Slack on the chart range so that integrators may touch the boundary rows.
const CHART_SLACK: f64 = 1e-9;

/// Step of the finite-difference stencil for `log g` on the collar.
const COLLAR_FD_STEP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QdiffError {
    #[error("Im w = {y} outside the chart range [{y0}, {ymax}]")]
    OutOfChart { y: f64, y0: f64, ymax: f64 },
    #[error("pole of order {order} exceeds 2 (coefficient of z^{power} is non-zero)")]
    PoleTooHigh { order: i32, power: i32 },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndMode {
    /// Non-zero residue: flat model metric `|R||dw|²`.
    Flat,
    /// Zero residue: cusp metric `|dw|²/(2y²)` of curvature −2.
    Cusp,
}

/// Annulus on which a flat end is blended into the cusp metric; `y_lo` is
/// the outer edge (towards the rest of the surface), `y_hi` the edge of the
/// flat model zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collar {
    pub y_lo: f64,
    pub y_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndChart {
    residue: Complex64,
    /// `tail[m-1]` is the coefficient of `e^{imw}`.
    tail: Vec<Complex64>,
    y0: f64,
    ymax: f64,
    collar: Option<Collar>,
}

impl EndChart {
    pub fn new(residue: Complex64, tail: Vec<Complex64>, y0: f64, ymax: f64) -> Result<Self, QdiffError> {
        if !(y0 > 0.0 && ymax > y0 && ymax.is_finite()) {
            return Err(QdiffError::InvalidChart(format!("need 0 < y0 < ymax, got y0 = {y0}, ymax = {ymax}")));
        }
        if !residue.is_finite() || tail.iter().any(|a| !a.is_finite()) {
            return Err(QdiffError::InvalidChart("non-finite coefficient".into()));
        }
        Ok(Self { residue, tail, y0, ymax, collar: None })
    }

    /// Flat end with no tail; `u ≡ 0` solves the vortex equation exactly.
    pub fn unit_model(residue: Complex64, y0: f64, ymax: f64) -> Result<Self, QdiffError> {
        Self::new(residue, Vec::new(), y0, ymax)
    }

    pub fn with_collar(mut self, collar: Collar) -> Result<Self, QdiffError> {
        if self.mode() == EndMode::Cusp {
            return Err(QdiffError::InvalidChart("a collar only applies to flat ends".into()));
        }
        if !(collar.y_lo >= self.y0 && collar.y_hi > collar.y_lo && collar.y_hi <= self.ymax) {
            return Err(QdiffError::InvalidChart(format!(
                "collar [{}, {}] must satisfy y0 <= y_lo < y_hi <= ymax",
                collar.y_lo, collar.y_hi
            )));
        }
        self.collar = Some(collar);
        Ok(self)
    }

    pub fn residue(&self) -> Complex64 {
        self.residue
    }

    pub fn tail(&self) -> &[Complex64] {
        &self.tail
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn collar(&self) -> Option<Collar> {
        self.collar
    }

    pub fn mode(&self) -> EndMode {
        if self.residue == Complex64::new(0.0, 0.0) {
            EndMode::Cusp
        } else {
            EndMode::Flat
        }
    }

    /// `q ≡ 0` on the whole chart.
    pub fn is_zero_differential(&self) -> bool {
        self.mode() == EndMode::Cusp && self.tail.iter().all(|a| a.norm() == 0.0)
    }

    fn check(&self, y: f64) -> Result<(), QdiffError> {
        if y < self.y0 - CHART_SLACK || y > self.ymax + CHART_SLACK || y.is_nan() {
            return Err(QdiffError::OutOfChart { y, y0: self.y0, ymax: self.ymax });
        }
        Ok(())
    }

    /// Coefficient of the pulled-back differential in `dw²`.
    pub fn q_at(&self, w: Complex64) -> Result<Complex64, QdiffError> {
        self.check(w.im)?;
        Ok(self.q_unchecked(w))
    }

    pub(crate) fn q_unchecked(&self, w: Complex64) -> Complex64 {
        let z = (Complex64::i() * w).exp();
        let mut zm = Complex64::new(1.0, 0.0);
        let mut sum = self.residue;
        for a in &self.tail {
            zm *= z;
            sum += a * zm;
        }
        -sum
    }

    /// Conformal coefficient `g(y)` and Gaussian curvature `K_g(y)`.
    pub fn background_at(&self, y: f64) -> Result<(f64, f64), QdiffError> {
        self.check(y)?;
        let (lg, _, d2) = self.log_g_jet(y);
        let g = lg.exp();
        Ok((g, -0.5 * d2 / g))
    }

    /// `(log g, (log g)′, (log g)″)` at height `y`.
    pub fn log_g_jet(&self, y: f64) -> (f64, f64, f64) {
        match self.mode() {
            EndMode::Cusp => cusp_log_jet(y),
            EndMode::Flat => match self.collar {
                Some(c) if y < c.y_hi => {
                    if y <= c.y_lo {
                        cusp_log_jet(y)
                    } else {
                        let h = COLLAR_FD_STEP;
                        let f = |s: f64| self.blended_log_g(s, c);
                        let (fm2, fm1, f0, fp1, fp2) = (f(y - 2.0 * h), f(y - h), f(y), f(y + h), f(y + 2.0 * h));
                        let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
                        let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
                        (f0, d1, d2)
                    }
                }
                _ => (self.residue.norm().ln(), 0.0, 0.0),
            },
        }
    }

    fn blended_log_g(&self, y: f64, c: Collar) -> f64 {
        let t = ((y - c.y_lo) / (c.y_hi - c.y_lo)).clamp(0.0, 1.0);
        let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        (1.0 - s) * cusp_log_jet(y).0 + s * self.residue.norm().ln()
    }

    /// `‖q‖²_g = |q|² / g²`.
    pub fn q_norm_sq(&self, w: Complex64) -> Result<f64, QdiffError> {
        let q = self.q_at(w)?;
        let (g, _) = self.background_at(w.im)?;
        Ok(q.norm_sqr() / (g * g))
    }
}

fn cusp_log_jet(y: f64) -> (f64, f64, f64) {
    (-(2.0 * y * y).ln(), -2.0 / y, 2.0 / (y * y))
}

/// Laurent coefficients `q(z) = Σ_k c_k z^k` around the puncture.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentSeries {
    pub lowest_power: i32,
    pub coeffs: Vec<Complex64>,
}

impl LaurentSeries {
    pub fn coefficient(&self, power: i32) -> Complex64 {
        let k = power - self.lowest_power;
        if k < 0 {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs.get(k as usize).copied().unwrap_or_default()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * z.powi(self.lowest_power + k as i32))
            .sum()
    }
}

/// Residue and cylinder tail of a z-chart Laurent series.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderData {
    pub residue: Complex64,
    pub tail: Vec<Complex64>,
}

/// Pulls `q(z)dz²` back along `z = e^{iw}`, where `dz² = −z²dw²`, keeping
/// at most `DEFAULT_TAIL_MODES` tail modes.
pub fn residue_from_z_chart(laurent: &LaurentSeries) -> Result<CylinderData, QdiffError> {
    residue_from_z_chart_with_limit(laurent, DEFAULT_TAIL_MODES)
}

pub fn residue_from_z_chart_with_limit(laurent: &LaurentSeries, modes: usize) -> Result<CylinderData, QdiffError> {
    for (k, c) in laurent.coeffs.iter().enumerate() {
        let power = laurent.lowest_power + k as i32;
        if power < -2 && c.norm() != 0.0 {
            return Err(QdiffError::PoleTooHigh { order: -power, power });
        }
    }
    let residue = laurent.coefficient(-2);
    let highest = laurent.lowest_power + laurent.coeffs.len() as i32 - 1;
    let available = (highest + 2).max(0) as usize;
    let mut tail: Vec<Complex64> = (1..=available.min(modes) as i32)
        .map(|m| laurent.coefficient(m - 2))
        .collect();
    while tail.last().is_some_and(|a| a.norm() == 0.0) {
        tail.pop();
    }
    Ok(CylinderData { residue, tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn q_examples() {
        let unit = EndChart::unit_model(c(1.0, 0.0), 1.0, 9.0).unwrap();
        assert_eq!(unit.q_at(c(0.3, 2.0)).unwrap(), c(-1.0, 0.0));

        let tailed = EndChart::new(c(3.0, 4.0), vec![c(0.1, 0.0)], 1.0, 40.0).unwrap();
        let far = tailed.q_at(c(0.0, 40.0)).unwrap();
        assert!((far - c(-3.0, -4.0)).norm() < 1e-17 + 0.1 * (-40.0f64).exp() * 1.01);

        let cusp = EndChart::new(c(0.0, 0.0), vec![c(1.0, 0.0)], 1e-3, 1.0).unwrap();
        assert!(matches!(cusp.q_at(c(0.0, 0.0)), Err(QdiffError::OutOfChart { .. })));
        assert!((cusp.q_unchecked(c(0.0, 0.0)) - c(-1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(unit.q_at(c(0.0, 9.5)), Err(QdiffError::OutOfChart { .. })));
    }

    #[test]
    fn background_examples() {
        let flat = EndChart::unit_model(c(3.0, 4.0), 1.0, 9.0).unwrap();
        let (g, k) = flat.background_at(4.2).unwrap();
        assert_abs_diff_eq!(g, 5.0, epsilon = 1e-14);
        assert_eq!(k, 0.0);

        let cusp = EndChart::unit_model(c(0.0, 0.0), 0.5, 9.0).unwrap();
        let (g, k) = cusp.background_at(1.0).unwrap();
        assert_abs_diff_eq!(g, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(k, -2.0, epsilon = 1e-14);
        let (g, k) = cusp.background_at(2.0).unwrap();
        assert_abs_diff_eq!(g, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(k, -2.0, epsilon = 1e-14);
        assert!(matches!(cusp.background_at(0.1), Err(QdiffError::OutOfChart { .. })));
    }

    #[test]
    fn q_norm_examples() {
        let unit = EndChart::unit_model(c(1.0, 0.0), 1.0, 9.0).unwrap();
        assert_abs_diff_eq!(unit.q_norm_sq(c(1.0, 3.0)).unwrap(), 1.0);
        let unit = EndChart::unit_model(c(3.0, 4.0), 1.0, 9.0).unwrap();
        assert_abs_diff_eq!(unit.q_norm_sq(c(1.0, 3.0)).unwrap(), 1.0, epsilon = 1e-14);
        let zero = EndChart::unit_model(c(0.0, 0.0), 1.0, 9.0).unwrap();
        assert_eq!(zero.q_norm_sq(c(1.0, 3.0)).unwrap(), 0.0);
        assert!(zero.is_zero_differential());
    }

    #[test]
    fn q_norm_tends_to_one() {
        let chart = EndChart::new(c(-2.0, 1.0), vec![c(0.3, -0.2), c(0.5, 0.5)], 1.0, 30.0).unwrap();
        let devs: Vec<f64> = [2.0, 5.0, 10.0, 20.0, 30.0]
            .iter()
            .map(|&y| (chart.q_norm_sq(c(0.7, y)).unwrap() - 1.0).abs())
            .collect();
        assert!(devs.windows(2).all(|p| p[1] < p[0]));
        assert!(devs[4] < 1e-12);
    }

    #[test]
    fn invalid_charts() {
        assert!(EndChart::new(c(1.0, 0.0), vec![], 0.0, 1.0).is_err());
        assert!(EndChart::new(c(1.0, 0.0), vec![], 2.0, 1.0).is_err());
        let cusp = EndChart::unit_model(c(0.0, 0.0), 1.0, 9.0).unwrap();
        assert!(cusp.with_collar(Collar { y_lo: 2.0, y_hi: 3.0 }).is_err());
        let flat = EndChart::unit_model(c(1.0, 0.0), 1.0, 9.0).unwrap();
        assert!(flat.with_collar(Collar { y_lo: 3.0, y_hi: 2.0 }).is_err());
    }

    #[test]
    fn collar_is_smooth_and_positive() {
        let chart = EndChart::unit_model(c(2.0, 1.0), 0.5, 12.0)
            .unwrap()
            .with_collar(Collar { y_lo: 2.0, y_hi: 4.0 })
            .unwrap();
        let h = 1e-2;
        let mut prev_d2: Option<f64> = None;
        let mut y = 1.2;
        while y < 11.0 {
            let (g, k) = chart.background_at(y).unwrap();
            assert!(g > 0.0 && k.is_finite());
            let gm = chart.background_at(y - h).unwrap().0;
            let gp = chart.background_at(y + h).unwrap().0;
            let d2 = (gp - 2.0 * g + gm) / (h * h);
            assert!(d2.abs() < 50.0, "second derivative {d2} at y = {y}");
            if let Some(p) = prev_d2 {
                assert!((d2 - p).abs() < 1.0, "jump in g'' at y = {y}");
            }
            prev_d2 = Some(d2);
            y += h;
        }
        let (g, k) = chart.background_at(1.0).unwrap();
        assert_abs_diff_eq!(g, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(k, -2.0, epsilon = 1e-12);
        let (g, k) = chart.background_at(6.0).unwrap();
        assert_abs_diff_eq!(g, 5f64.sqrt(), epsilon = 1e-14);
        assert_eq!(k, 0.0);
    }

    #[test]
    fn collar_curvature_matches_analytic_jet() {
        // away from the blend the finite-difference route must reproduce the
        // closed-form cusp curvature
        let chart = EndChart::unit_model(c(1.0, 0.0), 0.5, 12.0)
            .unwrap()
            .with_collar(Collar { y_lo: 2.0, y_hi: 4.0 })
            .unwrap();
        let (lg, d1, _) = chart.log_g_jet(2.0 + 1e-9);
        let (lc, dc, _) = cusp_log_jet(2.0);
        assert_abs_diff_eq!(lg, lc, epsilon = 1e-8);
        assert_abs_diff_eq!(d1, dc, epsilon = 1e-6);
    }

    #[test]
    fn z_chart_examples() {
        let only = LaurentSeries { lowest_power: -2, coeffs: vec![c(3.0, 4.0)] };
        let d = residue_from_z_chart(&only).unwrap();
        assert_eq!(d.residue, c(3.0, 4.0));
        assert!(d.tail.is_empty());

        let with_tail = LaurentSeries { lowest_power: -2, coeffs: vec![c(1.0, 0.0), c(5.0, 0.0)] };
        let d = residue_from_z_chart(&with_tail).unwrap();
        assert_eq!(d.residue, c(1.0, 0.0));
        assert_eq!(d.tail, vec![c(5.0, 0.0)]);

        let cubic = LaurentSeries { lowest_power: -3, coeffs: vec![c(1.0, 0.0)] };
        assert!(matches!(residue_from_z_chart(&cubic), Err(QdiffError::PoleTooHigh { order: 3, .. })));

        let padded = LaurentSeries { lowest_power: -4, coeffs: vec![c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)] };
        assert_eq!(residue_from_z_chart(&padded).unwrap().residue, c(2.0, 0.0));
    }

    #[test]
    fn z_chart_pullback_agrees_with_direct_evaluation() {
        // q(z)dz² at z = e^{iw} equals q_w(w) dw² with dz = i z dw
        let laurent = LaurentSeries {
            lowest_power: -2,
            coeffs: vec![c(1.0, 0.0), c(5.0, 0.0), c(-0.3, 0.2), c(0.0, 1.5)],
        };
        let d = residue_from_z_chart(&laurent).unwrap();
        let chart = EndChart::new(d.residue, d.tail, 0.5, 5.0).unwrap();
        for k in 0..10 {
            let w = c(0.61 * k as f64 - 2.0, 0.6 + 0.4 * k as f64);
            let z = (Complex64::i() * w).exp();
            let dz_dw = Complex64::i() * z;
            let direct = laurent.eval(z) * dz_dw * dz_dw;
            let via_chart = chart.q_at(w).unwrap();
            assert!((direct - via_chart).norm() <= 1e-12 * via_chart.norm());
        }
    }

    #[test]
    fn z_chart_truncates_tail() {
        let coeffs: Vec<_> = (0..12).map(|k| c(1.0 + k as f64, 0.0)).collect();
        let d = residue_from_z_chart(&LaurentSeries { lowest_power: -2, coeffs }).unwrap();
        assert_eq!(d.tail.len(), DEFAULT_TAIL_MODES);
    }
}
