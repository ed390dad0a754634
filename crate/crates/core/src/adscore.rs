//! Signature-(2,2) linear algebra, the boundary torus of anti-de Sitter space
//! and causal predicates on sampled boundary curves.
//!
//! Points of the two-sheeted model live on the quadric `⟨x,x⟩ = −1` in
//! `R^{2,2}`; the boundary at infinity is the projectivised null cone, which
//! we chart by the pair of angles `(θ, θ′) ∈ S¹×S¹` carrying the conformal
//! Lorentzian class `dθ² − dθ′²`.

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance for membership of the quadric `⟨x,x⟩ = −1`.
pub const QUADRIC_TOL: f64 = 1e-9;
/// Relative tolerance for the null condition.
pub const NULL_REL_TOL: f64 = 1e-9;
/// Absolute slack of the 1-Lipschitz test on the boundary torus.
pub const LIPSCHITZ_TOL: f64 = 1e-6;

/// Diagonal of the signature-(2,2) form.
pub const SIGNATURE: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdsError {
    #[error("vector is not null: |x0²+x1²−x2²−x3²| = {defect:e} relative to |x|² = {norm_sq:e}")]
    NotNull { defect: f64, norm_sq: f64 },
    #[error("null direction is the zero vector")]
    Zero,
    #[error("consecutive samples {index} and {next} coincide in θ but differ in θ′ by {gap:e}")]
    Degenerate { index: usize, next: usize, gap: f64 },
    #[error("an achronality test needs at least two samples, got {0}")]
    TooFewSamples(usize),
}

/// The real bilinear form `x0y0 + x1y1 − x2y2 − x3y3`.
pub fn minkowski_inner(x: &[f64; 4], y: &[f64; 4]) -> f64 {
    x[0] * y[0] + x[1] * y[1] - x[2] * y[2] - x[3] * y[3]
}

/// Hermitian extension `z1w̄1 + z2w̄2 − z3w̄3 − z4w̄4` of the (2,2) form.
pub fn hermitian_inner(z: &[Complex64; 4], w: &[Complex64; 4]) -> Complex64 {
    z.iter()
        .zip(w)
        .zip(SIGNATURE)
        .map(|((a, b), s)| a * b.conj() * s)
        .sum()
}

/// `diag(1,1,−1,−1)` as a real matrix.
pub fn gram() -> Matrix4<f64> {
    Matrix4::from_diagonal(&SIGNATURE.into())
}

/// `‖MᵀGM − G‖_∞` (max-entry norm): zero exactly on `O(2,2)`.
pub fn so22_defect(m: &Matrix4<f64>) -> f64 {
    let g = gram();
    (m.transpose() * g * m - g).amax()
}

/// A point of `R^{2,2}`, usually on the quadric `⟨x,x⟩ = −1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacetimePoint {
    pub x: [f64; 4],
}

impl SpacetimePoint {
    pub fn new(x0: f64, x1: f64, x2: f64, x3: f64) -> Self {
        Self { x: [x0, x1, x2, x3] }
    }

    pub fn norm_sq(&self) -> f64 {
        minkowski_inner(&self.x, &self.x)
    }

    pub fn quadric_defect(&self) -> f64 {
        (self.norm_sq() + 1.0).abs()
    }

    /// Quadric defect measured against the Euclidean size of the point;
    /// this is the only meaningful measure once the coordinates are large.
    pub fn relative_quadric_defect(&self) -> f64 {
        let e: f64 = self.x.iter().map(|c| c * c).sum();
        self.quadric_defect() / e.max(1.0)
    }

    pub fn on_quadric(&self) -> bool {
        self.quadric_defect() <= QUADRIC_TOL
    }

    /// Radial projection onto the null cone followed by the torus chart.
    ///
    /// For points of the quadric this is the angular part `(z/|z|, w)` of the
    /// solid-torus model `D×S¹`, which extends continuously to the boundary.
    pub fn torus_shadow(&self) -> Result<TorusPoint, AdsError> {
        let dir = NullDirection::project(self.x)?;
        null_to_torus(&dir)
    }
}

/// A null vector of `R^{2,2}` up to positive scale, stored with the
/// representative convention `x3 ≥ 0` (ties broken by `x2 ≥ 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullDirection {
    x: [f64; 4],
}

impl NullDirection {
    pub fn new(x: [f64; 4]) -> Result<Self, AdsError> {
        let norm_sq: f64 = x.iter().map(|c| c * c).sum();
        if norm_sq == 0.0 || !norm_sq.is_finite() {
            return Err(AdsError::Zero);
        }
        let defect = minkowski_inner(&x, &x).abs();
        if defect > NULL_REL_TOL * norm_sq {
            return Err(AdsError::NotNull { defect, norm_sq });
        }
        Ok(Self { x: normalize_sign(x) })
    }

    /// Nearest null direction obtained by rescaling the `(x0,x1)` and
    /// `(x2,x3)` halves to unit length independently.
    pub fn project(x: [f64; 4]) -> Result<Self, AdsError> {
        let a = x[0].hypot(x[1]);
        let b = x[2].hypot(x[3]);
        if a == 0.0 || b == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(AdsError::Zero);
        }
        Ok(Self {
            x: normalize_sign([x[0] / a, x[1] / a, x[2] / b, x[3] / b]),
        })
    }

    pub fn from_torus(t: TorusPoint) -> Self {
        Self {
            x: normalize_sign([t.theta.cos(), t.theta.sin(), t.theta_prime.cos(), t.theta_prime.sin()]),
        }
    }

    pub fn coords(&self) -> [f64; 4] {
        self.x
    }
}

/// Round-off sized entries do not decide the sign.
fn normalize_sign(x: [f64; 4]) -> [f64; 4] {
    let tiny = 1e-12 * x.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let pivot = [x[3], x[2], x[1], x[0]].into_iter().find(|c| c.abs() > tiny).unwrap_or(0.0);
    let flip = pivot < 0.0;
    if flip {
        x.map(|c| -c)
    } else {
        x
    }
}

/// Left/right conformal coordinates on `∂∞AdS₃ ≅ S¹×S¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorusPoint {
    pub theta: f64,
    pub theta_prime: f64,
}

impl TorusPoint {
    pub fn new(theta: f64, theta_prime: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            theta_prime: wrap_angle(theta_prime),
        }
    }

    /// The same boundary point as `self`: `x` and `−x` are one null line.
    pub fn antipode(&self) -> TorusPoint {
        TorusPoint::new(self.theta + PI, self.theta_prime + PI)
    }

    /// Max of the two circle distances, minimized over the two
    /// representatives of `other`.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.chart_distance(other).min(self.chart_distance(&other.antipode()))
    }

    /// Max of the two circle distances between these coordinates.
    pub fn chart_distance(&self, other: &TorusPoint) -> f64 {
        circle_distance(self.theta, other.theta).max(circle_distance(self.theta_prime, other.theta_prime))
    }

    /// Coordinates along the two light-like foliations, `(θ+θ′, θ−θ′)` mod 2π.
    pub fn null_coordinates(&self) -> (f64, f64) {
        (wrap_angle(self.theta + self.theta_prime), wrap_angle(self.theta - self.theta_prime))
    }
}

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest-arc distance on the unit circle.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d).min(PI)
}

/// Boundary chart `θ = atan2(x1,x0)`, `θ′ = atan2(x3,x2)`.
pub fn null_to_torus(v: &NullDirection) -> Result<TorusPoint, AdsError> {
    let x = v.x;
    if x.iter().all(|c| *c == 0.0) {
        return Err(AdsError::Zero);
    }
    Ok(TorusPoint::new(x[1].atan2(x[0]), x[3].atan2(x[2])))
}

/// Outcome of the 1-Lipschitz test on a cyclic chain of boundary samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AchronalityReport {
    pub achronal: bool,
    /// Largest `d(θ′)/d(θ)` over consecutive pairs separated by at least
    /// [`SLOPE_MIN_GAP`] in θ.
    pub max_slope: f64,
    /// Largest `d(θ′) − d(θ)` over all consecutive pairs.
    pub max_excess: f64,
}

/// Pairs closer than this in θ do not enter the slope statistic: their
/// ratio is dominated by sampling noise rather than geometry.
pub const SLOPE_MIN_GAP: f64 = 1e-3;

/// Checks that a cyclically ordered chain of torus samples is the graph of a
/// 1-Lipschitz circle map, i.e. locally achronal.
pub fn is_achronal_chain(samples: &[TorusPoint]) -> Result<AchronalityReport, AdsError> {
    if samples.len() < 2 {
        return Err(AdsError::TooFewSamples(samples.len()));
    }
    let n = samples.len();
    let mut max_slope: f64 = 0.0;
    let mut max_excess = f64::NEG_INFINITY;
    let pairs = if n == 2 { 1 } else { n };
    for k in 0..pairs {
        let a = samples[k];
        let b = samples[(k + 1) % n];
        let b = if a.chart_distance(&b.antipode()) < a.chart_distance(&b) { b.antipode() } else { b };
        let d = circle_distance(a.theta, b.theta);
        let dp = circle_distance(a.theta_prime, b.theta_prime);
        if d == 0.0 && dp > LIPSCHITZ_TOL {
            return Err(AdsError::Degenerate { index: k, next: (k + 1) % n, gap: dp });
        }
        max_excess = max_excess.max(dp - d);
        if d >= SLOPE_MIN_GAP {
            max_slope = max_slope.max(dp / d);
        }
    }
    Ok(AchronalityReport {
        achronal: max_excess <= LIPSCHITZ_TOL,
        max_slope,
        max_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn inner_product_examples() {
        assert_eq!(minkowski_inner(&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(minkowski_inner(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 1.0, 1.0]), -4.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(minkowski_inner(&[0.0, 0.0, s, s], &[0.0, 0.0, s, s]), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn hermitian_examples() {
        let i = Complex64::i();
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        assert_eq!(hermitian_inner(&[i, z, z, z], &[i, z, z, z]), o);
        assert_eq!(hermitian_inner(&[o, i, z, z], &[i, o, z, z]), z);
    }

    #[test]
    fn torus_chart_examples() {
        let t = null_to_torus(&NullDirection::new([1.0, 0.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_eq!((t.theta, t.theta_prime), (0.0, 0.0));
        let t = null_to_torus(&NullDirection::new([0.0, 1.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(t.theta, PI / 2.0);
        assert_abs_diff_eq!(t.theta_prime, PI / 2.0);
        assert!(matches!(NullDirection::new([1.0, 0.0, 1.0, 1.0]), Err(AdsError::NotNull { .. })));
        assert_eq!(NullDirection::new([0.0; 4]), Err(AdsError::Zero));
    }

    #[test]
    fn chain_pairs_use_the_nearer_representative() {
        let a = TorusPoint::new(1.5, 0.01);
        let b = TorusPoint::new(1.55 + PI, -0.04 + PI);
        assert_abs_diff_eq!(a.distance(&b), 0.05, epsilon = 1e-12);
        assert!(a.chart_distance(&b) > 3.0);
        let report = is_achronal_chain(&[a, b, TorusPoint::new(3.0, 5.0)]).unwrap();
        assert!(report.achronal, "{report:?}");
        let shifted = [a, b].map(|p| p.antipode());
        assert!(is_achronal_chain(&shifted).unwrap().achronal);
    }

    #[test]
    fn sign_convention() {
        let v = NullDirection::new([0.0, 1.0, 0.0, -1.0]).unwrap();
        assert_eq!(v.coords(), [0.0, -1.0, 0.0, 1.0]);
        let v = NullDirection::new([1.0, 0.0, -1.0, 0.0]).unwrap();
        assert_eq!(v.coords(), [-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn so22_examples() {
        assert_eq!(so22_defect(&Matrix4::identity()), 0.0);
        let d = Matrix4::from_diagonal(&[2.0, 1.0, 1.0, 1.0].into());
        assert_eq!(so22_defect(&d), 3.0);
        let (s, c) = 0.7f64.sin_cos();
        let mut r = Matrix4::identity();
        r[(0, 0)] = c;
        r[(0, 1)] = -s;
        r[(1, 0)] = s;
        r[(1, 1)] = c;
        assert!(so22_defect(&r) < 1e-15);
    }

    fn chain(f: impl Fn(f64) -> f64, n: usize) -> Vec<TorusPoint> {
        (0..n)
            .map(|k| {
                let t = TAU * k as f64 / n as f64;
                TorusPoint::new(t, f(t))
            })
            .collect()
    }

    #[test]
    fn achronality_examples() {
        let flat = is_achronal_chain(&chain(|_| 1.0, 64)).unwrap();
        assert!(flat.achronal);
        assert_eq!(flat.max_slope, 0.0);

        let diag = is_achronal_chain(&chain(|t| t, 64)).unwrap();
        assert!(diag.achronal);
        assert_abs_diff_eq!(diag.max_slope, 1.0, epsilon = 1e-12);

        let steep = [TorusPoint::new(0.0, 0.0), TorusPoint::new(0.1, 0.2)];
        assert!(!is_achronal_chain(&steep).unwrap().achronal);

        let degenerate = [TorusPoint::new(0.3, 0.0), TorusPoint::new(0.3, 0.5), TorusPoint::new(2.0, 0.0)];
        assert!(matches!(is_achronal_chain(&degenerate), Err(AdsError::Degenerate { .. })));
        assert_eq!(is_achronal_chain(&degenerate[..1]), Err(AdsError::TooFewSamples(1)));
    }

    fn vec4() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(-10.0f64..10.0)
    }

    proptest! {
        #[test]
        fn minkowski_symmetric_bilinear(x in vec4(), y in vec4(), z in vec4(), a in -3.0f64..3.0) {
            let lhs = minkowski_inner(&x, &y);
            prop_assert!((lhs - minkowski_inner(&y, &x)).abs() < 1e-12);
            let xz: [f64; 4] = std::array::from_fn(|k| x[k] + a * z[k]);
            let lin = minkowski_inner(&xz, &y) - lhs - a * minkowski_inner(&z, &y);
            prop_assert!(lin.abs() < 1e-10);
        }

        #[test]
        fn hermitian_real_on_diagonal(re in vec4(), im in vec4(), y in vec4()) {
            let z: [Complex64; 4] = std::array::from_fn(|k| Complex64::new(re[k], im[k]));
            prop_assert!(hermitian_inner(&z, &z).im.abs() < 1e-12);
            let xr = re.map(|c| Complex64::new(c, 0.0));
            let yr = y.map(|c| Complex64::new(c, 0.0));
            let h = hermitian_inner(&xr, &yr);
            prop_assert!((h.re - minkowski_inner(&re, &y)).abs() < 1e-12 && h.im == 0.0);
        }

        #[test]
        fn torus_round_trip(t in 0.0f64..TAU, tp in 0.0f64..TAU) {
            let p = TorusPoint::new(t, tp);
            let back = null_to_torus(&NullDirection::from_torus(p)).unwrap();
            // the sign convention may send (θ,θ′) to (θ+π,θ′+π) when sin θ′ < 0
            let direct = p.distance(&back);
            let antipodal = p.distance(&TorusPoint::new(back.theta + PI, back.theta_prime + PI));
            prop_assert!(direct.min(antipodal) < 1e-12);
            if tp < PI - 1e-9 {
                prop_assert!(direct < 1e-12);
            }
        }

        #[test]
        fn achronality_rotation_invariant(shift in 0.0f64..TAU, shift2 in 0.0f64..TAU, amp in 0.0f64..1.5) {
            let base = chain(|t| amp * t.sin(), 48);
            let rotated: Vec<_> = base
                .iter()
                .map(|p| TorusPoint::new(p.theta + shift, p.theta_prime + shift2))
                .collect();
            let a = is_achronal_chain(&base).unwrap();
            let b = is_achronal_chain(&rotated).unwrap();
            prop_assert_eq!(a.achronal, b.achronal);
            prop_assert!((a.max_slope - b.max_slope).abs() < 1e-9);
        }
    }
}
