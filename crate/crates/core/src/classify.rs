//! Predictions that depend on the residue alone: the peripheral matrix `A`,
//! its spectrum, holonomy types and translation lengths, saw-tooth data and
//! puncture decorations.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::frame::CMat4;
use crate::horo;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("the peripheral matrix is undefined for a zero residue")]
    ZeroResidue,
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// `lim A_y` in the frame `(v₁, v₂, N, σ)`.
pub fn peripheral_matrix_complex(r: Complex64) -> Result<CMat4, ClassifyError> {
    if r == c(0.0) {
        return Err(ClassifyError::ZeroResidue);
    }
    let s = r.norm().sqrt();
    let a = -r / s;
    let b = -r.conj() / s;
    let (o, e) = (c(0.0), c(s));
    #[rustfmt::skip]
    let m = CMat4::new(
        o, o, b, e,
        o, o, a, e,
        a, b, o, o,
        e, e, o, o,
    );
    Ok(m)
}

/// Real realisation `A₀ A A₀⁻¹` of the peripheral matrix.
pub fn peripheral_matrix(r: Complex64) -> Result<nalgebra::Matrix4<f64>, ClassifyError> {
    let a = peripheral_matrix_complex(r)?;
    let a0 = horo::constants().a0;
    Ok((a0 * a * a0.adjoint()).map(|z| z.re))
}

/// `χ_A(t) = t⁴ − 4|R|t² + 4 Im(R)²`.
pub fn char_poly(r: Complex64, t: f64) -> f64 {
    let t2 = t * t;
    t2 * t2 - 4.0 * r.norm() * t2 + 4.0 * r.im * r.im
}

/// `(|R| + s, |R| − s)` where `R = s + i·other` up to order, evaluated without cancellation.
fn split(s: f64, other: f64) -> (f64, f64) {
    let m = s.hypot(other);
    if m == 0.0 {
        return (0.0, 0.0);
    }
    let big = m + s.abs();
    let small = other * other / big;
    if s >= 0.0 {
        (big, small)
    } else {
        (small, big)
    }
}

/// `(λ₁, λ₂, −λ₁, −λ₂)` with `λ₁ = √(2(|R|+|Re R|))`, `λ₂ = √(2(|R|−|Re R|))`.
pub fn char_poly_eigen(r: Complex64) -> [f64; 4] {
    let (p, m) = split(r.re.abs(), r.im);
    let (l1, l2) = ((2.0 * p).sqrt(), (2.0 * m).sqrt());
    [l1, l2, -l1, -l2]
}

/// Targets `2π(λ₁, λ₂, −λ₂, −λ₁)` for the log-moduli of the holonomy, descending.
pub fn log_moduli_targets(r: Complex64) -> [f64; 4] {
    let [l1, l2, _, _] = char_poly_eigen(r);
    let t = 2.0 * PI;
    [t * l1, t * l2, -t * l2, -t * l1]
}

/// `max_i |ℓ_i − 2πλ_i| / (2πλ₁)`, absolute when `λ₁ = 0`.
pub fn log_moduli_error(measured: &[f64; 4], r: Complex64) -> f64 {
    let target = log_moduli_targets(r);
    let err = measured.iter().zip(&target).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if target[0] > 0.0 {
        err / target[0]
    } else {
        err
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", content = "length", rename_all = "lowercase")]
pub enum HolonomyKind {
    Hyperbolic(f64),
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SawtoothOrientation {
    FutureDirected,
    PastDirected,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VertexRank {
    SecondBiggest,
    SecondSmallest,
    NotApplicable,
}

/// Left/right assignment on the imaginary axis follows the convention of
/// the length formulas; the spectrum alone does not distinguish the factors.
pub const FACTOR_CONVENTION: &str = "left factor carries 4π√(|R|+Im R)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolonomyReport {
    pub residue: [f64; 2],
    /// Descending.
    pub lambda: [f64; 4],
    pub left: HolonomyKind,
    pub right: HolonomyKind,
    pub length_left: f64,
    pub length_right: f64,
    pub sawtooth: SawtoothOrientation,
    pub vertex_rank: VertexRank,
    pub factor_convention: &'static str,
}

/// `(ℓ_l, ℓ_r) = 4π(√(|R|+Im R), √(|R|−Im R))`; one or both vanish on the
/// imaginary axis, matching the parabolic factors.
pub fn boundary_lengths(r: Complex64) -> (f64, f64) {
    let (p, m) = split(r.im, r.re);
    (4.0 * PI * p.sqrt(), 4.0 * PI * m.sqrt())
}

pub fn holonomy_type(r: Complex64) -> HolonomyReport {
    let [l1, l2, l3, l4] = char_poly_eigen(r);
    let (ll, lr) = boundary_lengths(r);
    let (left, right) = if r.re != 0.0 {
        (HolonomyKind::Hyperbolic(ll), HolonomyKind::Hyperbolic(lr))
    } else if r.im > 0.0 {
        (HolonomyKind::Hyperbolic(ll), HolonomyKind::Parabolic)
    } else if r.im < 0.0 {
        (HolonomyKind::Parabolic, HolonomyKind::Hyperbolic(lr))
    } else {
        (HolonomyKind::Parabolic, HolonomyKind::Parabolic)
    };
    let (sawtooth, vertex_rank) = sawtooth_of(r);
    HolonomyReport {
        residue: [r.re, r.im],
        lambda: [l1, l2, l4, l3],
        left,
        right,
        length_left: ll,
        length_right: lr,
        sawtooth,
        vertex_rank,
        factor_convention: FACTOR_CONVENTION,
    }
}

/// Orientation from the sign of `Re R`, rank of the middle vertex from the
/// sign of `Re R · Im R`.
pub fn sawtooth_of(r: Complex64) -> (SawtoothOrientation, VertexRank) {
    use SawtoothOrientation::*;
    use VertexRank::*;
    if r.re == 0.0 || r.im == 0.0 || r.re.is_nan() || r.im.is_nan() {
        return (SawtoothOrientation::None, NotApplicable);
    }
    let orientation = if r.re > 0.0 { FutureDirected } else { PastDirected };
    let rank = if (r.re > 0.0) == (r.im > 0.0) { SecondBiggest } else { SecondSmallest };
    (orientation, rank)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecorationRule {
    /// (i) `Re R > 0`, ε = +1.
    PositiveReal,
    /// (ii) `Re R < 0`, ε = −1.
    NegativeReal,
    /// (iii) `Re R = 0`, `Im R > 0`, ε = 0.
    ImaginaryUpper,
    /// (iii) mirrored: `Re R = 0`, `Im R < 0`, ε = 0.
    ImaginaryLower,
    /// (iv) `R = 0`, ε = 0.
    Zero,
}

impl DecorationRule {
    pub fn label(&self) -> &'static str {
        match self {
            Self::PositiveReal => "i",
            Self::NegativeReal => "ii",
            Self::ImaginaryUpper => "iii",
            Self::ImaginaryLower => "iii'",
            Self::Zero => "iv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decoration {
    pub eps: Vec<i8>,
    pub rules: Vec<DecorationRule>,
    /// Punctures that are geodesic boundaries for both metrics.
    pub both_hyperbolic: usize,
    /// `2^n` sign choices at fixed lengths.
    pub sign_choices: u128,
}

pub fn decoration_rule(r: Complex64) -> DecorationRule {
    if r.re > 0.0 {
        DecorationRule::PositiveReal
    } else if r.re < 0.0 {
        DecorationRule::NegativeReal
    } else if r.im > 0.0 {
        DecorationRule::ImaginaryUpper
    } else if r.im < 0.0 {
        DecorationRule::ImaginaryLower
    } else {
        DecorationRule::Zero
    }
}

pub fn decoration_of(residues: &[Complex64]) -> Decoration {
    let rules: Vec<DecorationRule> = residues.iter().map(|&r| decoration_rule(r)).collect();
    let eps: Vec<i8> = rules
        .iter()
        .map(|r| match r {
            DecorationRule::PositiveReal => 1,
            DecorationRule::NegativeReal => -1,
            _ => 0,
        })
        .collect();
    let n = eps.iter().filter(|e| **e != 0).count();
    Decoration { eps, rules, both_hyperbolic: n, sign_choices: 1u128.checked_shl(n as u32).unwrap_or(0) }
}

/// `|(ℓ_l+ℓ_r)/(4π) − λ₁| + ||ℓ_l−ℓ_r|/(4π) − λ₂|`.
pub fn length_lambda_consistency(r: Complex64) -> f64 {
    let (ll, lr) = boundary_lengths(r);
    let [l1, l2, _, _] = char_poly_eigen(r);
    let k = 4.0 * PI;
    ((ll + lr) / k - l1).abs() + ((ll - lr).abs() / k - l2).abs()
}
