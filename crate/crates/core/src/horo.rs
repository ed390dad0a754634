//! The horospherical maximal surface: constant `q = dω²`, `φ ≡ 0`, with frame
//! `F₀(ω) = A₀ exp(U₀ω + V₀ω̄)` and embedding `σ₀` the last column of `F₀`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::sync::OnceLock;

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::adscore::{wrap_angle, AdsError, NullDirection, SpacetimePoint};
use crate::frame::{CMat4, FrameState};

/// Largest `|Re ω|` or `|Im ω|` accepted before `cosh(2·)` overflows.
pub const OVERFLOW_LIMIT: f64 = 350.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoroError {
    #[error("|Re ω| or |Im ω| exceeds {OVERFLOW_LIMIT} (ω = {0})")]
    Overflow(Complex64),
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn real_mat(rows: [[f64; 4]; 4]) -> CMat4 {
    Matrix4::from_fn(|i, j| c(rows[i][j]))
}

#[derive(Debug, Clone)]
pub struct HoroConstants {
    pub a0: CMat4,
    pub u0: CMat4,
    pub v0: CMat4,
    pub s: CMat4,
    pub s_inv: CMat4,
}

pub fn u0() -> CMat4 {
    real_mat([[0., 0., 0., 1.], [0., 0., 1., 0.], [1., 0., 0., 0.], [0., 1., 0., 0.]])
}

pub fn v0() -> CMat4 {
    real_mat([[0., 0., 1., 0.], [0., 0., 0., 1.], [0., 1., 0., 0.], [1., 0., 0., 0.]])
}

/// Initial frame: `v₁, v₂` mix the first two coordinates, `σ(0) = (0,0,1,1)/√2`.
pub fn a0() -> CMat4 {
    let i = Complex64::i();
    let o = c(0.0);
    let one = c(1.0);
    Matrix4::new(one, one, o, o, -i, i, o, o, o, o, one, one, o, o, -one, one) * c(FRAC_1_SQRT_2)
}

/// Shared constants, with the diagonaliser computed on first use.
pub fn constants() -> &'static HoroConstants {
    static CELL: OnceLock<HoroConstants> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = compute_diagonalizer();
        HoroConstants { a0: a0(), u0: u0(), v0: v0(), s, s_inv: s.adjoint() }
    })
}

/// Simultaneous eigenbasis of the commuting hermitian pair `U₀+V₀`,
/// `i(U₀−V₀)`, ordered so that `S⁻¹(U₀ω+V₀ω̄)S = diag(2Re ω, 2Im ω, −2Re ω, −2Im ω)`.
pub fn compute_diagonalizer() -> CMat4 {
    let (u, v) = (u0(), v0());
    let h1 = u + v;
    let h2 = (u - v) * Complex64::i();
    // a generic combination separates the double eigenvalue 0 of h1
    let mix = 1.0 / 3f64.sqrt();
    let eig = SymmetricEigen::new(h1 + h2 * c(mix));
    let targets = [2.0, 2.0 * mix, -2.0, -2.0 * mix];
    let mut s = CMat4::zeros();
    for (col, &t) in targets.iter().enumerate() {
        let k = (0..4)
            .min_by(|&a, &b| (eig.eigenvalues[a] - t).abs().total_cmp(&(eig.eigenvalues[b] - t).abs()))
            .expect("four eigenvalues");
        let mut v = eig.eigenvectors.column(k).into_owned();
        let norm = v.norm();
        v /= c(norm);
        let pivot = (0..4)
            .find(|&r| v[r].norm() > 0.5 * v.iter().fold(0.0f64, |m, z| m.max(z.norm())))
            .expect("non-zero eigenvector");
        let phase = v[pivot] / v[pivot].norm();
        v /= phase;
        s.set_column(col, &v);
    }
    s
}

fn check_overflow(omega: Complex64) -> Result<(), HoroError> {
    if omega.re.abs() > OVERFLOW_LIMIT || omega.im.abs() > OVERFLOW_LIMIT || !omega.is_finite() {
        return Err(HoroError::Overflow(omega));
    }
    Ok(())
}

pub fn sigma0(omega: Complex64) -> Result<SpacetimePoint, HoroError> {
    check_overflow(omega)?;
    let (a, b) = (2.0 * omega.re, 2.0 * omega.im);
    let k = FRAC_1_SQRT_2;
    Ok(SpacetimePoint::new(k * a.sinh(), k * b.sinh(), k * a.cosh(), k * b.cosh()))
}

pub fn frame0(omega: Complex64) -> Result<FrameState, HoroError> {
    check_overflow(omega)?;
    let k = constants();
    let (a, b) = (2.0 * omega.re, 2.0 * omega.im);
    let d = Matrix4::from_diagonal(&nalgebra::Vector4::new(c(a.exp()), c(b.exp()), c((-a).exp()), c((-b).exp())));
    Ok(FrameState::new(k.a0 * k.s * d * k.s_inv, omega))
}

/// The four vertices of the limiting light-like quadrilateral, in the order
/// of the sectors centred at `θ = 0, π/2, π, 3π/2`.
pub const SAWTOOTH_VERTICES: [[f64; 4]; 4] = [
    [1.0, 0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, 1.0],
    [-1.0, 0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0, 1.0],
];

/// Light-like segment `from + s·to`, `s ∈ (0, ∞)`, joining two consecutive vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawtoothEdge {
    pub from: [f64; 4],
    pub to: [f64; 4],
}

impl SawtoothEdge {
    pub fn point(&self, s: f64) -> Result<NullDirection, AdsError> {
        NullDirection::new(std::array::from_fn(|k| self.from[k] + s * self.to[k]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayLimit {
    Vertex(NullDirection),
    Edge(SawtoothEdge),
}

/// Angular tolerance for classifying a direction as diagonal.
pub const DIAGONAL_TOL: f64 = 1e-12;

/// Projective limit of `σ₀(t e^{iθ})` as `t → ∞`. Diagonal directions return
/// the whole light-like edge; the exact diagonal ray itself tends to `s = 1`.
pub fn ray_limit(theta: f64) -> RayLimit {
    let q = wrap_angle(theta) / FRAC_PI_2;
    let frac = q - q.floor();
    if (frac - 0.5).abs() * FRAC_PI_2 < DIAGONAL_TOL {
        let k = q.floor() as usize % 4;
        RayLimit::Edge(SawtoothEdge { from: SAWTOOTH_VERTICES[k], to: SAWTOOTH_VERTICES[(k + 1) % 4] })
    } else {
        let k = q.round() as usize % 4;
        RayLimit::Vertex(NullDirection::new(SAWTOOTH_VERTICES[k]).expect("table vertices are null"))
    }
}

/// Divides by the largest coordinate magnitude.
pub fn normalize_projective(x: [f64; 4]) -> [f64; 4] {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.map(|v| v / m)
}

/// Overflow-safe `σ₀(t e^{iθ})` divided by its largest coordinate.
pub fn sigma0_projective(t: f64, theta: f64) -> [f64; 4] {
    let (a, b) = (2.0 * t * theta.cos(), 2.0 * t * theta.sin());
    let m = a.abs().max(b.abs());
    // sinh(a)/e^m and cosh(a)/e^m without forming e^m
    let sh = |v: f64| 0.5 * ((v - m).exp() - (-v - m).exp());
    let ch = |v: f64| 0.5 * ((v - m).exp() + (-v - m).exp());
    normalize_projective([sh(a), sh(b), ch(a), ch(b)])
}

/// Distance from the sampled directions to the diagonals, used to keep
/// finite-`t` samples inside the convergence region.
pub fn diagonal_gap(theta: f64) -> f64 {
    let q = wrap_angle(theta - FRAC_PI_4) / FRAC_PI_2;
    (q - q.round()).abs() * FRAC_PI_2
}

/// Isometry relating a unit model `q = −R dw²`, `g = |R||dw|²` to the
/// horospherical surface: with `ξ = √(−R)` (principal branch),
/// `σ(w) = M σ₀(ξ (w − w_b))` when the frame starts at `A₀` at `w_b`.
#[derive(Debug, Clone, Copy)]
pub struct UnitModelMap {
    pub xi: Complex64,
    pub m: Matrix4<f64>,
}

impl UnitModelMap {
    pub fn new(residue: Complex64) -> Option<Self> {
        if residue == c(0.0) {
            return None;
        }
        let xi = Complex64::new(-residue.re, -residue.im + 0.0).sqrt();
        let ph = xi / xi.norm();
        let k = constants();
        let d = Matrix4::from_diagonal(&nalgebra::Vector4::new(ph.conj(), ph, c(1.0), c(1.0)));
        // A₀ is also unitary for the standard product
        let m = k.a0 * d * k.a0.adjoint();
        Some(Self { xi, m: m.map(|z| z.re) })
    }

    /// Horospherical parameter of the point `w`.
    pub fn omega(&self, w: Complex64, basepoint: Complex64) -> Complex64 {
        self.xi * (w - basepoint)
    }

    /// Direction in the ω-plane of the ray leaving the base point at angle `iota`.
    pub fn omega_direction(&self, iota: f64) -> f64 {
        wrap_angle(iota + self.xi.arg())
    }

    pub fn sigma(&self, w: Complex64, basepoint: Complex64) -> Result<SpacetimePoint, HoroError> {
        let s = sigma0(self.omega(w, basepoint))?;
        let v = self.m * nalgebra::Vector4::from(s.x);
        Ok(SpacetimePoint { x: [v[0], v[1], v[2], v[3]] })
    }

    /// Limit on the boundary of the ray from the base point in direction `iota`.
    pub fn ray_limit(&self, iota: f64) -> RayLimit {
        let apply = |x: [f64; 4]| {
            let v = self.m * nalgebra::Vector4::from(x);
            [v[0], v[1], v[2], v[3]]
        };
        match ray_limit(self.omega_direction(iota)) {
            RayLimit::Vertex(n) => RayLimit::Vertex(NullDirection::new(apply(n.coords())).expect("isometry keeps nullity")),
            RayLimit::Edge(e) => RayLimit::Edge(SawtoothEdge { from: apply(e.from), to: apply(e.to) }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adscore::{gram, null_to_torus, TorusPoint};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cmax(m: &CMat4) -> f64 {
        m.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    fn g() -> CMat4 {
        gram().map(c)
    }

    #[test]
    fn diagonalizer_is_unitary_and_ordered() {
        let k = constants();
        assert!(cmax(&(k.s.adjoint() * k.s - CMat4::identity())) <= 1e-13);
        let d1 = k.s_inv * (k.u0 + k.v0) * k.s;
        let d2 = k.s_inv * (k.u0 * Complex64::i() + k.v0 * (-Complex64::i())) * k.s;
        let e1 = CMat4::from_diagonal(&nalgebra::Vector4::new(c(2.0), c(0.0), c(-2.0), c(0.0)));
        let e2 = CMat4::from_diagonal(&nalgebra::Vector4::new(c(0.0), c(2.0), c(0.0), c(-2.0)));
        assert!(cmax(&(d1 - e1)) < 1e-12);
        assert!(cmax(&(d2 - e2)) < 1e-12);
        assert_eq!(compute_diagonalizer(), k.s);
    }

    #[test]
    fn a0_is_g_unitary() {
        let a = a0();
        assert!(cmax(&(a.adjoint() * g() * a - g())) < 1e-15);
    }

    #[test]
    fn sigma0_examples() {
        let s = sigma0(c(0.0)).unwrap();
        assert_eq!(s.x, [0.0, 0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        assert_abs_diff_eq!(s.norm_sq(), -1.0, epsilon = 1e-15);
        let s = sigma0(c(1.0)).unwrap();
        let k = FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.x[0], k * 2f64.sinh(), epsilon = 1e-15);
        assert_eq!(s.x[1], 0.0);
        assert_abs_diff_eq!(s.x[2], k * 2f64.cosh(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.x[3], k, epsilon = 1e-15);
        assert!(sigma0(Complex64::new(0.0, 351.0)).is_err());
        assert!(frame0(Complex64::new(-400.0, 0.0)).is_err());
    }

    #[test]
    fn frame0_examples() {
        let f = frame0(c(0.0)).unwrap();
        assert!(cmax(&(f.f - a0())) < 1e-15);
        for &w in &[c(1.0), Complex64::new(-0.7, 2.2), Complex64::new(2.0, -2.0)] {
            let f = frame0(w).unwrap();
            let s = sigma0(w).unwrap();
            let scale = cmax(&f.f).max(1.0);
            for r in 0..4 {
                assert!((f.f[(r, 3)] - c(s.x[r])).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn frame0_solves_the_flat_system() {
        // dF/dx = F(U₀+V₀), dF/dy = F·i(U₀−V₀)
        let k = constants();
        let w = Complex64::new(0.4, -0.3);
        let h = 1e-5;
        let f = frame0(w).unwrap().f;
        let dx = (frame0(w + c(h)).unwrap().f - frame0(w - c(h)).unwrap().f) / c(2.0 * h);
        let dy = (frame0(w + Complex64::new(0.0, h)).unwrap().f - frame0(w - Complex64::new(0.0, h)).unwrap().f)
            / c(2.0 * h);
        assert!(cmax(&(dx - f * (k.u0 + k.v0))) < 1e-6);
        assert!(cmax(&(dy - f * (k.u0 - k.v0) * Complex64::i())) < 1e-6);
    }

    #[test]
    fn frame0_columns_orthonormal() {
        for &w in &[c(0.3), Complex64::new(-1.0, 0.5), Complex64::new(0.1, 1.5)] {
            let f = frame0(w).unwrap().f;
            let d = f.adjoint() * g() * f - g();
            assert!(cmax(&d) <= 1e-12 * cmax(&f).powi(2).max(1.0));
        }
    }

    #[test]
    fn ray_limit_examples() {
        let v = |x: [f64; 4]| RayLimit::Vertex(NullDirection::new(x).unwrap());
        assert_eq!(ray_limit(0.0), v([1.0, 0.0, 1.0, 0.0]));
        assert_eq!(ray_limit(PI / 2.0), v([0.0, 1.0, 0.0, 1.0]));
        assert_eq!(ray_limit(PI), v([-1.0, 0.0, 1.0, 0.0]));
        assert_eq!(ray_limit(3.0 * PI / 2.0), v([0.0, -1.0, 0.0, 1.0]));
        match ray_limit(PI / 4.0) {
            RayLimit::Edge(e) => {
                let p = e.point(0.5).unwrap();
                assert_eq!(p.coords(), [1.0, 0.5, 1.0, 0.5]);
            }
            other => panic!("{other:?}"),
        }
        match ray_limit(7.0 * PI / 4.0) {
            RayLimit::Edge(e) => assert_eq!(e.point(2.0).unwrap().coords(), [2.0, -1.0, 2.0, 1.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diagonal_ray_tends_to_edge_midpoint() {
        for k in 0..4 {
            let theta = PI / 4.0 + k as f64 * PI / 2.0;
            let RayLimit::Edge(e) = ray_limit(theta) else { panic!() };
            let want = null_to_torus(&e.point(1.0).unwrap()).unwrap();
            let got = SpacetimePoint { x: sigma0_projective(20.0, theta) }.torus_shadow().unwrap();
            assert!(got.distance(&want) < 1e-12);
        }
    }

    #[test]
    fn vertices_are_null_and_joined_by_light_like_edges() {
        let pts: Vec<TorusPoint> = SAWTOOTH_VERTICES
            .iter()
            .map(|x| null_to_torus(&NullDirection::new(*x).unwrap()).unwrap())
            .collect();
        for k in 0..4 {
            let (a, b) = (pts[k].null_coordinates(), pts[(k + 1) % 4].null_coordinates());
            assert!(
                crate::adscore::circle_distance(a.0, b.0) < 1e-12 || crate::adscore::circle_distance(a.1, b.1) < 1e-12
            );
            let RayLimit::Edge(e) = ray_limit(PI / 4.0 + k as f64 * PI / 2.0) else { panic!() };
            for s in [0.1, 1.0, 7.0] {
                let t = null_to_torus(&e.point(s).unwrap()).unwrap().null_coordinates();
                assert!(crate::adscore::circle_distance(t.0, a.0) < 1e-12 || crate::adscore::circle_distance(t.1, a.1) < 1e-12);
            }
        }
    }

    #[test]
    fn unit_model_map_is_an_isometry() {
        for r in [c(1.0), Complex64::new(3.0, 4.0), Complex64::new(-2.0, 1.0), Complex64::i()] {
            let map = UnitModelMap::new(r).unwrap();
            assert!(crate::adscore::so22_defect(&map.m) < 1e-14);
        }
        assert!(UnitModelMap::new(c(0.0)).is_none());
    }

    #[test]
    fn unit_model_r1_sees_three_vertices() {
        let map = UnitModelMap::new(c(1.0)).unwrap();
        let mut seen: Vec<[f64; 4]> = Vec::new();
        for k in 1..40 {
            let iota = PI * k as f64 / 40.0;
            if let RayLimit::Vertex(v) = map.ray_limit(iota) {
                let x = v.coords().map(|c| (c * 1e9).round() / 1e9);
                if !seen.contains(&x) {
                    seen.push(x);
                }
            }
        }
        // θ = ι + π/2 sweeps (π/2, 3π/2): table vertices 1, 2, 3 moved by M
        let mut want: Vec<[f64; 4]> = (1..4)
            .map(|k| {
                let v = map.m * nalgebra::Vector4::from(SAWTOOTH_VERTICES[k]);
                NullDirection::new([v[0], v[1], v[2], v[3]]).unwrap().coords().map(|c| (c * 1e9).round() / 1e9)
            })
            .collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen.len(), 3);
        for (a, b) in seen.iter().zip(&want) {
            for k in 0..4 {
                assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-9);
            }
        }
        // consecutive vertices span light-like segments
        let ip = |a: &[f64; 4], b: &[f64; 4]| crate::adscore::minkowski_inner(a, b);
        let zero_pairs = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).filter(|&(i, j)| ip(&seen[i], &seen[j]).abs() < 1e-12).count();
        assert_eq!(zero_pairs, 2);
    }

    proptest! {
        #[test]
        fn diagonalization_identity(re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let k = constants();
            let w = Complex64::new(re, im);
            let d = k.s_inv * (k.u0 * w + k.v0 * w.conj()) * k.s;
            let e = CMat4::from_diagonal(&nalgebra::Vector4::new(c(2.0 * re), c(2.0 * im), c(-2.0 * re), c(-2.0 * im)));
            prop_assert!(cmax(&(d - e)) < 1e-12);
        }

        #[test]
        fn sigma0_on_quadric(re in -50.0f64..50.0, im in -50.0f64..50.0) {
            let s = sigma0(Complex64::new(re, im)).unwrap();
            prop_assert!(s.relative_quadric_defect() < 1e-14);
        }
    }
}
