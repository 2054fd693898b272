//! Small dense complex linear algebra for qubit operators.
//!
//! Everything here works on 2×2 (and occasionally 4×4) complex matrices, so
//! the Hermitian eigenproblem is solved in closed form instead of iteratively.

use nalgebra::{Matrix2, Matrix4, Vector2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;
pub type Vec2 = Vector2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `exp(i·phase)`
#[inline]
pub fn phasor(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

pub fn identity2() -> Mat2 {
    Mat2::identity()
}

/// `|a⟩⟨b|`
pub fn outer(a: &Vec2, b: &Vec2) -> Mat2 {
    a * b.adjoint()
}

/// `|v⟩⟨v|`
pub fn projector(v: &Vec2) -> Mat2 {
    outer(v, v)
}

pub fn trace(m: &Mat2) -> C64 {
    m[(0, 0)] + m[(1, 1)]
}

/// Largest absolute entry of `m - m†`.
pub fn hermiticity_defect(m: &Mat2) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues (ascending) of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &Mat2) -> [f64; 2] {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    let mean = 0.5 * (a + d);
    let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mean - half_gap, mean + half_gap]
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm(m: &Mat2) -> f64 {
    let [lo, hi] = hermitian_eigenvalues(m);
    lo.abs().max(hi.abs())
}

/// Hermitian eigendecomposition: eigenvalues ascending, eigenvectors as columns.
pub fn hermitian_eigen(m: &Mat2) -> ([f64; 2], Mat2) {
    let vals = hermitian_eigenvalues(m);
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    if b.norm() <= 1e-300 {
        // Already diagonal: order the basis vectors to match ascending eigenvalues.
        return if a <= d {
            (vals, identity2())
        } else {
            (vals, Mat2::new(ZERO, ONE, ONE, ZERO))
        };
    }
    let vec_for = |lambda: f64| {
        // (a - λ) x + b y = 0  =>  (x, y) ∝ (b, λ - a)
        let v = Vec2::new(b, real(lambda - a));
        v / real(v.norm())
    };
    let v0 = vec_for(vals[0]);
    let v1 = vec_for(vals[1]);
    (vals, Mat2::from_columns(&[v0, v1]))
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn psd_sqrt(m: &Mat2) -> Mat2 {
    let (vals, vecs) = hermitian_eigen(m);
    let s = Mat2::from_diagonal(&Vec2::new(
        real(vals[0].max(0.0).sqrt()),
        real(vals[1].max(0.0).sqrt()),
    ));
    vecs * s * vecs.adjoint()
}

/// Trace distance `½‖a − b‖₁` between two Hermitian matrices.
pub fn trace_distance(a: &Mat2, b: &Mat2) -> f64 {
    let [lo, hi] = hermitian_eigenvalues(&(a - b));
    0.5 * (lo.abs() + hi.abs())
}

/// `Tr(ρ Π)` for Hermitian arguments, real part only.
pub fn expectation(rho: &Mat2, op: &Mat2) -> f64 {
    trace(&(rho * op)).re
}

/// Largest absolute entry of a matrix.
pub fn max_abs(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs4(m: &Mat4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal_and_offdiagonal() {
        let m = Mat2::new(real(0.3), ZERO, ZERO, real(-0.1));
        let (vals, vecs) = hermitian_eigen(&m);
        assert!((vals[0] + 0.1).abs() < 1e-15 && (vals[1] - 0.3).abs() < 1e-15);
        let recon = vecs * Mat2::from_diagonal(&Vec2::new(real(vals[0]), real(vals[1]))) * vecs.adjoint();
        assert!(max_abs(&(recon - m)) < 1e-15);

        let m = Mat2::new(real(0.7), c(0.2, -0.1), c(0.2, 0.1), real(0.3));
        let (vals, vecs) = hermitian_eigen(&m);
        let recon = vecs * Mat2::from_diagonal(&Vec2::new(real(vals[0]), real(vals[1]))) * vecs.adjoint();
        assert!(max_abs(&(recon - m)) < 1e-14);
        assert!((vals[0] + vals[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = Mat2::new(real(0.6), c(0.1, 0.2), c(0.1, -0.2), real(0.4));
        let s = psd_sqrt(&m);
        assert!(max_abs(&(s * s - m)) < 1e-14);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let a = projector(&Vec2::new(ONE, ZERO));
        let b = projector(&Vec2::new(ZERO, ONE));
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-15);
    }
}
