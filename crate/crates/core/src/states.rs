//! Qubit states, symmetric ensembles and their Bloch-sphere picture.
//!
//! A symmetric ensemble is generated from the fiducial state
//! `cos θ|0⟩ + e^{iφ} sin θ|1⟩` by repeated application of
//! `V = diag(1, ω)`, `ω = exp(2πi/N)`. Every constructed pure state keeps a real,
//! non-negative amplitude on `|0⟩` so that equality checks and phase extraction
//! are deterministic.

use std::f64::consts::{FRAC_PI_4, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{FrioError, Result};
use crate::linalg::{self, c, phasor, real, Mat2, Vec2, C64, ONE, ZERO};

/// Largest ensemble size accepted by the public constructors.
pub const MAX_STATES: usize = 64;

/// Slack allowed on angle bounds that come out of degree conversions.
pub(crate) const ANGLE_SLACK: f64 = 1e-12;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;

/// Validate the polar half-angle range `[0, π/4]`, snapping values within
/// [`ANGLE_SLACK`] of an endpoint onto it.
pub(crate) fn check_half_angle(name: &str, theta: f64) -> Result<f64> {
    if !(-ANGLE_SLACK..=FRAC_PI_4 + ANGLE_SLACK).contains(&theta) {
        return Err(FrioError::domain(format!(
            "{name} = {theta} rad lies outside [0, π/4]"
        )));
    }
    Ok(theta.clamp(0.0, FRAC_PI_4))
}

pub(crate) fn check_state_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(FrioError::domain(format!("need at least 2 states, got {n}")));
    }
    if n > MAX_STATES {
        return Err(FrioError::domain(format!(
            "at most {MAX_STATES} states are supported, got {n}"
        )));
    }
    Ok(())
}

/// `ω^k = exp(2πik/n)`.
pub fn root_of_unity(n: usize, k: i64) -> C64 {
    phasor(TAU * (k.rem_euclid(n as i64) as f64) / n as f64)
}

/// A normalized pure qubit state `amp0|0⟩ + amp1|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQubit {
    amp0: C64,
    amp1: C64,
}

impl PureQubit {
    pub fn new(amp0: C64, amp1: C64) -> Result<Self> {
        let norm = amp0.norm_sqr() + amp1.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(FrioError::domain(format!(
                "state is not normalized: |amp0|²+|amp1|² = {norm}"
            )));
        }
        Ok(Self { amp0, amp1 })
    }

    /// Normalize and rotate the global phase so that `amp0` is real and non-negative.
    pub fn canonical(amp0: C64, amp1: C64) -> Result<Self> {
        let norm = (amp0.norm_sqr() + amp1.norm_sqr()).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(FrioError::domain("cannot normalize a zero vector"));
        }
        let phase = if amp0.norm() > 0.0 {
            amp0.conj() / amp0.norm()
        } else if amp1.norm() > 0.0 {
            amp1.conj() / amp1.norm()
        } else {
            ONE
        };
        Ok(Self {
            amp0: amp0 * phase / norm,
            amp1: amp1 * phase / norm,
        })
    }

    pub const fn zero() -> Self {
        Self { amp0: ONE, amp1: ZERO }
    }

    pub const fn one() -> Self {
        Self { amp0: ZERO, amp1: ONE }
    }

    pub fn amp0(&self) -> C64 {
        self.amp0
    }

    pub fn amp1(&self) -> C64 {
        self.amp1
    }

    pub fn as_vector(&self) -> Vec2 {
        Vec2::new(self.amp0, self.amp1)
    }

    /// Relative phase `arg(amp1) − arg(amp0)`, in `(−π, π]`.
    pub fn relative_phase(&self) -> f64 {
        (self.amp1 * self.amp0.conj()).arg()
    }

    /// Apply `diag(1, e^{iα})`.
    pub fn rotate_z(&self, alpha: f64) -> Self {
        Self {
            amp0: self.amp0,
            amp1: self.amp1 * phasor(alpha),
        }
    }
}

/// `⟨a|b⟩`
pub fn overlap(a: &PureQubit, b: &PureQubit) -> C64 {
    a.amp0.conj() * b.amp0 + a.amp1.conj() * b.amp1
}

/// A 2×2 density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensity {
    m: Mat2,
}

impl QubitDensity {
    pub fn new(m: Mat2) -> Result<Self> {
        let herm = linalg::hermiticity_defect(&m);
        if herm > HERMITIAN_TOL {
            return Err(FrioError::domain(format!("matrix is not Hermitian (defect {herm:e})")));
        }
        let tr = linalg::trace(&m);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(FrioError::domain(format!("trace is {tr}, expected 1")));
        }
        let [lo, _] = linalg::hermitian_eigenvalues(&m);
        if lo < -EIGEN_TOL {
            return Err(FrioError::domain(format!(
                "matrix has negative eigenvalue {lo:e}"
            )));
        }
        Ok(Self { m })
    }

    pub fn maximally_mixed() -> Self {
        Self {
            m: Mat2::identity() * real(0.5),
        }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    pub fn rho00(&self) -> f64 {
        self.m[(0, 0)].re
    }

    pub fn rho11(&self) -> f64 {
        self.m[(1, 1)].re
    }

    /// Lower off-diagonal element `⟨1|ρ|0⟩`.
    pub fn rho10(&self) -> C64 {
        self.m[(1, 0)]
    }

    pub fn purity(&self) -> f64 {
        linalg::trace(&(self.m * self.m)).re
    }

    /// Fringe visibility of the path-mode interference, `2|ρ₀₁|`.
    pub fn visibility(&self) -> f64 {
        2.0 * self.m[(1, 0)].norm()
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        linalg::hermitian_eigenvalues(&self.m)
    }
}

impl From<&PureQubit> for QubitDensity {
    fn from(s: &PureQubit) -> Self {
        to_density(s)
    }
}

/// `|ψ⟩⟨ψ|`
pub fn to_density(s: &PureQubit) -> QubitDensity {
    QubitDensity {
        m: linalg::projector(&s.as_vector()),
    }
}

/// Point in (or on) the Bloch ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochPoint {
    pub fn radius(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Distance from the z axis.
    pub fn transverse_radius(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Azimuth in `[0, 2π)`.
    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x).rem_euclid(TAU)
    }

    /// `(I + r·σ)/2`
    pub fn to_density(&self) -> Result<QubitDensity> {
        if self.radius() > 1.0 + 1e-10 {
            return Err(FrioError::domain(format!(
                "Bloch radius {} exceeds 1",
                self.radius()
            )));
        }
        let m = Mat2::new(
            real(0.5 * (1.0 + self.z)),
            c(0.5 * self.x, -0.5 * self.y),
            c(0.5 * self.x, 0.5 * self.y),
            real(0.5 * (1.0 - self.z)),
        );
        QubitDensity::new(m)
    }
}

/// Pauli expectation values `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)`.
pub fn bloch(rho: &QubitDensity) -> BlochPoint {
    let r10 = rho.rho10();
    BlochPoint {
        x: 2.0 * r10.re,
        y: 2.0 * r10.im,
        z: rho.rho00() - rho.rho11(),
    }
}

/// `cos θ|0⟩ + e^{iφ} sin θ|1⟩`
pub fn fiducial_state(theta: f64, phi: f64) -> Result<PureQubit> {
    let theta = check_half_angle("theta", theta)?;
    if !phi.is_finite() || !(0.0..TAU).contains(&phi) {
        return Err(FrioError::domain(format!("phi = {phi} rad lies outside [0, 2π)")));
    }
    Ok(PureQubit {
        amp0: real(theta.cos()),
        amp1: phasor(phi) * theta.sin(),
    })
}

/// `N` equiprobable states `V^j |α₀⟩` on a parallel of the Bloch sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEnsemble {
    n: usize,
    theta: f64,
    phi: f64,
    states: Vec<PureQubit>,
}

impl SymmetricEnsemble {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn states(&self) -> &[PureQubit] {
        &self.states
    }

    pub fn state(&self, j: usize) -> Result<&PureQubit> {
        self.states
            .get(j)
            .ok_or(FrioError::IndexOutOfRange { index: j, n: self.n })
    }

    /// Prior probability of each state; always uniform.
    pub fn prior(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn omega(&self) -> C64 {
        root_of_unity(self.n, 1)
    }

    /// The generator `V = diag(1, ω)`.
    pub fn shift_operator(&self) -> Mat2 {
        Mat2::new(ONE, ZERO, ZERO, self.omega())
    }

    /// Ensemble average `Σ_j η_j |α_j⟩⟨α_j|`.
    pub fn average_density(&self) -> Mat2 {
        let eta = real(self.prior());
        self.states
            .iter()
            .map(|s| linalg::projector(&s.as_vector()) * eta)
            .fold(Mat2::zeros(), |acc, m| acc + m)
    }
}

pub fn symmetric_ensemble(n: usize, theta: f64, phi: f64) -> Result<SymmetricEnsemble> {
    check_state_count(n)?;
    let fiducial = fiducial_state(theta, phi)?;
    let states = (0..n)
        .map(|j| PureQubit {
            amp0: fiducial.amp0,
            amp1: fiducial.amp1 * root_of_unity(n, j as i64),
        })
        .collect();
    Ok(SymmetricEnsemble {
        n,
        theta: check_half_angle("theta", theta)?,
        phi,
        states,
    })
}

/// The maximally distinguishable symmetric states `(|0⟩ + ω^j|1⟩)/√2`.
pub fn uniform_states(n: usize) -> Result<Vec<PureQubit>> {
    check_state_count(n)?;
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    Ok((0..n)
        .map(|j| PureQubit {
            amp0: real(amp),
            amp1: root_of_unity(n, j as i64) * amp,
        })
        .collect())
}

/// `cos θ'|0⟩ + ω^j sin θ'|1⟩`, the target of state separation.
pub fn separated_state(n: usize, j: usize, theta_out: f64) -> Result<PureQubit> {
    check_state_count(n)?;
    if j >= n {
        return Err(FrioError::IndexOutOfRange { index: j, n });
    }
    let theta_out = check_half_angle("theta_out", theta_out)?;
    Ok(PureQubit {
        amp0: real(theta_out.cos()),
        amp1: root_of_unity(n, j as i64) * theta_out.sin(),
    })
}
