//! Optimal probabilistic separation of symmetric qubit states.
//!
//! The system qubit is coupled to an ancilla prepared in `|v⟩` by a controlled
//! rotation that acts only on the `|0⟩` system component. Projecting the ancilla
//! onto `|v⟩` leaves the separated state `cos θ'|0⟩ + ω^j sin θ'|1⟩`; projecting
//! onto `|h⟩` leaves `|0⟩` for every input.
//!
//! Joint vectors use the ordered basis `{|0,h⟩, |0,v⟩, |1,h⟩, |1,v⟩}`.

use nalgebra::Vector4;

use crate::error::{FrioError, Result};
use crate::linalg::{phasor, real, Mat2, Mat4, C64, ZERO};
use crate::states::{self, check_half_angle, PureQubit, SymmetricEnsemble};

/// Index helpers for the system ⊗ ancilla basis.
pub(crate) const IDX_0H: usize = 0;
pub(crate) const IDX_0V: usize = 1;
pub(crate) const IDX_1H: usize = 2;
pub(crate) const IDX_1V: usize = 3;

pub type JointVector = Vector4<C64>;

/// Parameters of the separation map `|α_j(θ)⟩ → |β_j(θ')⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationMap {
    theta_in: f64,
    theta_out: f64,
    phi: f64,
    xi: f64,
    tau: f64,
}

impl SeparationMap {
    pub fn new(theta_in: f64, theta_out: f64, phi: f64) -> Result<Self> {
        let (theta_in, theta_out) = check_ordering(theta_in, theta_out)?;
        if !phi.is_finite() {
            return Err(FrioError::domain("phi must be finite"));
        }
        let xi = if theta_out == theta_in {
            1.0
        } else {
            (theta_in.tan() / theta_out.tan()).clamp(0.0, 1.0)
        };
        let tau = (1.0 - xi * xi).max(0.0).sqrt();
        Ok(Self {
            theta_in,
            theta_out,
            phi,
            xi,
            tau,
        })
    }

    /// Map for a given ensemble, removing the ensemble's fiducial phase.
    pub fn for_ensemble(ensemble: &SymmetricEnsemble, theta_out: f64) -> Result<Self> {
        Self::new(ensemble.theta(), theta_out, ensemble.phi())
    }

    pub fn theta_in(&self) -> f64 {
        self.theta_in
    }

    pub fn theta_out(&self) -> f64 {
        self.theta_out
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `tan θ · cot θ'`
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// `√(1 − ξ²)`
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn p_success(&self) -> f64 {
        success_probability_unchecked(self.theta_in, self.theta_out)
    }

    pub fn p_failure(&self) -> f64 {
        1.0 - self.p_success()
    }

    /// System operator `⟨v|U|v⟩ = diag(e^{iφ} ξ, 1)`.
    pub fn success_operator(&self) -> Mat2 {
        Mat2::new(phasor(self.phi) * self.xi, ZERO, ZERO, real(1.0))
    }

    /// System operator `⟨h|U|v⟩ = diag(e^{iφ} τ, 0)`.
    pub fn failure_operator(&self) -> Mat2 {
        Mat2::new(phasor(self.phi) * self.tau, ZERO, ZERO, ZERO)
    }
}

fn check_ordering(theta_in: f64, theta_out: f64) -> Result<(f64, f64)> {
    let theta_in = check_half_angle("theta", theta_in)?;
    let theta_out = check_half_angle("theta_out", theta_out)?;
    if theta_out < theta_in - states::ANGLE_SLACK {
        return Err(FrioError::domain(format!(
            "theta_out = {theta_out} rad is smaller than theta = {theta_in} rad"
        )));
    }
    let theta_out = theta_out.max(theta_in);
    if theta_in == 0.0 && theta_out > 0.0 {
        return Err(FrioError::domain(
            "theta = 0 describes identical inputs; separation is undefined",
        ));
    }
    Ok((theta_in, theta_out))
}

fn success_probability_unchecked(theta: f64, theta_out: f64) -> f64 {
    if theta_out == theta {
        1.0
    } else {
        (theta.sin() / theta_out.sin()).powi(2)
    }
}

/// Maximal success probability `(sin θ / sin θ')²`.
pub fn success_probability(theta: f64, theta_out: f64) -> Result<f64> {
    let (theta, theta_out) = check_ordering(theta, theta_out)?;
    Ok(success_probability_unchecked(theta, theta_out))
}

/// The 4×4 system–ancilla coupling unitary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingUnitary {
    pub u: Mat4,
}

impl CouplingUnitary {
    pub fn apply(&self, v: &JointVector) -> JointVector {
        self.u * v
    }

    /// Largest entry of `U†U − I`.
    pub fn unitarity_defect(&self) -> f64 {
        crate::linalg::max_abs4(&(self.u.adjoint() * self.u - Mat4::identity()))
    }
}

pub fn coupling_unitary(map: &SeparationMap) -> CouplingUnitary {
    coupling_with_rotation(map.xi, map.phi)
}

/// Coupling whose `|0⟩` block rotates the ancilla with `⟨v|R|v⟩ = ξ`.
pub(crate) fn coupling_with_rotation(xi: f64, phi: f64) -> CouplingUnitary {
    let g = phasor(phi);
    let tau = (1.0 - xi * xi).max(0.0).sqrt();
    let mut u = Mat4::zeros();
    // |0⟩ block: e^{iφ} [[ξ, τ], [−τ, ξ]] in the (h, v) ancilla basis
    u[(IDX_0H, IDX_0H)] = g * xi;
    u[(IDX_0H, IDX_0V)] = g * tau;
    u[(IDX_0V, IDX_0H)] = -g * tau;
    u[(IDX_0V, IDX_0V)] = g * xi;
    // |1⟩ block: identity on the ancilla
    u[(IDX_1H, IDX_1H)] = real(1.0);
    u[(IDX_1V, IDX_1V)] = real(1.0);
    CouplingUnitary { u }
}

/// `|ψ⟩ ⊗ |v⟩`
pub fn attach_ancilla(s: &PureQubit) -> JointVector {
    let mut v = JointVector::zeros();
    v[IDX_0V] = s.amp0();
    v[IDX_1V] = s.amp1();
    v
}

/// Result of running one input through the coupling and ancilla projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationOutcome {
    pub success_state: PureQubit,
    pub failure_state: PureQubit,
    pub p_success: f64,
    pub p_failure: f64,
}

/// Separate input `state_index` of `ensemble`.
///
/// The outcome is computed by applying the coupling unitary and projecting the
/// ancilla; branch states are returned in canonical phase.
pub fn separate(
    state_index: usize,
    ensemble: &SymmetricEnsemble,
    map: &SeparationMap,
) -> Result<SeparationOutcome> {
    check_compatible(ensemble, map)?;
    let input = ensemble.state(state_index)?;
    let out = coupling_unitary(map).apply(&attach_ancilla(input));

    let (s0, s1) = (out[IDX_0V], out[IDX_1V]);
    let (f0, f1) = (out[IDX_0H], out[IDX_1H]);
    let p_success = s0.norm_sqr() + s1.norm_sqr();
    let p_failure = f0.norm_sqr() + f1.norm_sqr();

    let success_state = PureQubit::canonical(s0, s1)?;
    let failure_state = if p_failure > 0.0 {
        PureQubit::canonical(f0, f1)?
    } else {
        PureQubit::zero()
    };
    Ok(SeparationOutcome {
        success_state,
        failure_state,
        p_success,
        p_failure,
    })
}

pub(crate) fn check_compatible(ensemble: &SymmetricEnsemble, map: &SeparationMap) -> Result<()> {
    if (ensemble.theta() - map.theta_in).abs() > 1e-12 {
        return Err(FrioError::config(format!(
            "map was built for theta = {} rad but the ensemble has theta = {} rad",
            map.theta_in,
            ensemble.theta()
        )));
    }
    if (phasor(ensemble.phi()) - phasor(map.phi)).norm() > 1e-12 {
        return Err(FrioError::config(format!(
            "map removes phase {} rad but the ensemble has phase {} rad",
            map.phi,
            ensemble.phi()
        )));
    }
    Ok(())
}
