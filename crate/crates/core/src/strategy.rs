//! Minimum-error and fixed-rate-of-inconclusive-outcomes (FRIO) measurements.
//!
//! The optimal FRIO measurement for `N` symmetric states is built in two steps:
//! optimal state separation (which fixes the inconclusive rate `Q` through the
//! target angle `θ'`) followed by the minimum-error (ME) measurement on the
//! successfully separated states. This module exposes both the composite
//! `(N+1)`-outcome POVM and the closed-form probabilities it produces.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FrioError, Result};
use crate::linalg::{self, real, Mat2};
use crate::separation::SeparationMap;
use crate::states::{self, check_state_count, uniform_states, PureQubit, QubitDensity};

/// Outcome label of a POVM element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    /// Conclusive identification of state `j`.
    State(usize),
    Inconclusive,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::State(j) => write!(f, "{j}"),
            Outcome::Inconclusive => write!(f, "?"),
        }
    }
}

/// An ordered list of 2×2 positive operators with outcome labels.
///
/// Construction does not validate the elements; use
/// [`crate::oracle::verify_povm`] to check positivity and completeness.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<Mat2>,
    labels: Vec<Outcome>,
}

impl Povm {
    pub fn new(elements: Vec<Mat2>, labels: Vec<Outcome>) -> Result<Self> {
        if elements.is_empty() {
            return Err(FrioError::domain("a POVM needs at least one element"));
        }
        if elements.len() != labels.len() {
            return Err(FrioError::domain(format!(
                "{} elements but {} labels",
                elements.len(),
                labels.len()
            )));
        }
        Ok(Self { elements, labels })
    }

    pub fn elements(&self) -> &[Mat2] {
        &self.elements
    }

    pub fn labels(&self) -> &[Outcome] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, label: Outcome) -> Option<&Mat2> {
        self.labels
            .iter()
            .position(|l| *l == label)
            .map(|i| &self.elements[i])
    }

    /// `Σ_k Π_k`
    pub fn sum(&self) -> Mat2 {
        self.elements.iter().fold(Mat2::zeros(), |acc, e| acc + e)
    }

    /// Born-rule outcome probabilities `Tr(ρ Π_k)` in element order.
    pub fn born(&self, rho: &Mat2) -> Vec<f64> {
        self.elements
            .iter()
            .map(|e| linalg::expectation(rho, e))
            .collect()
    }

    /// Multiply every element by `factor`; useful for fault injection in tests.
    pub fn scaled_element(&self, index: usize, factor: f64) -> Self {
        let mut out = self.clone();
        out.elements[index] *= real(factor);
        out
    }
}

/// `Π_k = (2/N)|u_k⟩⟨u_k|`, the minimum-error POVM for symmetric qubit states.
pub fn me_povm(n: usize) -> Result<Povm> {
    let weight = real(2.0 / n as f64);
    let elements = uniform_states(n)?
        .iter()
        .map(|u| linalg::projector(&u.as_vector()) * weight)
        .collect();
    Povm::new(elements, (0..n).map(Outcome::State).collect())
}

/// Minimum error rate for discriminating `N` symmetric states at polar half-angle `θ'`.
pub fn me_error_rate(n: usize, theta_out: f64) -> Result<f64> {
    check_state_count(n)?;
    let theta_out = states::check_half_angle("theta_out", theta_out)?;
    Ok(1.0 - (1.0 + (2.0 * theta_out).sin()) / n as f64)
}

/// Average error rate of the ME POVM evaluated by the Born rule on the separated states.
pub fn me_error_rate_born(n: usize, theta_out: f64) -> Result<f64> {
    let povm = me_povm(n)?;
    let mut p_correct = 0.0;
    for j in 0..n {
        let beta = states::separated_state(n, j, theta_out)?;
        let rho = states::to_density(&beta);
        p_correct += linalg::expectation(rho.matrix(), &povm.elements()[j]);
    }
    Ok(1.0 - p_correct / n as f64)
}

/// Composite `(N+1)`-outcome POVM for inputs with fiducial phase `0`.
pub fn frio_povm(n: usize, theta: f64, theta_out: f64) -> Result<Povm> {
    frio_povm_for_map(n, &SeparationMap::new(theta, theta_out, 0.0)?)
}

/// Composite POVM `Π_j = A_j†A_j`, `Π_? = A_?†A_?` with
/// `A_j = (Π_j^ME)^{1/2} ⟨v|U|v⟩` and `A_? = ⟨h|U|v⟩`.
pub fn frio_povm_for_map(n: usize, map: &SeparationMap) -> Result<Povm> {
    check_state_count(n)?;
    let success = map.success_operator();
    let failure = map.failure_operator();
    // (2/N |u⟩⟨u|)^{1/2} = √(2/N) |u⟩⟨u| for normalized |u⟩
    let root_weight = real((2.0 / n as f64).sqrt());
    let mut elements = Vec::with_capacity(n + 1);
    for u in uniform_states(n)? {
        let a = linalg::projector(&u.as_vector()) * root_weight * success;
        elements.push(a.adjoint() * a);
    }
    elements.push(failure.adjoint() * failure);
    let mut labels: Vec<Outcome> = (0..n).map(Outcome::State).collect();
    labels.push(Outcome::Inconclusive);
    Povm::new(elements, labels)
}

/// Average error, correct and inconclusive probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrioProbabilities {
    pub p_error: f64,
    pub p_correct: f64,
    pub q_inconclusive: f64,
}

impl FrioProbabilities {
    pub fn total(&self) -> f64 {
        self.p_error + self.p_correct + self.q_inconclusive
    }
}

/// Closed-form probabilities of the two-step measurement at separation angle `θ'`.
pub fn frio_probabilities(n: usize, theta: f64, theta_out: f64) -> Result<FrioProbabilities> {
    let map = SeparationMap::new(theta, theta_out, 0.0)?;
    let p_s = map.p_success();
    let p_e_beta = me_error_rate(n, map.theta_out())?;
    Ok(FrioProbabilities {
        p_error: p_s * p_e_beta,
        p_correct: p_s * (1.0 - p_e_beta),
        q_inconclusive: 1.0 - p_s,
    })
}

/// Born-rule averages `P_e`, `P_c`, `Q` of an arbitrary labelled POVM over
/// equiprobable pure inputs.
pub fn average_probabilities(povm: &Povm, inputs: &[PureQubit]) -> FrioProbabilities {
    let eta = 1.0 / inputs.len() as f64;
    let mut out = FrioProbabilities {
        p_error: 0.0,
        p_correct: 0.0,
        q_inconclusive: 0.0,
    };
    for (j, s) in inputs.iter().enumerate() {
        let rho: QubitDensity = s.into();
        for (label, elem) in povm.labels().iter().zip(povm.elements()) {
            let p = eta * linalg::expectation(rho.matrix(), elem);
            match label {
                Outcome::State(k) if *k == j => out.p_correct += p,
                Outcome::State(_) => out.p_error += p,
                Outcome::Inconclusive => out.q_inconclusive += p,
            }
        }
    }
    out
}

/// Minimum inconclusive rate at which the conclusive results reach maximum confidence.
pub fn q_mc(theta: f64) -> Result<f64> {
    let theta = states::check_half_angle("theta", theta)?;
    Ok((2.0 * theta).cos())
}

/// Minimum average error rate at a fixed inconclusive rate `q ∈ [0, q_mc]`.
pub fn pe_min(n: usize, q: f64, q_mc: f64) -> Result<f64> {
    check_state_count(n)?;
    pe_min_unbounded(n as f64, q, q_mc)
}

/// [`pe_min`] without the ensemble-size cap, for asymptotic checks.
pub fn pe_min_unbounded(n: f64, q: f64, q_mc: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q_mc) {
        return Err(FrioError::domain(format!("q_mc = {q_mc} must lie in [0, 1)")));
    }
    if !(q >= 0.0) {
        return Err(FrioError::domain(format!("q = {q} must be non-negative")));
    }
    if q > q_mc {
        return Err(FrioError::domain(format!(
            "q = {q} exceeds the critical rate {q_mc}"
        )));
    }
    let q_bar = 1.0 - q;
    let root = (q_bar * q_bar - (q - q_mc).powi(2)).max(0.0).sqrt();
    Ok(((n - 1.0) * q_bar - root) / n)
}

/// Separation angle that produces inconclusive rate `q` for inputs at `θ`.
pub fn theta_out_for_q(theta: f64, q: f64) -> Result<f64> {
    let qmc = q_mc(theta)?;
    if !(0.0..=qmc + 1e-15).contains(&q) {
        return Err(FrioError::domain(format!("q = {q} outside [0, {qmc}]")));
    }
    let s = (theta.sin().powi(2) / (1.0 - q)).sqrt().min(std::f64::consts::FRAC_1_SQRT_2);
    Ok(s.asin())
}
