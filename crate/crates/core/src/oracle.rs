//! Brute-force check that the two-step strategy reaches the minimum error rate
//! at a fixed inconclusive rate.
//!
//! Two searches are available. The covariant search fixes a diagonal
//! inconclusive element with the prescribed rate and spreads the remaining
//! weight over conclusive elements `S V^j |w⟩⟨w| V^{-j} S`, `S = (I − Π_?)^{1/2}`
//! (for two states, `S|w⟩` and `S|w⊥⟩`). The unconstrained search, for two
//! states only, scans general three-outcome qubit POVMs with rank-one
//! conclusive elements, choosing the weights exactly for each pair of Bloch
//! directions.
//!
//! Every candidate is checked with [`verify_povm`] before it is scored, and
//! ties are broken by the lexicographically smallest parameter tuple so the
//! result does not depend on evaluation order.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FrioError, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_norm, phasor, real, Mat2, Vec2, C64};
use crate::strategy::{pe_min, q_mc, Povm};

/// Tolerance used by [`PovmValidity::valid`].
pub const POVM_TOLERANCE: f64 = 1e-10;

/// Completeness and positivity diagnostics of a set of POVM elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovmValidity {
    /// Operator norm of `Σ Π − I`.
    pub completeness_deviation: f64,
    /// Smallest eigenvalue over all elements.
    pub min_eigenvalue: f64,
    /// Largest deviation from Hermiticity over all elements.
    pub hermiticity_defect: f64,
}

impl PovmValidity {
    pub fn valid(&self) -> bool {
        self.completeness_deviation <= POVM_TOLERANCE
            && self.min_eigenvalue >= -POVM_TOLERANCE
            && self.hermiticity_defect <= POVM_TOLERANCE
    }
}

pub fn verify_elements(elements: &[Mat2]) -> PovmValidity {
    let mut sum = Mat2::zeros();
    let mut min_eigenvalue = f64::INFINITY;
    let mut hermiticity_defect: f64 = 0.0;
    for e in elements {
        sum += e;
        min_eigenvalue = min_eigenvalue.min(hermitian_eigenvalues(e)[0]);
        hermiticity_defect = hermiticity_defect.max(crate::linalg::hermiticity_defect(e));
    }
    PovmValidity {
        completeness_deviation: hermitian_norm(&(sum - Mat2::identity())),
        min_eigenvalue,
        hermiticity_defect,
    }
}

/// Validity report for a POVM; never fails.
pub fn verify_povm(povm: &Povm) -> PovmValidity {
    verify_elements(povm.elements())
}

/// Resolution of a grid search: `points` per parameter, then `refinements`
/// zoomed passes around the incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    pub refinements: usize,
}

impl GridSpec {
    /// Covariant search default: 201 points, one refinement.
    pub const COVARIANT: GridSpec = GridSpec {
        points: 201,
        refinements: 1,
    };
    /// Unconstrained search default: 21 points per angle, eight zoom levels.
    pub const UNCONSTRAINED: GridSpec = GridSpec {
        points: 21,
        refinements: 5,
    };

    fn validate(&self) -> Result<()> {
        if self.points < 3 || self.points.is_multiple_of(2) {
            return Err(FrioError::config(
                "grid needs an odd number (≥ 3) of points per parameter so refinements keep the incumbent",
            ));
        }
        Ok(())
    }

    fn describe(&self, params: &[&str]) -> String {
        format!(
            "{} points per parameter ({}), {} refinement pass(es)",
            self.points,
            params.join(", "),
            self.refinements
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchFamily {
    Covariant,
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub theta: f64,
    pub q_target: f64,
    pub pe_bruteforce: f64,
    pub pe_formula: f64,
    pub gap: f64,
    pub search_resolution: String,
    pub family: SearchFamily,
    /// Inconclusive rate of the winning strategy.
    pub q_achieved: f64,
    pub best_params: Vec<f64>,
    pub candidates_scored: u64,
    pub candidates_rejected: u64,
}

impl OracleReport {
    pub fn within(&self, gap_min: f64, gap_max: f64) -> bool {
        self.gap >= gap_min && self.gap <= gap_max
    }
}

/// Oracle section of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// State counts for the covariant search (2 and/or 3).
    pub n_values: Vec<usize>,
    /// Target rates; empty means `{0, 0.2, 0.4, 0.6, Q^MC}`.
    pub q_values: Vec<f64>,
    pub grid: GridSpec,
    /// Also run the unconstrained two-state search.
    pub unconstrained: bool,
    pub unconstrained_grid: GridSpec,
    pub gap_min: f64,
    pub gap_max: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            n_values: vec![2, 3],
            q_values: Vec::new(),
            grid: GridSpec::COVARIANT,
            unconstrained: true,
            unconstrained_grid: GridSpec::UNCONSTRAINED,
            gap_min: -1e-6,
            gap_max: 2e-3,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        for &n in &self.n_values {
            if !(2..=3).contains(&n) {
                return Err(FrioError::config(format!("oracle supports n ∈ {{2, 3}}, got {n}")));
            }
        }
        self.grid.validate()?;
        self.unconstrained_grid.validate()?;
        if !(self.gap_min <= self.gap_max) {
            return Err(FrioError::config("oracle.gap_min must not exceed oracle.gap_max"));
        }
        if self.q_values.iter().any(|q| !(*q >= 0.0 && *q < 1.0)) {
            return Err(FrioError::config("oracle.q_values must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn q_list(&self, theta: f64) -> Result<Vec<f64>> {
        if self.q_values.is_empty() {
            Ok(vec![0.0, 0.2, 0.4, 0.6, q_mc(theta)?])
        } else {
            Ok(self.q_values.clone())
        }
    }
}

/// Every search requested by `cfg`, in order: covariant for each `n` and `q`,
/// then unconstrained for each `q`.
pub fn run_suite(theta: f64, cfg: &OracleConfig) -> Result<Vec<OracleReport>> {
    cfg.validate()?;
    let qs = cfg.q_list(theta)?;
    let mut out = Vec::new();
    for &n in &cfg.n_values {
        for &q in &qs {
            out.push(brute_force_pe(n, theta, q, &cfg.grid)?);
        }
    }
    if cfg.unconstrained {
        for &q in &qs {
            out.push(unconstrained_pe(theta, q, &cfg.unconstrained_grid)?);
        }
    }
    Ok(out)
}

/// Error and inconclusive rates of a candidate, or `None` if invalid.
#[derive(Debug, Clone, Copy)]
struct Score {
    pe: f64,
    q: f64,
}

struct Problem {
    n: usize,
    theta: f64,
    q_target: f64,
    /// `(cos θ, sin θ)`
    cs: (f64, f64),
    states: Vec<Vec2>,
}

impl Problem {
    fn new(n: usize, theta: f64, q_target: f64) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(FrioError::domain(format!("oracle supports n ∈ {{2, 3}}, got {n}")));
        }
        let qmc = q_mc(theta)?;
        if theta <= 0.0 {
            return Err(FrioError::domain("theta must be positive"));
        }
        if !(q_target >= 0.0 && q_target <= qmc + 1e-12) {
            return Err(FrioError::domain(format!(
                "q_target = {q_target} outside [0, cos 2θ = {qmc}]"
            )));
        }
        let (c, s) = (theta.cos(), theta.sin());
        let states = (0..n)
            .map(|j| {
                Vec2::new(
                    real(c),
                    crate::states::root_of_unity(n, j as i64) * s,
                )
            })
            .collect();
        Ok(Self {
            n,
            theta,
            q_target: q_target.min(qmc),
            cs: (c, s),
            states,
        })
    }

    fn pe_formula(&self) -> Result<f64> {
        pe_min(self.n, self.q_target, q_mc(self.theta)?)
    }

    /// Score `conclusive` plus `inconclusive` after verifying the POVM.
    fn score(&self, conclusive: &[Mat2], inconclusive: &Mat2) -> Option<Score> {
        let mut all = [Mat2::zeros(); 4];
        all[..conclusive.len()].copy_from_slice(conclusive);
        all[conclusive.len()] = *inconclusive;
        if !verify_elements(&all[..=conclusive.len()]).valid() {
            return None;
        }
        let n = self.n as f64;
        let mut pe = 0.0;
        let mut q = 0.0;
        for (j, a) in self.states.iter().enumerate() {
            for (k, e) in conclusive.iter().enumerate() {
                if k != j {
                    pe += expect(e, a);
                }
            }
            q += expect(inconclusive, a);
        }
        Some(Score {
            pe: pe / n,
            q: q / n,
        })
    }
}

fn expect(m: &Mat2, v: &Vec2) -> f64 {
    (v.adjoint() * m * v)[(0, 0)].re
}

#[derive(Debug, Clone, Copy)]
struct Dim {
    lo: f64,
    hi: f64,
    periodic: bool,
}

#[derive(Debug, Clone)]
struct Best {
    value: f64,
    params: Vec<f64>,
    q: f64,
}

fn better(a: &Best, b: &Best) -> Ordering {
    a.value.total_cmp(&b.value).then_with(|| {
        for (x, y) in a.params.iter().zip(&b.params) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    })
}

/// Zoomed grid search over a box; `eval` returns `None` for invalid points.
fn grid_search<F>(dims: &[Dim], spec: &GridSpec, eval: F) -> (Option<Best>, u64, u64)
where
    F: Fn(&[f64]) -> Option<(f64, f64)> + Sync,
{
    let mut ranges: Vec<(f64, f64)> = dims.iter().map(|d| (d.lo, d.hi)).collect();
    let mut best: Option<Best> = None;
    let mut scored = 0u64;
    let mut rejected = 0u64;
    let p = spec.points;
    for _level in 0..=spec.refinements {
        let axes: Vec<Vec<f64>> = ranges
            .iter()
            .map(|&(lo, hi)| {
                (0..p)
                    .map(|i| {
                        if i == p - 1 {
                            hi
                        } else {
                            lo + (hi - lo) * i as f64 / (p - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let total: usize = axes.iter().map(|a| a.len()).product();
        let (level_best, ok, bad) = (0..total)
            .into_par_iter()
            .fold(
                || (None::<Best>, 0u64, 0u64),
                |(acc, ok, bad), mut idx| {
                    let mut params = Vec::with_capacity(axes.len());
                    for axis in axes.iter().rev() {
                        params.push(axis[idx % axis.len()]);
                        idx /= axis.len();
                    }
                    params.reverse();
                    match eval(&params) {
                        Some((value, q)) => {
                            let cand = Best { value, params, q };
                            let acc = match acc {
                                Some(b) if better(&b, &cand) != Ordering::Greater => Some(b),
                                _ => Some(cand),
                            };
                            (acc, ok + 1, bad)
                        }
                        None => (acc, ok, bad + 1),
                    }
                },
            )
            .reduce(
                || (None, 0, 0),
                |(a, ok1, bad1), (b, ok2, bad2)| {
                    let m = match (a, b) {
                        (Some(x), Some(y)) => Some(if better(&x, &y) != Ordering::Greater { x } else { y }),
                        (x, None) => x,
                        (None, y) => y,
                    };
                    (m, ok1 + ok2, bad1 + bad2)
                },
            );
        scored += ok;
        rejected += bad;
        if let Some(lb) = level_best {
            best = match best {
                Some(b) if better(&b, &lb) != Ordering::Greater => Some(b),
                _ => Some(lb),
            };
        }
        let Some(b) = &best else { break };
        ranges = ranges
            .iter()
            .zip(dims)
            .zip(&b.params)
            .map(|((&(lo, hi), d), &x)| {
                let step = (hi - lo) / (p - 1) as f64;
                if d.periodic {
                    (x - step, x + step)
                } else {
                    ((x - step).max(d.lo), (x + step).min(d.hi))
                }
            })
            .collect();
    }
    (best, scored, rejected)
}

/// Covariant search for `n ∈ {2, 3}` at inconclusive rate `q_target`.
pub fn brute_force_pe(n: usize, theta: f64, q_target: f64, grid: &GridSpec) -> Result<OracleReport> {
    grid.validate()?;
    let prob = Problem::new(n, theta, q_target)?;
    let (c, s) = prob.cs;
    let q = prob.q_target;
    // Π_? = diag(a, b) with a cos²θ + b sin²θ = q
    let a_lo = ((q - s * s) / (c * c)).max(0.0);
    let a_hi = (q / (c * c)).min(1.0);
    let b_of = |a: f64| ((q - a * c * c) / (s * s)).clamp(0.0, 1.0);
    let a_dim = Dim {
        lo: a_lo,
        hi: a_hi,
        periodic: false,
    };
    let psi_dim = Dim {
        lo: 0.0,
        hi: TAU,
        periodic: true,
    };
    let inconclusive = |a: f64| Mat2::new(real(a), C64::new(0.0, 0.0), C64::new(0.0, 0.0), real(b_of(a)));
    let sqrt_rest = |a: f64| Mat2::new(
        real((1.0 - a).max(0.0).sqrt()),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        real((1.0 - b_of(a)).max(0.0).sqrt()),
    );

    let (best, scored, rejected, names) = if n == 3 {
        let eval = |p: &[f64]| {
            let (a, psi) = (p[0], p[1]);
            let sm = sqrt_rest(a);
            let k = 1.0 / 3f64.sqrt();
            let elems: Vec<Mat2> = (0..3)
                .map(|j| {
                    let w = Vec2::new(real(k), phasor(psi + TAU * j as f64 / 3.0) * k);
                    let v = sm * w;
                    v * v.adjoint()
                })
                .collect();
            prob.score(&elems, &inconclusive(a)).map(|sc| (sc.pe, sc.q))
        };
        let (b, ok, bad) = grid_search(&[a_dim, psi_dim], grid, eval);
        (b, ok, bad, vec!["a", "psi"])
    } else {
        let chi_dim = Dim {
            lo: 0.0,
            hi: PI,
            periodic: false,
        };
        let eval = |p: &[f64]| {
            let (a, chi, psi) = (p[0], p[1], p[2]);
            let sm = sqrt_rest(a);
            let (ch, sh) = ((0.5 * chi).cos(), (0.5 * chi).sin());
            let w = Vec2::new(real(ch), phasor(psi) * sh);
            let w_perp = Vec2::new(-phasor(-psi) * sh, real(ch));
            let v0 = sm * w;
            let v1 = sm * w_perp;
            let elems = [v0 * v0.adjoint(), v1 * v1.adjoint()];
            prob.score(&elems, &inconclusive(a)).map(|sc| (sc.pe, sc.q))
        };
        let (b, ok, bad) = grid_search(&[a_dim, chi_dim, psi_dim], grid, eval);
        (b, ok, bad, vec!["a", "chi", "psi"])
    };
    let best = best.ok_or_else(|| FrioError::Estimation("no valid covariant strategy found".into()))?;
    let pe_formula = prob.pe_formula()?;
    Ok(OracleReport {
        n,
        theta,
        q_target: q,
        pe_bruteforce: best.value,
        pe_formula,
        gap: best.value - pe_formula,
        search_resolution: grid.describe(&names),
        family: SearchFamily::Covariant,
        q_achieved: best.q,
        best_params: best.params,
        candidates_scored: scored,
        candidates_rejected: rejected,
    })
}

/// Unit Bloch vector from polar angle `chi` and azimuth `psi`.
fn bloch_dir(chi: f64, psi: f64) -> [f64; 3] {
    [chi.sin() * psi.cos(), chi.sin() * psi.sin(), chi.cos()]
}

/// `w (I + r·σ)/2`
fn rank_one(w: f64, r: [f64; 3]) -> Mat2 {
    Mat2::new(
        real(0.5 * w * (1.0 + r[2])),
        C64::new(0.5 * w * r[0], -0.5 * w * r[1]),
        C64::new(0.5 * w * r[0], 0.5 * w * r[1]),
        real(0.5 * w * (1.0 - r[2])),
    )
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Tolerated violation of `Π_? ≥ 0` while locating the weight interval.
const WEIGHT_SLACK: f64 = 1e-12;

/// Exact choice of weights for two fixed conclusive directions.
///
/// With `w₁` fixed by the rate constraint as an affine function of `w₀`, the
/// error is linear in `w₀` and the positivity condition
/// `g(w₀) = 2 − w₀ − w₁ − |w₀ r₀ + w₁ r₁| ≥ 0` is concave, so the feasible set
/// is an interval and the optimum sits at one of its ends.
fn best_weights(prob: &Problem, r0: [f64; 3], r1: [f64; 3]) -> Vec<(f64, f64)> {
    let bz = (2.0 * prob.theta).cos();
    let a0 = 0.5 * (1.0 + r0[2] * bz);
    let a1 = 0.5 * (1.0 + r1[2] * bz);
    let target = 1.0 - prob.q_target;
    if a0 <= 1e-15 || a1 <= 1e-15 {
        return Vec::new();
    }
    let w1_of = |w0: f64| (target - w0 * a0) / a1;
    let g = |w0: f64| {
        let w1 = w1_of(w0);
        let v = [
            w0 * r0[0] + w1 * r1[0],
            w0 * r0[1] + w1 * r1[1],
            w0 * r0[2] + w1 * r1[2],
        ];
        2.0 - w0 - w1 - norm3(v)
    };
    // w0 ≥ 0 and w1 ≥ 0
    let (lo, hi) = (0.0, target / a0);
    // maximize the concave g by golden section
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x0, mut x1) = (lo, hi);
    for _ in 0..100 {
        if x1 - x0 <= f64::EPSILON * hi {
            break;
        }
        let m0 = x1 - phi * (x1 - x0);
        let m1 = x0 + phi * (x1 - x0);
        if g(m0) < g(m1) {
            x0 = m0;
        } else {
            x1 = m1;
        }
    }
    let peak = 0.5 * (x0 + x1);
    // a rate of zero leaves a single feasible point, reached only up to rounding
    let feasible = |w0: f64| g(w0) >= -WEIGHT_SLACK;
    if !feasible(peak) {
        return Vec::new();
    }
    let boundary = |inside: f64, outside: f64| {
        if feasible(outside) {
            return outside;
        }
        let (mut a, mut b) = (inside, outside);
        for _ in 0..100 {
            if (b - a).abs() <= f64::EPSILON * hi {
                break;
            }
            let m = 0.5 * (a + b);
            if feasible(m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    [boundary(peak, lo), boundary(peak, hi)]
        .iter()
        .map(|&w0| (w0, w1_of(w0).max(0.0)))
        .collect()
}

/// Unconstrained search over three-outcome qubit POVMs for two states.
pub fn unconstrained_pe(theta: f64, q_target: f64, grid: &GridSpec) -> Result<OracleReport> {
    grid.validate()?;
    let prob = Problem::new(2, theta, q_target)?;
    let chi = Dim {
        lo: 0.0,
        hi: PI,
        periodic: false,
    };
    let psi = Dim {
        lo: 0.0,
        hi: TAU,
        periodic: true,
    };
    let eval = |p: &[f64]| {
        let r0 = bloch_dir(p[0], p[1]);
        let r1 = bloch_dir(p[2], p[3]);
        let mut best: Option<(f64, f64)> = None;
        for (w0, w1) in best_weights(&prob, r0, r1) {
            let e0 = rank_one(w0, r0);
            let e1 = rank_one(w1, r1);
            let inc = Mat2::identity() - e0 - e1;
            if let Some(sc) = prob.score(&[e0, e1], &inc) {
                if (sc.q - prob.q_target).abs() > 1e-9 {
                    continue;
                }
                if best.is_none_or(|b| sc.pe < b.0) {
                    best = Some((sc.pe, sc.q));
                }
            }
        }
        best
    };
    let (best, scored, rejected) = grid_search(&[chi, psi, chi, psi], grid, eval);
    let best = best.ok_or_else(|| FrioError::Estimation("no valid POVM found".into()))?;
    let pe_formula = prob.pe_formula()?;
    Ok(OracleReport {
        n: 2,
        theta,
        q_target: prob.q_target,
        pe_bruteforce: best.value,
        pe_formula,
        gap: best.value - pe_formula,
        search_resolution: grid.describe(&["chi0", "psi0", "chi1", "psi1"]),
        family: SearchFamily::Unconstrained,
        q_achieved: best.q,
        best_params: best.params,
        candidates_scored: scored,
        candidates_rejected: rejected,
    })
}
