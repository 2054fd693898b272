//! Path-mode optics: Fourier-basis Naimark extension, focal-plane detectors,
//! interference patterns and their least-squares characterization.
//!
//! A path-encoded qubit illuminates the focal plane of a lens with
//!
//! ```text
//! I(x) ∝ sinc²(κΛx) [ρ₀₀ + ρ₁₁ + 2|ρ₀₁| cos(2κΔx + arg ρ₁₀)],   κ = π/(λf)
//! ```
//!
//! where `Δ` is the mode separation and `Λ` the mode width. Pointlike detectors
//! placed at `x_k = −λf m_k/(NΔ)` implement the projective Fourier measurement
//! whose restriction to the qubit is the minimum-error POVM.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{FrioError, Result};
use crate::linalg::{c, phasor, real, Mat2, C64};
use crate::states::{check_state_count, root_of_unity, QubitDensity};

/// Visibility below which a fitted fringe phase is considered noise.
pub const PHASE_RELIABILITY_THRESHOLD: f64 = 0.02;
/// Allowed excess of a measured visibility over `sin 2θ'`.
pub const VISIBILITY_EXCESS_TOLERANCE: f64 = 0.05;
/// Largest negative eigenvalue repaired by clipping during reconstruction.
pub const PSD_REPAIR_LIMIT: f64 = 0.02;
/// Minimum relative distance between a detector and a zero of the envelope.
pub const SINC_ZERO_GUARD: f64 = 1e-3;

/// `sin(u)/u`, with `sinc(0) = 1`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// Geometry of the two-mode source, the Fourier lens and the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticsConfig {
    /// λ (m)
    pub wavelength: f64,
    /// f (m)
    pub focal_length: f64,
    /// Δ, centre-to-centre distance of the path modes (m)
    pub mode_separation: f64,
    /// Λ, width of each path mode (m)
    pub mode_width: f64,
    /// Camera pixel size (m)
    pub pixel_pitch: f64,
    /// Half-width of the simulated focal-plane window (m)
    pub grid_halfwidth: f64,
    /// Number of samples on the fine (noiseless) grid
    pub samples: usize,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        let wavelength = 687e-9;
        let focal_length = 0.30;
        let mode_width = 144e-6;
        Self {
            wavelength,
            focal_length,
            mode_separation: 288e-6,
            mode_width,
            pixel_pitch: 5.2e-6,
            grid_halfwidth: 2.0 * wavelength * focal_length / mode_width,
            samples: 4096,
        }
    }
}

impl OpticsConfig {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("wavelength", self.wavelength),
            ("focal_length", self.focal_length),
            ("mode_separation", self.mode_separation),
            ("mode_width", self.mode_width),
            ("pixel_pitch", self.pixel_pitch),
            ("grid_halfwidth", self.grid_halfwidth),
        ];
        for (name, v) in lengths {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FrioError::config(format!("optics.{name} must be positive, got {v}")));
            }
        }
        if self.mode_width >= self.mode_separation {
            return Err(FrioError::config(format!(
                "mode width {} m must be smaller than mode separation {} m",
                self.mode_width, self.mode_separation
            )));
        }
        if self.samples < 16 {
            return Err(FrioError::config("optics.samples must be at least 16"));
        }
        if self.pixel_pitch >= self.grid_halfwidth {
            return Err(FrioError::config("pixel pitch exceeds the simulated window"));
        }
        Ok(())
    }

    /// κ = π/(λf)
    pub fn kappa(&self) -> f64 {
        PI / (self.wavelength * self.focal_length)
    }

    /// Angular spatial frequency of the fringes, `2κΔ`.
    pub fn fringe_frequency(&self) -> f64 {
        2.0 * self.kappa() * self.mode_separation
    }

    /// Fringe period `λf/Δ` (m).
    pub fn fringe_period(&self) -> f64 {
        TAU / self.fringe_frequency()
    }

    /// Position of the first zero of the sinc² envelope, `λf/Λ`.
    pub fn envelope_zero(&self) -> f64 {
        self.wavelength * self.focal_length / self.mode_width
    }

    pub fn envelope(&self, x: f64) -> f64 {
        sinc(self.kappa() * self.mode_width * x).powi(2)
    }

    /// Uniform grid of `samples` points spanning `±grid_halfwidth`.
    pub fn fine_grid(&self) -> Vec<f64> {
        let n = self.samples;
        let step = 2.0 * self.grid_halfwidth / (n - 1) as f64;
        (0..n).map(|i| -self.grid_halfwidth + i as f64 * step).collect()
    }

    /// Camera pixel centres at multiples of the pixel pitch inside the window.
    pub fn camera_grid(&self) -> Vec<f64> {
        let half = (self.grid_halfwidth / self.pixel_pitch).floor() as i64;
        (-half..=half).map(|k| k as f64 * self.pixel_pitch).collect()
    }
}

/// Orthonormal Fourier basis `|μ_k⟩ = F_N|k⟩`, components `ω^{mk}/√N`.
pub fn fourier_basis(n: usize) -> Result<Vec<Vec<C64>>> {
    check_state_count(n)?;
    let norm = 1.0 / (n as f64).sqrt();
    Ok((0..n)
        .map(|k| {
            (0..n)
                .map(|m| root_of_unity(n, (m * k) as i64) * norm)
                .collect()
        })
        .collect())
}

/// `⟨a|b⟩` for vectors of equal length.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Embed a qubit into the first two levels of an `n`-level space.
pub fn embed(amp0: C64, amp1: C64, n: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[0] = amp0;
    v[1] = amp1;
    v
}

/// Signed Fourier index `m_k`: `k` for `k ≤ N/2`, else `k − N`.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if 2 * k <= n {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Focal-plane detector positions `x_k = −λf m_k/(NΔ)`.
pub fn detector_positions(n: usize, cfg: &OpticsConfig) -> Result<Vec<f64>> {
    check_state_count(n)?;
    let scale = cfg.wavelength * cfg.focal_length / (n as f64 * cfg.mode_separation);
    Ok((0..n)
        .map(|k| -scale * signed_index(k, n) as f64)
        .collect())
}

/// Diffraction compensation `χ = sinc²(πΛx/(λf))` for a detector at `x`.
///
/// Positions closer than [`SINC_ZERO_GUARD`] (relative) to a zero of the
/// envelope are rejected.
pub fn compensation_factor(x: f64, cfg: &OpticsConfig) -> Result<f64> {
    if !x.is_finite() {
        return Err(FrioError::domain("detector position must be finite"));
    }
    let rel = x / cfg.envelope_zero();
    let nearest = rel.round();
    if nearest != 0.0 && (rel - nearest).abs() < SINC_ZERO_GUARD {
        return Err(FrioError::config(format!(
            "detector at {x} m sits on a zero of the diffraction envelope"
        )));
    }
    Ok(cfg.envelope(x))
}

/// Detector positions with their compensation factors, validated together.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorArray {
    pub positions: Vec<f64>,
    pub compensation: Vec<f64>,
}

impl DetectorArray {
    pub fn new(n: usize, cfg: &OpticsConfig) -> Result<Self> {
        let positions = detector_positions(n, cfg)?;
        let compensation = positions
            .iter()
            .map(|&x| compensation_factor(x, cfg))
            .collect::<Result<Vec<_>>>()?;
        if let Some(x) = positions.iter().find(|x| x.abs() > cfg.grid_halfwidth) {
            return Err(FrioError::config(format!(
                "detector at {x} m lies outside the simulated window"
            )));
        }
        Ok(Self {
            positions,
            compensation,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Normalized focal-plane intensity of `ρ` at `x` (envelope included).
pub fn intensity_at(rho: &Mat2, cfg: &OpticsConfig, x: f64) -> f64 {
    let r10 = rho[(1, 0)];
    let fringe = 2.0 * r10.norm() * (cfg.fringe_frequency() * x + r10.arg()).cos();
    let value = cfg.envelope(x) * (rho[(0, 0)].re + rho[(1, 1)].re + fringe);
    value.max(0.0)
}

/// Compensated, normalized detector probabilities `p_k = 𝓘(x_k)/Σ_l 𝓘(x_l)` for
/// pointlike detectors.
pub fn pointlike_probabilities(rho: &Mat2, cfg: &OpticsConfig, detectors: &DetectorArray) -> Vec<f64> {
    let compensated: Vec<f64> = detectors
        .positions
        .iter()
        .zip(&detectors.compensation)
        .map(|(&x, &chi)| intensity_at(rho, cfg, x) / chi)
        .collect();
    let total: f64 = compensated.iter().sum();
    compensated.iter().map(|v| v / total).collect()
}

/// Which output port of the polarizing beam splitter a pattern was recorded at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Success,
    Failure,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Success => "success",
            Branch::Failure => "failure",
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternRow {
    x_m: f64,
    intensity: f64,
}

/// Intensity sampled on a uniform grid of transverse positions.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPattern {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub state_index: usize,
    pub branch: Branch,
}

impl IntensityPattern {
    pub fn new(xs: Vec<f64>, values: Vec<f64>, state_index: usize, branch: Branch) -> Result<Self> {
        if xs.len() != values.len() {
            return Err(FrioError::domain("positions and values differ in length"));
        }
        if xs.len() < 2 {
            return Err(FrioError::domain("a pattern needs at least two samples"));
        }
        let pitch = xs[1] - xs[0];
        if !(pitch > 0.0) {
            return Err(FrioError::domain("positions must be strictly increasing"));
        }
        for w in xs.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) || (d - pitch).abs() > 1e-6 * pitch {
                return Err(FrioError::domain("positions must have a uniform pitch"));
            }
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(FrioError::domain(format!("negative or NaN intensity {v}")));
        }
        Ok(Self {
            xs,
            values,
            state_index,
            branch,
        })
    }

    pub fn pitch(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Linear interpolation at `x`, returned with the interpolation weights of
    /// the two neighbouring samples.
    pub fn interpolate(&self, x: f64) -> Result<(f64, [(usize, f64); 2])> {
        let pos = (x - self.xs[0]) / self.pitch();
        let last = (self.xs.len() - 1) as f64;
        if !(0.0..=last).contains(&pos) {
            return Err(FrioError::domain(format!("position {x} m outside the pattern")));
        }
        let i = (pos.floor() as usize).min(self.xs.len() - 2);
        let w = pos - i as f64;
        let value = (1.0 - w) * self.values[i] + w * self.values[i + 1];
        Ok((value, [(i, 1.0 - w), (i + 1, w)]))
    }

    /// Add zero-mean Gaussian noise of standard deviation `sigma`; negative
    /// samples are clipped to zero.
    pub fn with_gaussian_noise<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| FrioError::domain(format!("invalid noise level: {e}")))?;
        let mut out = self.clone();
        for v in &mut out.values {
            *v = (*v + normal.sample(rng)).max(0.0);
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_csv_bytes()?)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (&x_m, &intensity) in self.xs.iter().zip(&self.values) {
            w.serialize(PatternRow { x_m, intensity })?;
        }
        w.into_inner()
            .map_err(|e| FrioError::Csv(csv::Error::from(e.into_error())))
    }

    pub fn read_csv(path: &Path, state_index: usize, branch: Branch) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for row in r.deserialize::<PatternRow>() {
            let row = row?;
            xs.push(row.x_m);
            values.push(row.intensity);
        }
        Self::new(xs, values, state_index, branch)
    }
}

/// Synthesize the pattern of `ρ` on the fine grid, scaled by `branch_weight`.
pub fn intensity_pattern(
    rho: &QubitDensity,
    cfg: &OpticsConfig,
    branch_weight: f64,
) -> Result<IntensityPattern> {
    pattern_on_grid(rho.matrix(), cfg, branch_weight, cfg.fine_grid())
}

pub(crate) fn pattern_on_grid(
    rho: &Mat2,
    cfg: &OpticsConfig,
    weight: f64,
    xs: Vec<f64>,
) -> Result<IntensityPattern> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(FrioError::domain(format!("branch weight {weight} outside [0, 1]")));
    }
    let values = xs.iter().map(|&x| weight * intensity_at(rho, cfg, x)).collect();
    IntensityPattern::new(xs, values, 0, Branch::Success)
}

/// Parameters of `F(x) = I_max sinc²(κΛx)[1 + V cos(2κΔx + φ')]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub i_max: f64,
    pub visibility: f64,
    /// Raw fringe phase φ' in `(−π, π]`.
    pub phase_raw: f64,
    /// Sum of squared residuals.
    pub residual: f64,
    /// `false` when the visibility is too small for the phase to mean anything.
    pub phase_reliable: bool,
}

/// Least-squares fit of the fringe model.
///
/// The model is linear in `(a, b, c)` once written as
/// `sinc²(κΛx)(a + b cos 2κΔx + c sin 2κΔx)`, so the fit is a single linear
/// least-squares solve with `V = √(b²+c²)/a` and `φ' = atan2(−c, b)`.
pub fn fit_pattern(p: &IntensityPattern, cfg: &OpticsConfig) -> Result<FitResult> {
    if p.peak() <= 0.0 {
        return Err(FrioError::Fit("pattern is identically zero".into()));
    }
    let span = p.xs[p.xs.len() - 1] - p.xs[0];
    if span < 3.0 * cfg.fringe_period() {
        return Err(FrioError::Fit(format!(
            "pattern spans {:.3} fringe periods, need at least 3",
            span / cfg.fringe_period()
        )));
    }
    let k = cfg.fringe_frequency();
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (&x, &y) in p.xs.iter().zip(&p.values) {
        let env = cfg.envelope(x);
        let row = Vector3::new(env, env * (k * x).cos(), env * (k * x).sin());
        normal += row * row.transpose();
        rhs += row * y;
    }
    let coeffs = normal
        .cholesky()
        .ok_or_else(|| FrioError::Fit("normal equations are singular".into()))?
        .solve(&rhs);
    let (a, b, cc) = (coeffs[0], coeffs[1], coeffs[2]);
    if !(a > 0.0) {
        return Err(FrioError::Fit(format!("non-positive fitted amplitude {a}")));
    }
    let residual = p
        .xs
        .iter()
        .zip(&p.values)
        .map(|(&x, &y)| {
            let env = cfg.envelope(x);
            let model = env * (a + b * (k * x).cos() + cc * (k * x).sin());
            (model - y).powi(2)
        })
        .sum();
    let visibility = (b.hypot(cc) / a).min(1.0);
    let phase_raw = wrap_phase((-cc).atan2(b));
    Ok(FitResult {
        i_max: a,
        visibility,
        phase_raw,
        residual,
        phase_reliable: visibility >= PHASE_RELIABILITY_THRESHOLD,
    })
}

/// Wrap to `(−π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Common phase offset removed from a set of fitted fringes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCorrection {
    pub phi_corr: f64,
    /// `φ_j = φ'_j + φ_corr`, with `φ'_j` unwrapped onto the branch nearest `2πj/N`.
    pub corrected_phases: Vec<f64>,
}

impl PhaseCorrection {
    /// Focal-plane shift that maps corrected coordinates back onto the raw axis:
    /// a detector meant for corrected position `x` reads the raw pattern at
    /// `x + φ_corr/(2κΔ)`.
    pub fn axis_offset(&self, cfg: &OpticsConfig) -> f64 {
        self.phi_corr / cfg.fringe_frequency()
    }
}

/// `φ_corr = π(N−1)/N − Σ_l φ'_l / N`.
///
/// Fitted phases are reported in `(−π, π]`, so each `φ'_j` is first unwrapped
/// to the branch closest to its nominal value `2πj/N`. Fits flagged as
/// unreliable do not contribute to the average.
pub fn phase_correction(fits: &[FitResult], n: usize) -> Result<PhaseCorrection> {
    if fits.len() != n {
        return Err(FrioError::domain(format!(
            "expected {n} fits, got {}",
            fits.len()
        )));
    }
    let nominal = |j: usize| TAU * j as f64 / n as f64;
    let unwrapped: Vec<f64> = fits
        .iter()
        .enumerate()
        .map(|(j, f)| nominal(j) + wrap_phase(f.phase_raw - nominal(j)))
        .collect();
    let reliable: Vec<usize> = (0..n).filter(|&j| fits[j].phase_reliable).collect();
    let phi_corr = if reliable.is_empty() {
        0.0
    } else {
        let mean_offset = reliable
            .iter()
            .map(|&j| unwrapped[j] - nominal(j))
            .sum::<f64>()
            / reliable.len() as f64;
        -mean_offset
    };
    Ok(PhaseCorrection {
        phi_corr,
        corrected_phases: unwrapped.iter().map(|p| p + phi_corr).collect(),
    })
}

/// Density matrix with diagonal `(cos²θ'_t, sin²θ'_t)` and off-diagonal
/// magnitude `V/2` at phase `φ'+φ_corr`.
pub fn reconstruct_density(theta_target: f64, fit: &FitResult, phi_corr: f64) -> Result<QubitDensity> {
    let theta = crate::states::check_half_angle("theta_target", theta_target)?;
    let v = fit.visibility;
    let v_max = (2.0 * theta).sin();
    if !(v >= 0.0) || v > v_max + VISIBILITY_EXCESS_TOLERANCE {
        return Err(FrioError::Reconstruction(format!(
            "visibility {v:.6} exceeds sin 2θ' = {v_max:.6} by more than {VISIBILITY_EXCESS_TOLERANCE}"
        )));
    }
    let phase = fit.phase_raw + phi_corr;
    let off = phasor(phase) * (0.5 * v);
    let m = Mat2::new(
        real(theta.cos().powi(2)),
        off.conj(),
        off,
        real(theta.sin().powi(2)),
    );
    repair_psd(m)
}

fn repair_psd(m: Mat2) -> Result<QubitDensity> {
    let (vals, vecs) = crate::linalg::hermitian_eigen(&m);
    if vals[0] >= 0.0 {
        return QubitDensity::new(m);
    }
    if vals[0] <= -PSD_REPAIR_LIMIT {
        return Err(FrioError::Reconstruction(format!(
            "reconstructed matrix has eigenvalue {:.4}, beyond the repair limit",
            vals[0]
        )));
    }
    let clipped = [0.0, vals[1].max(0.0)];
    let total: f64 = clipped.iter().sum();
    let d = Mat2::new(
        real(clipped[0] / total),
        c(0.0, 0.0),
        c(0.0, 0.0),
        real(clipped[1] / total),
    );
    let repaired = vecs * d * vecs.adjoint();
    // restore exact Hermiticity lost to rounding
    let repaired = (repaired + repaired.adjoint()) * real(0.5);
    QubitDensity::new(repaired)
}

/// JSON record of one fitted and reconstructed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub i_max: f64,
    pub visibility: f64,
    pub phase_rad: f64,
    /// Row-major real parts of ρ.
    pub rho_re: [f64; 4],
    /// Row-major imaginary parts of ρ.
    pub rho_im: [f64; 4],
}

impl FitRecord {
    pub fn new(fit: &FitResult, rho: &QubitDensity) -> Self {
        let m = rho.matrix();
        let entries = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
        Self {
            i_max: fit.i_max,
            visibility: fit.visibility,
            phase_rad: fit.phase_raw,
            rho_re: entries.map(|z| z.re),
            rho_im: entries.map(|z| z.im),
        }
    }

    pub fn density(&self) -> Result<QubitDensity> {
        let z = |i: usize| c(self.rho_re[i], self.rho_im[i]);
        QubitDensity::new(Mat2::new(z(0), z(1), z(2), z(3)))
    }
}
