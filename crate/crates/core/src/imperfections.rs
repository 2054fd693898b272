//! Gray-level calibration of the spatial light modulator and the device
//! non-idealities it brings: ancilla depolarization, finite phase resolution
//! and polarizing beam splitter crosstalk.
//!
//! A calibration table lists, per gray level, the measured probability `P_v`
//! that a vertically polarized beam stays vertical, the phase imprinted on the
//! mode and the depolarization `ε`. The separation angle reached at a gray level
//! follows from `θ'(gl) = arctan(tan θ / √P_v(gl))`.
//!
//! Depolarization is modelled as `(1 − ε)|p⟩⟨p| + ε I/2` on the ancilla of the
//! addressed mode. Because the tabulated `P_v` is the measured one, the rotation
//! actually applied satisfies `(1 − ε) ξ² + ε/2 = P_v`.

use std::f64::consts::TAU;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FrioError, Result};
use crate::linalg::{phasor, real, Mat2, Mat4, C64};
use crate::optics::Branch;
use crate::separation::{
    attach_ancilla, check_compatible, coupling_with_rotation, SeparationMap, IDX_0H, IDX_0V,
    IDX_1H, IDX_1V,
};
use crate::states::{check_half_angle, PureQubit, QubitDensity, SymmetricEnsemble};

/// Maximum PBS crosstalk accepted by [`NoiseModel`].
pub const MAX_CROSSTALK: f64 = 0.05;

/// Versioned reference calibration: `gl,p_v,phase_rad,epsilon`.
pub const REFERENCE_TABLE_CSV: &str = include_str!("../data/reference_calibration_v1.csv");

/// Gray levels, target separation angles (degrees) and phase shifts (units of π)
/// used for `θ = 19.5°`.
pub const REFERENCE_ANCHORS: [(u8, f64, f64); 7] = [
    (0, 19.5, 0.0),
    (142, 22.6, 0.23),
    (163, 25.5, 0.32),
    (180, 29.5, 0.40),
    (195, 34.2, 0.48),
    (214, 40.0, 0.56),
    (255, 45.0, 0.61),
];

/// Input angle for which [`REFERENCE_ANCHORS`] was designed.
pub const REFERENCE_THETA_DEG: f64 = 19.5;

/// Gray level above which the default depolarization ramp starts.
pub const EPSILON_RAMP_START: u8 = 195;

/// Default maximum depolarization at gray level 255.
pub const DEFAULT_EPSILON_MAX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub gl: u8,
    pub p_v: f64,
    pub phase_rad: f64,
    pub epsilon: f64,
}

/// Calibration values interpolated at a (possibly fractional) gray level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub gl: f64,
    pub p_v: f64,
    pub phase_rad: f64,
    pub epsilon: f64,
}

/// Piecewise-linear calibration through a list of gray-level rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    rows: Vec<CalibrationRow>,
}

impl CalibrationTable {
    pub fn new(rows: Vec<CalibrationRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(FrioError::config("calibration table has no rows"));
        }
        for r in &rows {
            if !(r.p_v > 0.0 && r.p_v <= 1.0) {
                return Err(FrioError::config(format!(
                    "gl {}: p_v = {} outside (0, 1]",
                    r.gl, r.p_v
                )));
            }
            if !(0.0..=1.0).contains(&r.epsilon) {
                return Err(FrioError::config(format!(
                    "gl {}: epsilon = {} outside [0, 1]",
                    r.gl, r.epsilon
                )));
            }
            if !r.phase_rad.is_finite() {
                return Err(FrioError::config(format!("gl {}: phase is not finite", r.gl)));
            }
        }
        for w in rows.windows(2) {
            if w[1].gl <= w[0].gl {
                return Err(FrioError::config(format!(
                    "gray levels must be strictly increasing ({} after {})",
                    w[1].gl, w[0].gl
                )));
            }
            if w[1].p_v > w[0].p_v {
                return Err(FrioError::config(format!(
                    "p_v must not increase with gray level (gl {}: {} > {})",
                    w[1].gl, w[1].p_v, w[0].p_v
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[CalibrationRow] {
        &self.rows
    }

    pub fn gray_range(&self) -> (u8, u8) {
        (self.rows[0].gl, self.rows[self.rows.len() - 1].gl)
    }

    /// Reference calibration shipped with the crate.
    pub fn reference() -> Self {
        Self::from_reader(REFERENCE_TABLE_CSV.as_bytes()).expect("bundled fixture is valid")
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let expected = ["gl", "p_v", "phase_rad", "epsilon"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(FrioError::config(format!(
                "calibration header must be `{}`, got `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows = r
            .deserialize::<CalibrationRow>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| FrioError::config(format!("bad calibration row: {e}")))?;
        Self::new(rows)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| FrioError::io(path, e))?;
        Self::from_reader(f)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner()
            .map_err(|e| FrioError::Csv(csv::Error::from(e.into_error())))
    }

    /// Linear interpolation at gray level `gl`.
    pub fn at(&self, gl: f64) -> Result<CalibrationPoint> {
        let (lo, hi) = self.gray_range();
        if !(gl >= lo as f64 && gl <= hi as f64) {
            return Err(FrioError::domain(format!(
                "gray level {gl} outside the calibrated range [{lo}, {hi}]"
            )));
        }
        let i = self
            .rows
            .windows(2)
            .position(|w| gl <= w[1].gl as f64)
            .unwrap_or(0);
        if self.rows.len() == 1 {
            let r = self.rows[0];
            return Ok(CalibrationPoint {
                gl,
                p_v: r.p_v,
                phase_rad: r.phase_rad,
                epsilon: r.epsilon,
            });
        }
        let (a, b) = (self.rows[i], self.rows[i + 1]);
        let t = (gl - a.gl as f64) / (b.gl as f64 - a.gl as f64);
        let lerp = |x: f64, y: f64| x + t * (y - x);
        Ok(CalibrationPoint {
            gl,
            p_v: lerp(a.p_v, b.p_v),
            phase_rad: lerp(a.phase_rad, b.phase_rad),
            epsilon: lerp(a.epsilon, b.epsilon),
        })
    }

    /// Smallest (fractional) gray level whose interpolated `P_v` equals `p_v`.
    pub fn gray_for_p_v(&self, p_v: f64) -> Result<f64> {
        let first = self.rows[0];
        if (p_v - first.p_v).abs() <= 1e-12 {
            return Ok(first.gl as f64);
        }
        for w in self.rows.windows(2) {
            let (a, b) = (w[0], w[1]);
            if p_v <= a.p_v && p_v >= b.p_v - 1e-12 {
                if a.p_v == b.p_v {
                    return Ok(a.gl as f64);
                }
                let t = ((a.p_v - p_v) / (a.p_v - b.p_v)).clamp(0.0, 1.0);
                return Ok(a.gl as f64 + t * (b.gl as f64 - a.gl as f64));
            }
        }
        Err(FrioError::domain(format!(
            "P_v = {p_v} is not reachable with this calibration table"
        )))
    }

    /// Gray level that realizes separation angle `theta_out` from `theta`.
    pub fn gray_for_theta(&self, theta: f64, theta_out: f64) -> Result<f64> {
        let theta = check_half_angle("theta", theta)?;
        let theta_out = check_half_angle("theta_out", theta_out)?;
        if theta == 0.0 || theta_out < theta - 1e-12 {
            return Err(FrioError::domain("theta_out must satisfy 0 < theta ≤ theta_out"));
        }
        let p_v = (theta.tan() / theta_out.tan()).powi(2).min(1.0);
        self.gray_for_p_v(p_v)
    }
}

/// Default depolarization ramp: zero up to gl 195, linear to `epsilon_max` at gl 255.
pub fn default_epsilon(gl: f64, epsilon_max: f64) -> f64 {
    let start = EPSILON_RAMP_START as f64;
    if gl <= start {
        0.0
    } else {
        epsilon_max * (gl - start) / (255.0 - start)
    }
}

/// Synthetic table through the reference anchors for input angle `theta`.
///
/// `P_v` at each anchor is `tan²θ / tan²θ'_t`, so the anchors reproduce the
/// target angles exactly; phases are the published ones.
pub fn default_table(theta: f64, epsilon_max: f64) -> Result<CalibrationTable> {
    let theta = check_half_angle("theta", theta)?;
    if !(0.0..=1.0).contains(&epsilon_max) {
        return Err(FrioError::config(format!("epsilon_max = {epsilon_max} outside [0, 1]")));
    }
    let rows = REFERENCE_ANCHORS
        .iter()
        .map(|&(gl, angle_deg, phase_pi)| {
            let target = angle_deg.to_radians().max(theta);
            let p_v = if gl == 0 {
                1.0
            } else {
                (theta.tan() / target.tan()).powi(2).min(1.0)
            };
            CalibrationRow {
                gl,
                p_v,
                phase_rad: phase_pi * std::f64::consts::PI,
                epsilon: default_epsilon(gl as f64, epsilon_max),
            }
        })
        .collect();
    CalibrationTable::new(rows)
}

/// Separation angle reached at a gray level: `arctan(tan θ / √P_v)`.
pub fn theta_from_gray(gl: u8, theta: f64, table: &CalibrationTable) -> Result<f64> {
    theta_from_gray_level(gl as f64, theta, table)
}

pub fn theta_from_gray_level(gl: f64, theta: f64, table: &CalibrationTable) -> Result<f64> {
    let theta = check_half_angle("theta", theta)?;
    let p_v = table.at(gl)?.p_v;
    theta_from_p_v(theta, p_v)
}

fn theta_from_p_v(theta: f64, p_v: f64) -> Result<f64> {
    if p_v <= 0.0 {
        return Err(FrioError::domain("P_v = 0 would require θ' = π/2"));
    }
    Ok((theta.tan() / p_v.sqrt()).atan())
}

/// Ancilla state `(1 − ε)|p⟩⟨p| + ε I/2` in the `(h, v)` basis, where `|p⟩` is
/// the ancilla rotated by the map's coupling.
pub fn depolarized_ancilla(map: &SeparationMap, epsilon: f64) -> Result<Mat2> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(FrioError::domain(format!("epsilon = {epsilon} outside [0, 1]")));
    }
    let (xi, tau) = (map.xi(), map.tau());
    let pure = Mat2::new(
        real(tau * tau),
        real(tau * xi),
        real(tau * xi),
        real(xi * xi),
    );
    Ok(pure * real(1.0 - epsilon) + Mat2::identity() * real(0.5 * epsilon))
}

/// Device imperfections applied on top of the ideal separation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseModel {
    /// Calibration table supplying `ε(gl)`; `None` disables depolarization.
    pub depolarization: Option<CalibrationTable>,
    /// Quantization step of preparable azimuths (rad); 0 means continuous.
    pub phase_resolution: f64,
    /// Fraction of the `h` port leaking into the success port and vice versa.
    pub crosstalk: f64,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phase_resolution >= 0.0) || !self.phase_resolution.is_finite() {
            return Err(FrioError::config(format!(
                "phase_resolution = {} must be a finite non-negative angle",
                self.phase_resolution
            )));
        }
        if !(0.0..=MAX_CROSSTALK).contains(&self.crosstalk) {
            return Err(FrioError::config(format!(
                "crosstalk = {} outside [0, {MAX_CROSSTALK}]",
                self.crosstalk
            )));
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        self.depolarization.is_none() && self.phase_resolution == 0.0 && self.crosstalk == 0.0
    }
}

/// Round `phase` (taken modulo 2π) to the nearest multiple of `resolution`.
pub fn quantize_phase(phase: f64, resolution: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    if resolution <= 0.0 {
        p
    } else {
        (p / resolution).round() * resolution
    }
}

/// Joint state after the noisy coupling and the two PBS output branches.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOutcome {
    /// System ⊗ ancilla density in the `{|0h⟩, |0v⟩, |1h⟩, |1v⟩}` basis.
    pub joint: Mat4,
    pub p_success: f64,
    pub p_failure: f64,
    /// Normalized success-port state; `None` when the port receives no light.
    pub success: Option<QubitDensity>,
    pub failure: Option<QubitDensity>,
    /// Depolarization applied.
    pub epsilon: f64,
}

impl NoisyOutcome {
    pub fn branch(&self, branch: Branch) -> (f64, Option<&QubitDensity>) {
        match branch {
            Branch::Success => (self.p_success, self.success.as_ref()),
            Branch::Failure => (self.p_failure, self.failure.as_ref()),
        }
    }
}

/// Run input `state_index` through the separation stage with device noise.
///
/// `gl` is the gray level that realizes the map; it is required when
/// depolarization is enabled and must reproduce `map.theta_out()` through the
/// table.
pub fn noisy_separation(
    state_index: usize,
    ensemble: &SymmetricEnsemble,
    map: &SeparationMap,
    noise: &NoiseModel,
    gl: Option<f64>,
) -> Result<NoisyOutcome> {
    noise.validate()?;
    check_compatible(ensemble, map)?;
    let n = ensemble.n();
    if state_index >= n {
        return Err(FrioError::IndexOutOfRange {
            index: state_index,
            n,
        });
    }

    let (epsilon, xi) = match &noise.depolarization {
        None => (0.0, map.xi()),
        Some(table) => {
            let gl = gl.ok_or_else(|| {
                FrioError::config("depolarization needs the gray level of the separation")
            })?;
            let point = table.at(gl)?;
            let reached = theta_from_p_v(map.theta_in(), point.p_v)?;
            if (reached - map.theta_out()).abs() > 1e-9 {
                return Err(FrioError::config(format!(
                    "gray level {gl} realizes θ' = {:.6}°, map expects {:.6}°",
                    reached.to_degrees(),
                    map.theta_out().to_degrees()
                )));
            }
            (point.epsilon, applied_rotation(point.p_v, point.epsilon)?)
        }
    };

    let theta = ensemble.theta();
    let azimuth = quantize_phase(
        ensemble.phi() + TAU * state_index as f64 / n as f64,
        noise.phase_resolution,
    );
    let input = PureQubit::new(real(theta.cos()), phasor(azimuth) * theta.sin())?;
    let psi = coupling_with_rotation(xi, map.phi()).apply(&attach_ancilla(&input));

    let pure = psi * psi.adjoint();
    let (w0, w1) = (input.amp0().norm_sqr(), input.amp1().norm_sqr());
    let mut twirl = Mat4::zeros();
    twirl[(IDX_0H, IDX_0H)] = real(0.5 * w0);
    twirl[(IDX_0V, IDX_0V)] = real(0.5 * w0);
    twirl[(IDX_1V, IDX_1V)] = real(w1);
    let joint = pure * real(1.0 - epsilon) + twirl * real(epsilon);

    let v_part = project(&joint, IDX_0V, IDX_1V);
    let h_part = project(&joint, IDX_0H, IDX_1H);
    let c = noise.crosstalk;
    let success = v_part * real(1.0 - c) + h_part * real(c);
    let failure = h_part * real(1.0 - c) + v_part * real(c);
    let (p_success, success) = normalize(success)?;
    let (p_failure, failure) = normalize(failure)?;
    Ok(NoisyOutcome {
        joint,
        p_success,
        p_failure,
        success,
        failure,
        epsilon,
    })
}

/// `ξ` of the rotation that yields measured `P_v` under depolarization `ε`.
fn applied_rotation(p_v: f64, epsilon: f64) -> Result<f64> {
    if epsilon >= 1.0 {
        return Ok(1.0);
    }
    let xi2 = (p_v - 0.5 * epsilon) / (1.0 - epsilon);
    if !(-1e-12..=1.0 + 1e-12).contains(&xi2) {
        return Err(FrioError::config(format!(
            "P_v = {p_v} is incompatible with depolarization ε = {epsilon}"
        )));
    }
    Ok(xi2.clamp(0.0, 1.0).sqrt())
}

fn project(joint: &Mat4, i0: usize, i1: usize) -> Mat2 {
    Mat2::new(joint[(i0, i0)], joint[(i0, i1)], joint[(i1, i0)], joint[(i1, i1)])
}

fn normalize(m: Mat2) -> Result<(f64, Option<QubitDensity>)> {
    let w = m[(0, 0)].re + m[(1, 1)].re;
    if w <= 1e-15 {
        return Ok((w.max(0.0), None));
    }
    let h = (m + m.adjoint()) * C64::new(0.5 / w, 0.0);
    Ok((w, Some(QubitDensity::new(h)?)))
}
