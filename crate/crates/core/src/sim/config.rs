use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FrioError, Result};
use crate::imperfections::{
    default_table, theta_from_gray, CalibrationTable, NoiseModel, DEFAULT_EPSILON_MAX,
    REFERENCE_ANCHORS, REFERENCE_THETA_DEG,
};
use crate::optics::OpticsConfig;
use crate::oracle::OracleConfig;
use crate::states::check_state_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Analytic,
    Montecarlo,
    Optical,
}

impl Mode {
    pub fn is_sampled(self) -> bool {
        self != Mode::Analytic
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Analytic => "analytic",
            Mode::Montecarlo => "montecarlo",
            Mode::Optical => "optical",
        })
    }
}

impl FromStr for Mode {
    type Err = FrioError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Mode::Analytic),
            "montecarlo" => Ok(Mode::Montecarlo),
            "optical" => Ok(Mode::Optical),
            other => Err(FrioError::config(format!(
                "unknown mode `{other}` (expected analytic, montecarlo or optical)"
            ))),
        }
    }
}

/// Separation targets, given either as angles or as gray levels of the LCD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    AnglesDeg(Vec<f64>),
    GrayLevels(Vec<u8>),
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::AnglesDeg(REFERENCE_ANCHORS.iter().map(|a| a.1).collect())
    }
}

impl Schedule {
    pub fn len(&self) -> usize {
        match self {
            Schedule::AnglesDeg(v) => v.len(),
            Schedule::GrayLevels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Apply `ε(gl)` from the calibration table.
    pub depolarization: bool,
    /// Top of the default depolarization ramp; ignored with a calibration file.
    pub epsilon_max: f64,
    pub phase_resolution: f64,
    pub crosstalk: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            depolarization: false,
            epsilon_max: DEFAULT_EPSILON_MAX,
            phase_resolution: 0.0,
            crosstalk: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesConfig {
    /// Number of evenly spaced `Q` values in `[0, Q^MC]`.
    pub q_points: usize,
}

impl Default for CurvesConfig {
    fn default() -> Self {
        Self { q_points: 101 }
    }
}

/// Complete description of a simulated experiment, loaded from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Number of symmetric states for single-N commands.
    pub n_states: usize,
    /// State counts covered by `sweep` and `curves`; empty means `[n_states]`.
    pub n_values: Vec<usize>,
    pub theta_deg: f64,
    pub schedule: Schedule,
    pub shots_per_state: u64,
    pub seed: u64,
    pub mode: Mode,
    pub noise: NoiseConfig,
    pub optics: OpticsConfig,
    /// Mean count of the brightest camera pixel in optical mode.
    pub peak_counts: f64,
    /// Constant camera background added before Poisson sampling and subtracted after.
    pub background_offset: f64,
    /// CSV calibration table; the synthetic default table is used when absent.
    pub calibration_path: Option<PathBuf>,
    pub curves: CurvesConfig,
    pub oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_states: 3,
            n_values: vec![2, 3, 5, 7],
            theta_deg: REFERENCE_THETA_DEG,
            schedule: Schedule::default(),
            shots_per_state: 100_000,
            seed: 0,
            mode: Mode::Analytic,
            noise: NoiseConfig::default(),
            optics: OpticsConfig::default(),
            peak_counts: 1e4,
            background_offset: 0.0,
            calibration_path: None,
            curves: CurvesConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

/// One resolved entry of the separation schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub index: usize,
    pub theta_out: f64,
    /// Gray level realizing `theta_out`, when the calibration reaches it.
    pub gray_level: Option<f64>,
    /// Phase imprinted by the LCD, used as the ensemble's fiducial phase.
    pub phi: f64,
}

impl SchedulePoint {
    pub fn theta_out_deg(&self) -> f64 {
        self.theta_out.to_degrees()
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn theta(&self) -> f64 {
        self.theta_deg.to_radians()
    }

    pub fn n_list(&self) -> Vec<usize> {
        if self.n_values.is_empty() {
            vec![self.n_states]
        } else {
            self.n_values.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_state_count(self.n_states)?;
        for &n in &self.n_values {
            check_state_count(n)?;
        }
        if !(self.theta_deg > 0.0 && self.theta_deg <= 45.0) {
            return Err(FrioError::config(format!(
                "theta_deg = {} must lie in (0, 45]",
                self.theta_deg
            )));
        }
        if self.shots_per_state < 1 {
            return Err(FrioError::config("shots_per_state must be at least 1"));
        }
        if self.schedule.is_empty() {
            return Err(FrioError::config("separation schedule is empty"));
        }
        if let Schedule::AnglesDeg(angles) = &self.schedule {
            for &a in angles {
                if !(a >= self.theta_deg - 1e-9 && a <= 45.0 + 1e-9) {
                    return Err(FrioError::config(format!(
                        "schedule angle {a}° outside [{}°, 45°]",
                        self.theta_deg
                    )));
                }
            }
        }
        if !(self.peak_counts > 0.0 && self.peak_counts.is_finite()) {
            return Err(FrioError::config("peak_counts must be positive"));
        }
        if !(self.background_offset >= 0.0 && self.background_offset.is_finite()) {
            return Err(FrioError::config("background_offset must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.noise.epsilon_max) {
            return Err(FrioError::config("noise.epsilon_max must lie in [0, 1]"));
        }
        if self.curves.q_points < 2 {
            return Err(FrioError::config("curves.q_points must be at least 2"));
        }
        self.optics.validate()?;
        self.noise_model_with(None)?.validate()?;
        self.oracle.validate()?;
        Ok(())
    }

    /// Calibration table from `calibration_path`, or the synthetic default.
    pub fn calibration_table(&self) -> Result<CalibrationTable> {
        match &self.calibration_path {
            Some(p) => CalibrationTable::from_path(p),
            None => default_table(self.theta(), self.noise.epsilon_max),
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let table = if self.noise.depolarization {
            Some(self.calibration_table()?)
        } else {
            None
        };
        self.noise_model_with(table)
    }

    fn noise_model_with(&self, table: Option<CalibrationTable>) -> Result<NoiseModel> {
        Ok(NoiseModel {
            depolarization: table,
            phase_resolution: self.noise.phase_resolution,
            crosstalk: self.noise.crosstalk,
        })
    }

    /// Resolve the schedule into separation angles, gray levels and phases.
    pub fn schedule_points(&self) -> Result<Vec<SchedulePoint>> {
        let theta = self.theta();
        let table = self.calibration_table()?;
        let wrap = |p: f64| p.rem_euclid(2.0 * PI);
        match &self.schedule {
            Schedule::AnglesDeg(angles) => angles
                .iter()
                .enumerate()
                .map(|(index, &a)| {
                    let theta_out = a.to_radians().clamp(theta, PI / 4.0);
                    let gray_level = table.gray_for_theta(theta, theta_out).ok();
                    if gray_level.is_none() && self.noise.depolarization {
                        return Err(FrioError::config(format!(
                            "separation angle {a}° is not reachable with the calibration table"
                        )));
                    }
                    let phi = match gray_level {
                        Some(g) => wrap(table.at(g)?.phase_rad),
                        None => 0.0,
                    };
                    Ok(SchedulePoint {
                        index,
                        theta_out,
                        gray_level,
                        phi,
                    })
                })
                .collect(),
            Schedule::GrayLevels(levels) => levels
                .iter()
                .enumerate()
                .map(|(index, &gl)| {
                    let theta_out = theta_from_gray(gl, theta, &table).map_err(|e| {
                        FrioError::config(format!("gray level {gl}: {e}"))
                    })?;
                    if theta_out < theta - 1e-12 {
                        return Err(FrioError::config(format!(
                            "gray level {gl} gives θ' below θ"
                        )));
                    }
                    Ok(SchedulePoint {
                        index,
                        theta_out: theta_out.max(theta),
                        gray_level: Some(gl as f64),
                        phi: wrap(table.at(gl as f64)?.phase_rad),
                    })
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_json("{}").unwrap(), cfg);
    }

    #[test]
    fn schedule_forms() {
        let cfg = RunConfig::from_json(r#"{"schedule": {"gray_levels": [0, 163, 255]}}"#).unwrap();
        let pts = cfg.schedule_points().unwrap();
        assert!((pts[1].theta_out_deg() - 25.5).abs() < 1e-9);
        assert!((pts[2].theta_out_deg() - 45.0).abs() < 1e-9);
        assert!((pts[2].phi - 0.61 * PI).abs() < 1e-12);

        let cfg = RunConfig::default();
        let pts = cfg.schedule_points().unwrap();
        assert_eq!(pts.len(), 7);
        for (p, (gl, angle, phase)) in pts.iter().zip(REFERENCE_ANCHORS) {
            assert!((p.gray_level.unwrap() - gl as f64).abs() < 1e-6);
            assert!((p.theta_out_deg() - angle).abs() < 1e-12);
            assert!((p.phi - phase * PI).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_configs_are_validation_errors() {
        let bad = [
            r#"{"shots_per_state": 0}"#,
            r#"{"n_states": 1}"#,
            r#"{"n_values": [2, 65]}"#,
            r#"{"theta_deg": 50}"#,
            r#"{"schedule": {"angles_deg": [10.0]}}"#,
            r#"{"schedule": {"angles_deg": []}}"#,
            r#"{"schedule": {"gray_levels": [300]}}"#,
            r#"{"noise": {"crosstalk": 0.2}}"#,
            r#"{"mode": "quantum"}"#,
            r#"{"unknown_key": 1}"#,
        ];
        for text in bad {
            let err = RunConfig::from_json(text).unwrap_err();
            assert!(err.is_validation(), "{text}: {err}");
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("optical".parse::<Mode>().unwrap(), Mode::Optical);
        assert!("x".parse::<Mode>().is_err());
        assert_eq!(Mode::Montecarlo.to_string(), "montecarlo");
    }
}
