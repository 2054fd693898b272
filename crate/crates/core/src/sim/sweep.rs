use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Mode, RunConfig, SchedulePoint};
use super::estimate::{analytic_estimate, estimate_patterns, estimate_tally, EstimateSet};
use super::run::{sample_patterns, sample_tally, PointModel};
use crate::error::{FrioError, Result};
use crate::imperfections::NoiseModel;

/// One line of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub theta_out_deg: f64,
    pub mode: Mode,
    pub p_s: f64,
    pub p_c_beta: f64,
    #[serde(rename = "P_e")]
    pub p_e: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub stderr_ps: f64,
    pub stderr_pc: f64,
}

impl SweepRow {
    fn new(n: usize, point: &SchedulePoint, mode: Mode, e: &EstimateSet) -> Self {
        Self {
            n,
            theta_out_deg: point.theta_out_deg(),
            mode,
            p_s: e.p_s_hat,
            p_c_beta: e.p_c_beta_hat,
            p_e: e.p_e_hat,
            q: e.q_hat,
            stderr_ps: e.stderr.p_s,
            stderr_pc: e.stderr.p_c_beta,
        }
    }
}

/// Estimates for `n` inputs at one schedule point in the given mode.
pub fn estimate_point(
    cfg: &RunConfig,
    n: usize,
    point: SchedulePoint,
    mode: Mode,
    noise: &NoiseModel,
) -> Result<EstimateSet> {
    match mode {
        Mode::Analytic => analytic_estimate(n, cfg.theta(), point.theta_out),
        Mode::Montecarlo => {
            let model = PointModel::new(cfg, n, point, noise)?;
            estimate_tally(&sample_tally(&model, cfg.shots_per_state, cfg.seed))
        }
        Mode::Optical => {
            let model = PointModel::new(cfg, n, point, noise)?;
            estimate_patterns(&sample_patterns(&model, cfg, cfg.seed)?, &cfg.optics)
        }
    }
}

/// Analytic rows, plus rows in `cfg.mode` when it is a sampled mode, for every
/// `N` in `cfg.n_list()` and every schedule point.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let noise = cfg.noise_model()?;
    let points = cfg.schedule_points()?;
    let mut modes = vec![Mode::Analytic];
    if cfg.mode.is_sampled() {
        modes.push(cfg.mode);
    }
    let mut rows = Vec::new();
    for n in cfg.n_list() {
        for mode in &modes {
            for point in &points {
                let e = estimate_point(cfg, n, *point, *mode, &noise)?;
                rows.push(SweepRow::new(n, point, *mode, &e));
            }
        }
    }
    Ok(rows)
}

pub fn sweep_csv_bytes(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| FrioError::Csv(csv::Error::from(e.into_error())))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}
