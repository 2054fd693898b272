use std::io::Read;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{FrioError, Result};
use crate::imperfections::{theta_from_gray, CalibrationTable};
use crate::optics::{reconstruct_density, FitRecord, FitResult};
use crate::oracle::{run_suite, OracleReport};
use crate::sim::{BlochParallel, Mode, RunConfig, SchedulePoint};
use crate::strategy::{pe_min, q_mc};

/// One point of a minimum-error curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "P_e_min")]
    pub p_e_min: f64,
}

/// `P_e^min(Q)` on an even grid over `[0, Q^MC]` for each configured N.
pub fn curve_rows(cfg: &RunConfig) -> Result<Vec<CurveRow>> {
    let theta = cfg.theta();
    let qmc = q_mc(theta)?;
    let m = cfg.curves.q_points;
    if m < 2 {
        return Err(FrioError::config("curves.q_points must be at least 2"));
    }
    let mut rows = Vec::with_capacity(m * cfg.n_list().len());
    for n in cfg.n_list() {
        for i in 0..m {
            let q = if i + 1 == m { qmc } else { qmc * i as f64 / (m - 1) as f64 };
            rows.push(CurveRow {
                n,
                q,
                p_e_min: pe_min(n, q, qmc)?,
            });
        }
    }
    Ok(rows)
}

/// Calibration row echoed with the separation angle it realizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEcho {
    pub gl: u8,
    pub p_v: f64,
    pub phase_rad: f64,
    pub epsilon: f64,
    pub theta_out_deg: f64,
}

pub fn calibration_rows(table: &CalibrationTable, theta: f64) -> Result<Vec<CalibrationEcho>> {
    table
        .rows()
        .iter()
        .map(|r| {
            Ok(CalibrationEcho {
                gl: r.gl,
                p_v: r.p_v,
                phase_rad: r.phase_rad,
                epsilon: r.epsilon,
                theta_out_deg: theta_from_gray(r.gl, theta, table)?.to_degrees(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochReport {
    pub n: usize,
    pub theta_deg: f64,
    pub mode: Mode,
    pub parallels: Vec<BlochParallel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub theta_deg: f64,
    pub gap_min: f64,
    pub gap_max: f64,
    pub pass: bool,
    pub reports: Vec<OracleReport>,
}

impl OracleOutput {
    pub fn run(cfg: &RunConfig) -> Result<Self> {
        let reports = run_suite(cfg.theta(), &cfg.oracle)?;
        let (gap_min, gap_max) = (cfg.oracle.gap_min, cfg.oracle.gap_max);
        Ok(Self {
            theta_deg: cfg.theta_deg,
            gap_min,
            gap_max,
            pass: reports.iter().all(|r| r.within(gap_min, gap_max)),
            reports,
        })
    }
}

/// Fit and reconstruction of one success-branch frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDemoRecord {
    pub point: usize,
    pub theta_out_deg: f64,
    pub j: usize,
    pub phi_corr: f64,
    pub residual: f64,
    pub phase_reliable: bool,
    #[serde(flatten)]
    pub fit: FitRecord,
}

impl FitDemoRecord {
    pub fn new(point: &SchedulePoint, j: usize, fit: &FitResult, phi_corr: f64) -> Result<Self> {
        let rho = reconstruct_density(point.theta_out, fit, phi_corr)?;
        Ok(Self {
            point: point.index,
            theta_out_deg: point.theta_out.to_degrees(),
            j,
            phi_corr,
            residual: fit.residual,
            phase_reliable: fit.phase_reliable,
            fit: FitRecord::new(fit, &rho),
        })
    }
}

pub(crate) fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| FrioError::io("<memory>", e.into_error()))
}

fn read_rows<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(FrioError::from))
        .collect()
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let f = std::fs::File::open(path).map_err(|e| FrioError::io(path, e))?;
    read_rows(f)
}

pub fn read_calibration_csv(path: &Path) -> Result<Vec<CalibrationEcho>> {
    let f = std::fs::File::open(path).map_err(|e| FrioError::io(path, e))?;
    read_rows(f)
}
