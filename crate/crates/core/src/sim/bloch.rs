use serde::{Deserialize, Serialize};

use super::config::{Mode, RunConfig};
use super::estimate::analyze_frames;
use super::run::{expected_patterns, sample_patterns, PointModel};
use crate::error::Result;
use crate::optics::{reconstruct_density, FitRecord};
use crate::states::bloch;

/// Reconstructed separated state of one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub j: usize,
    pub visibility: f64,
    /// Corrected fringe phase `φ'_j + φ_corr`.
    pub phase_rad: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub azimuth: f64,
    pub transverse_radius: f64,
    pub rho_re: [f64; 4],
    pub rho_im: [f64; 4],
}

/// All inputs after separation to one target angle: a parallel of the Bloch sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochParallel {
    pub n: usize,
    pub theta_out_deg: f64,
    /// Radius of the ideal parallel, `sin 2θ'`.
    pub ideal_radius: f64,
    pub mean_radius: f64,
    pub phi_corr: f64,
    pub states: Vec<BlochState>,
}

/// Fit and reconstruct every separated state along the schedule for
/// `cfg.n_states` inputs. Frames carry shot noise in optical mode and are
/// noiseless otherwise.
pub fn characterize(cfg: &RunConfig) -> Result<Vec<BlochParallel>> {
    cfg.validate()?;
    let noise = cfg.noise_model()?;
    let n = cfg.n_states;
    cfg.schedule_points()?
        .into_iter()
        .map(|point| {
            let model = PointModel::new(cfg, n, point, &noise)?;
            let frames = if cfg.mode == Mode::Optical {
                sample_patterns(&model, cfg, cfg.seed)?
            } else {
                expected_patterns(&model, cfg, cfg.peak_counts)?
            };
            let analysis = analyze_frames(&frames, &cfg.optics)?;
            let phi_corr = analysis.correction.phi_corr;
            let states = analysis
                .fits
                .iter()
                .enumerate()
                .map(|(j, fit)| {
                    let rho = reconstruct_density(point.theta_out, fit, phi_corr)?;
                    let b = bloch(&rho);
                    let rec = FitRecord::new(fit, &rho);
                    Ok(BlochState {
                        j,
                        visibility: fit.visibility,
                        phase_rad: analysis.correction.corrected_phases[j],
                        x: b.x,
                        y: b.y,
                        z: b.z,
                        azimuth: b.azimuth(),
                        transverse_radius: b.transverse_radius(),
                        rho_re: rec.rho_re,
                        rho_im: rec.rho_im,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mean_radius =
                states.iter().map(|s| s.transverse_radius).sum::<f64>() / n as f64;
            Ok(BlochParallel {
                n,
                theta_out_deg: point.theta_out_deg(),
                ideal_radius: (2.0 * point.theta_out).sin(),
                mean_radius,
                phi_corr,
                states,
            })
        })
        .collect()
}
