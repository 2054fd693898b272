use serde::{Deserialize, Serialize};

use super::run::{PatternSet, Tally};
use crate::error::{FrioError, Result};
use crate::optics::{
    fit_pattern, phase_correction, DetectorArray, FitResult, OpticsConfig, PhaseCorrection,
};
use crate::separation::success_probability;
use crate::strategy::me_povm;
use crate::states::separated_state;

/// Per-input estimates: `p_s[j]` and the conditional identification matrix `p_jk`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerState {
    pub p_s: Vec<f64>,
    pub p_jk: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stderr {
    pub p_s: f64,
    pub p_c_beta: f64,
    pub p_e: f64,
    pub q: f64,
}

/// Averaged rates `[p_s]`, `[p_c^β]`, `P_e = p_s(1 − p_c^β)` and `Q = 1 − p_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub p_s_hat: f64,
    pub p_c_beta_hat: f64,
    pub p_e_hat: f64,
    pub q_hat: f64,
    pub per_state: PerState,
    pub stderr: Stderr,
}

impl EstimateSet {
    /// Correct-identification rate `p_s · p_c^β`.
    pub fn p_c_hat(&self) -> f64 {
        self.p_s_hat * self.p_c_beta_hat
    }

    fn from_per_state(per_state: PerState, var_ps: &[f64], var_pjj: &[f64]) -> Self {
        let n = per_state.p_s.len() as f64;
        let p_s_hat = per_state.p_s.iter().sum::<f64>() / n;
        let p_c_beta_hat = (0..per_state.p_s.len())
            .map(|j| per_state.p_jk[j][j])
            .sum::<f64>()
            / n;
        let se_ps = var_ps.iter().sum::<f64>().sqrt() / n;
        let se_pc = var_pjj.iter().sum::<f64>().sqrt() / n;
        let se_pe = ((1.0 - p_c_beta_hat).powi(2) * se_ps.powi(2) + p_s_hat.powi(2) * se_pc.powi(2)).sqrt();
        Self {
            p_s_hat,
            p_c_beta_hat,
            p_e_hat: p_s_hat * (1.0 - p_c_beta_hat),
            q_hat: 1.0 - p_s_hat,
            per_state,
            stderr: Stderr {
                p_s: se_ps,
                p_c_beta: se_pc,
                p_e: se_pe,
                q: se_ps,
            },
        }
    }
}

/// Closed-form values for the ideal two-step strategy.
pub fn analytic_estimate(n: usize, theta: f64, theta_out: f64) -> Result<EstimateSet> {
    let p_s = success_probability(theta, theta_out)?;
    let me = me_povm(n)?;
    let p_jk = (0..n)
        .map(|j| {
            let beta = separated_state(n, j, theta_out)?;
            Ok(me.born(crate::states::to_density(&beta).matrix()))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_state = PerState {
        p_s: vec![p_s; n],
        p_jk,
    };
    let mut est = EstimateSet::from_per_state(per_state, &vec![0.0; n], &vec![0.0; n]);
    // exact closed forms rather than averages of Born probabilities
    est.p_s_hat = p_s;
    est.p_c_beta_hat = (1.0 + (2.0 * theta_out).sin()) / n as f64;
    est.p_e_hat = p_s * (1.0 - est.p_c_beta_hat);
    est.q_hat = 1.0 - p_s;
    Ok(est)
}

/// Estimates from counted shots, with binomial standard errors.
pub fn estimate_tally(tally: &Tally) -> Result<EstimateSet> {
    let n = tally.n;
    if n == 0 || tally.shots.contains(&0) {
        return Err(FrioError::Estimation("every input needs at least one shot".into()));
    }
    let mut p_s = Vec::with_capacity(n);
    let mut p_jk = Vec::with_capacity(n);
    let mut var_ps = Vec::with_capacity(n);
    let mut var_pjj = Vec::with_capacity(n);
    for j in 0..n {
        let m = tally.shots[j] as f64;
        let s = tally.successes[j];
        if s == 0 {
            return Err(FrioError::Estimation(format!(
                "input {j} never reached the success port"
            )));
        }
        let psj = s as f64 / m;
        let row: Vec<f64> = tally.clicks[j].iter().map(|&c| c as f64 / s as f64).collect();
        var_ps.push(psj * (1.0 - psj) / m);
        var_pjj.push(row[j] * (1.0 - row[j]) / s as f64);
        p_s.push(psj);
        p_jk.push(row);
    }
    Ok(EstimateSet::from_per_state(PerState { p_s, p_jk }, &var_ps, &var_pjj))
}

/// Characterization of the success-port frames used by the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnalysis {
    pub fits: Vec<FitResult>,
    pub correction: PhaseCorrection,
}

pub fn analyze_frames(patterns: &PatternSet, cfg: &OpticsConfig) -> Result<FrameAnalysis> {
    let n = patterns.success.len();
    let fits = patterns
        .success
        .iter()
        .map(|p| fit_pattern(p, cfg))
        .collect::<Result<Vec<_>>>()?;
    let correction = phase_correction(&fits, n)?;
    Ok(FrameAnalysis { fits, correction })
}

/// Estimates from camera frames.
///
/// `p_sj = I_j^s/(I_j^s + I_j^f)` from integrated counts, and
/// `p_jk = 𝓘_j^s(x_k)/Σ_l 𝓘_j^s(x_l)` from compensated pixel readings at the
/// phase-corrected detector positions. Standard errors follow from Poisson
/// pixel variances by linear error propagation.
pub fn estimate_patterns(patterns: &PatternSet, cfg: &OpticsConfig) -> Result<EstimateSet> {
    let n = patterns.success.len();
    if n == 0 || patterns.failure.len() != n {
        return Err(FrioError::Estimation("need one success and one failure frame per input".into()));
    }
    let analysis = analyze_frames(patterns, cfg)?;
    let offset = analysis.correction.axis_offset(cfg);
    let detectors = DetectorArray::new(n, cfg)?;
    let bg = patterns.background;

    let mut p_s = Vec::with_capacity(n);
    let mut p_jk = Vec::with_capacity(n);
    let mut var_ps = Vec::with_capacity(n);
    let mut var_pjj = Vec::with_capacity(n);
    for j in 0..n {
        let (succ, fail) = (&patterns.success[j], &patterns.failure[j]);
        let s = succ.total();
        let f = fail.total();
        if !(s + f > 0.0) {
            return Err(FrioError::Estimation(format!("input {j} has zero total intensity")));
        }
        let var_s = s + bg * succ.values.len() as f64;
        let var_f = f + bg * fail.values.len() as f64;
        let psj = s / (s + f);
        var_ps.push((f * f * var_s + s * s * var_f) / (s + f).powi(4));
        p_s.push(psj);

        let mut c = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for (&x, &chi) in detectors.positions.iter().zip(&detectors.compensation) {
            let (value, weights) = succ.interpolate(x + offset)?;
            let var: f64 = weights
                .iter()
                .map(|&(i, w)| w * w * (succ.values[i] + bg))
                .sum();
            c.push(value / chi);
            v.push(var / (chi * chi));
        }
        let total: f64 = c.iter().sum();
        if !(total > 0.0) {
            return Err(FrioError::Estimation(format!(
                "input {j} has zero intensity at every detector"
            )));
        }
        let row: Vec<f64> = c.iter().map(|ck| ck / total).collect();
        let others: f64 = (0..n).filter(|&l| l != j).map(|l| v[l]).sum();
        var_pjj.push(((total - c[j]).powi(2) * v[j] + c[j].powi(2) * others) / total.powi(4));
        p_jk.push(row);
    }
    Ok(EstimateSet::from_per_state(PerState { p_s, p_jk }, &var_ps, &var_pjj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{Mode, RunConfig, Schedule};
    use crate::sim::run::{expected_patterns, run, PointModel, RunOutput};

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    #[test]
    fn analytic_examples() {
        let e = analytic_estimate(2, deg(19.5), deg(19.5)).unwrap();
        assert_eq!(e.p_s_hat, 1.0);
        assert!((e.p_c_beta_hat - 0.814_660_195_524_918_6).abs() < 1e-12);
        assert!((e.p_e_hat - 0.185_339_804_475_081_36).abs() < 1e-12);
        assert_eq!(e.q_hat, 0.0);
        for n in [2, 3, 5, 7] {
            let e = analytic_estimate(n, deg(19.5), deg(45.0)).unwrap();
            assert!((e.p_s_hat - 0.222_854_038_543_029_15).abs() < 1e-12);
            assert!((e.q_hat - 0.777_145_961_456_970_9).abs() < 1e-12);
            let avg: f64 = (0..n).map(|j| e.per_state.p_jk[j][j]).sum::<f64>() / n as f64;
            assert!((avg - e.p_c_beta_hat).abs() < 1e-12);
        }
    }

    #[test]
    fn tally_estimators_and_consistency() {
        let mut t = Tally::new(2);
        t.shots = vec![100, 100];
        t.successes = vec![50, 40];
        t.clicks = vec![vec![40, 10], vec![10, 30]];
        let e = estimate_tally(&t).unwrap();
        assert!((e.p_s_hat - 0.45).abs() < 1e-15);
        assert!((e.p_c_beta_hat - 0.775).abs() < 1e-15);
        assert!((e.p_e_hat - e.p_s_hat * (1.0 - e.p_c_beta_hat)).abs() < 1e-12);
        assert!((e.q_hat - (1.0 - e.p_s_hat)).abs() < 1e-12);
        assert!((e.p_e_hat + e.p_c_hat() + e.q_hat - 1.0).abs() < 1e-15);
        let se = (0.25f64 / 100.0 + 0.24 / 100.0).sqrt() / 2.0;
        assert!((e.stderr.p_s - se).abs() < 1e-15);

        t.successes[1] = 0;
        t.clicks[1] = vec![0, 0];
        assert!(matches!(estimate_tally(&t), Err(FrioError::Estimation(_))));
    }

    #[test]
    fn noiseless_frames_reproduce_born_rule() {
        let cfg = RunConfig {
            n_states: 5,
            schedule: Schedule::AnglesDeg(vec![29.5]),
            ..RunConfig::default()
        };
        let noise = cfg.noise_model().unwrap();
        let point = cfg.schedule_points().unwrap()[0];
        let model = PointModel::new(&cfg, 5, point, &noise).unwrap();
        let frames = expected_patterns(&model, &cfg, 1e4).unwrap();
        let est = estimate_patterns(&frames, &cfg.optics).unwrap();
        let exact = analytic_estimate(5, cfg.theta(), point.theta_out).unwrap();
        // pixel sums carry the small window-truncation bias of the fringe term
        assert!((est.p_s_hat - exact.p_s_hat).abs() < 1e-3);
        for j in 0..5 {
            for k in 0..5 {
                let d = est.per_state.p_jk[j][k] - exact.per_state.p_jk[j][k];
                assert!(d.abs() < 1e-3, "j={j} k={k} {d}");
            }
        }
    }

    #[test]
    fn optical_and_montecarlo_modes_agree() {
        let base = RunConfig {
            n_states: 3,
            schedule: Schedule::AnglesDeg(vec![34.2]),
            shots_per_state: 100_000,
            seed: 3,
            ..RunConfig::default()
        };
        let mc = run(&RunConfig {
            mode: Mode::Montecarlo,
            ..base.clone()
        })
        .unwrap();
        let opt = run(&RunConfig {
            mode: Mode::Optical,
            ..base.clone()
        })
        .unwrap();
        let RunOutput::Records(records) = &mc[0].output else { panic!() };
        let RunOutput::Patterns(frames) = &opt[0].output else { panic!() };
        let a = estimate_tally(&Tally::from_records(3, records).unwrap()).unwrap();
        let b = estimate_patterns(frames, &base.optics).unwrap();
        let sigma = |x: f64, y: f64| (x * x + y * y).sqrt();
        assert!((a.p_s_hat - b.p_s_hat).abs() < 3.0 * sigma(a.stderr.p_s, b.stderr.p_s));
        assert!(
            (a.p_c_beta_hat - b.p_c_beta_hat).abs()
                < 3.0 * sigma(a.stderr.p_c_beta, b.stderr.p_c_beta)
        );
    }
}
