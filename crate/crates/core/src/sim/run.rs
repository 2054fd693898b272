use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Mode, RunConfig, SchedulePoint};
use crate::error::{FrioError, Result};
use crate::imperfections::{noisy_separation, NoiseModel};
use crate::optics::{pattern_on_grid, pointlike_probabilities, Branch, DetectorArray, IntensityPattern};
use crate::separation::SeparationMap;
use crate::states::{symmetric_ensemble, QubitDensity};

/// One prepared input and what happened to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub prepared: usize,
    pub branch: Branch,
    /// Clicked detector; present exactly when the branch is `Success`.
    pub detector: Option<usize>,
}

/// Branch weights and states of one input at one schedule point.
#[derive(Debug, Clone, PartialEq)]
pub struct StateModel {
    pub p_success: f64,
    pub p_failure: f64,
    pub success: Option<QubitDensity>,
    pub failure: Option<QubitDensity>,
    /// Compensated detector probabilities in the success branch.
    pub detector_probs: Vec<f64>,
}

/// Exact physics of all inputs at one schedule point, before any sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct PointModel {
    pub n: usize,
    pub point: SchedulePoint,
    pub states: Vec<StateModel>,
}

impl PointModel {
    pub fn new(cfg: &RunConfig, n: usize, point: SchedulePoint, noise: &NoiseModel) -> Result<Self> {
        let ensemble = symmetric_ensemble(n, cfg.theta(), point.phi)?;
        let map = SeparationMap::for_ensemble(&ensemble, point.theta_out)?;
        let detectors = DetectorArray::new(n, &cfg.optics)?;
        let states = (0..n)
            .map(|j| {
                let out = noisy_separation(j, &ensemble, &map, noise, point.gray_level)?;
                let detector_probs = match &out.success {
                    Some(rho) => pointlike_probabilities(rho.matrix(), &cfg.optics, &detectors),
                    None => vec![0.0; n],
                };
                Ok(StateModel {
                    p_success: out.p_success,
                    p_failure: out.p_failure,
                    success: out.success,
                    failure: out.failure,
                    detector_probs,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, point, states })
    }
}

/// Generator for input `state` at schedule point `point`: one ChaCha8 stream
/// per (point, state) pair, so results do not depend on scheduling.
pub fn substream(seed: u64, point: usize, state: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | state as u64);
    rng
}

struct ShotSampler<'a> {
    p_success: f64,
    cdf: Vec<f64>,
    state: &'a StateModel,
}

impl<'a> ShotSampler<'a> {
    fn new(state: &'a StateModel) -> Self {
        let mut acc = 0.0;
        let cdf = state
            .detector_probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self {
            p_success: state.p_success,
            cdf,
            state,
        }
    }

    fn shot<R: Rng>(&self, rng: &mut R) -> (Branch, Option<usize>) {
        if rng.random::<f64>() >= self.p_success {
            return (Branch::Failure, None);
        }
        let total = *self.cdf.last().unwrap_or(&0.0);
        let u = rng.random::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c <= u).min(self.state.detector_probs.len() - 1);
        (Branch::Success, Some(k))
    }
}

/// Per-input shot counts accumulated without storing individual records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub n: usize,
    pub shots: Vec<u64>,
    pub successes: Vec<u64>,
    /// `clicks[j][k]`: input `j` detected at detector `k`.
    pub clicks: Vec<Vec<u64>>,
}

impl Tally {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            shots: vec![0; n],
            successes: vec![0; n],
            clicks: vec![vec![0; n]; n],
        }
    }

    pub fn add(&mut self, record: &TrialRecord) -> Result<()> {
        let j = record.prepared;
        if j >= self.n {
            return Err(FrioError::IndexOutOfRange { index: j, n: self.n });
        }
        self.shots[j] += 1;
        match (record.branch, record.detector) {
            (Branch::Success, Some(k)) if k < self.n => {
                self.successes[j] += 1;
                self.clicks[j][k] += 1;
            }
            (Branch::Failure, None) => {}
            _ => {
                return Err(FrioError::Estimation(format!(
                    "record {record:?} violates the detector/branch rule"
                )))
            }
        }
        Ok(())
    }

    pub fn from_records(n: usize, records: &[TrialRecord]) -> Result<Self> {
        let mut t = Self::new(n);
        for r in records {
            t.add(r)?;
        }
        Ok(t)
    }
}

/// Stream `shots` trials of every input and count outcomes.
pub fn sample_tally(model: &PointModel, shots: u64, seed: u64) -> Tally {
    let rows: Vec<(u64, Vec<u64>)> = model
        .states
        .par_iter()
        .enumerate()
        .map(|(j, state)| {
            let sampler = ShotSampler::new(state);
            let mut rng = substream(seed, model.point.index, j);
            let mut clicks = vec![0u64; model.n];
            let mut successes = 0;
            for _ in 0..shots {
                if let (Branch::Success, Some(k)) = sampler.shot(&mut rng) {
                    successes += 1;
                    clicks[k] += 1;
                }
            }
            (successes, clicks)
        })
        .collect();
    let mut tally = Tally::new(model.n);
    for (j, (s, c)) in rows.into_iter().enumerate() {
        tally.shots[j] = shots;
        tally.successes[j] = s;
        tally.clicks[j] = c;
    }
    tally
}

/// Individual trial records; uses the same streams as [`sample_tally`].
pub fn sample_records(model: &PointModel, shots: u64, seed: u64) -> Vec<TrialRecord> {
    let per_state: Vec<Vec<TrialRecord>> = model
        .states
        .par_iter()
        .enumerate()
        .map(|(j, state)| {
            let sampler = ShotSampler::new(state);
            let mut rng = substream(seed, model.point.index, j);
            (0..shots)
                .map(|_| {
                    let (branch, detector) = sampler.shot(&mut rng);
                    TrialRecord {
                        prepared: j,
                        branch,
                        detector,
                    }
                })
                .collect()
        })
        .collect();
    per_state.into_iter().flatten().collect()
}

/// Camera frames recorded at both beam splitter outputs, one pair per input.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    pub success: Vec<IntensityPattern>,
    pub failure: Vec<IntensityPattern>,
    /// Background offset that was subtracted from every pixel.
    pub background: f64,
}

/// Noiseless camera frames, scaled so the brightest pixel of each input
/// (over both outputs) equals `peak`.
pub fn expected_patterns(model: &PointModel, cfg: &RunConfig, peak: f64) -> Result<PatternSet> {
    let grid = cfg.optics.camera_grid();
    let mut success = Vec::with_capacity(model.n);
    let mut failure = Vec::with_capacity(model.n);
    for (j, state) in model.states.iter().enumerate() {
        let frame = |rho: &Option<QubitDensity>, weight: f64, branch: Branch| -> Result<IntensityPattern> {
            let mut p = match rho {
                Some(r) => pattern_on_grid(r.matrix(), &cfg.optics, weight, grid.clone())?,
                None => IntensityPattern::new(grid.clone(), vec![0.0; grid.len()], j, branch)?,
            };
            p.state_index = j;
            p.branch = branch;
            Ok(p)
        };
        let mut s = frame(&state.success, state.p_success, Branch::Success)?;
        let mut f = frame(&state.failure, state.p_failure, Branch::Failure)?;
        let brightest = s.peak().max(f.peak());
        if brightest <= 0.0 {
            return Err(FrioError::Estimation(format!("input {j} produces no light")));
        }
        let scale = peak / brightest;
        for v in s.values.iter_mut().chain(f.values.iter_mut()) {
            *v *= scale;
        }
        success.push(s);
        failure.push(f);
    }
    Ok(PatternSet {
        success,
        failure,
        background: 0.0,
    })
}

/// Shot-noise-limited camera frames: Poisson counts on top of a constant
/// background, which is then subtracted.
pub fn sample_patterns(model: &PointModel, cfg: &RunConfig, seed: u64) -> Result<PatternSet> {
    let ideal = expected_patterns(model, cfg, cfg.peak_counts)?;
    let background = cfg.background_offset;
    let pairs: Vec<(IntensityPattern, IntensityPattern)> = (0..model.n)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(seed, model.point.index, j);
            let s = poisson_frame(&ideal.success[j], background, &mut rng)?;
            let f = poisson_frame(&ideal.failure[j], background, &mut rng)?;
            Ok((s, f))
        })
        .collect::<Result<Vec<_>>>()?;
    let (success, failure) = pairs.into_iter().unzip();
    Ok(PatternSet {
        success,
        failure,
        background,
    })
}

fn poisson_frame<R: Rng>(ideal: &IntensityPattern, background: f64, rng: &mut R) -> Result<IntensityPattern> {
    let mut out = ideal.clone();
    for v in &mut out.values {
        let mean = *v + background;
        let counts = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| FrioError::Estimation(format!("invalid Poisson mean {mean}: {e}")))?
                .sample(rng)
        } else {
            0.0
        };
        *v = (counts - background).max(0.0);
    }
    Ok(out)
}

/// Output of one sampled run at one schedule point.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Records(Vec<TrialRecord>),
    Patterns(PatternSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRun {
    pub model: PointModel,
    pub output: RunOutput,
}

/// Simulate the configured experiment for `cfg.n_states` inputs, one entry
/// per schedule point.
pub fn run(cfg: &RunConfig) -> Result<Vec<PointRun>> {
    cfg.validate()?;
    let noise = cfg.noise_model()?;
    cfg.schedule_points()?
        .into_iter()
        .map(|point| {
            let model = PointModel::new(cfg, cfg.n_states, point, &noise)?;
            let output = match cfg.mode {
                Mode::Montecarlo => {
                    RunOutput::Records(sample_records(&model, cfg.shots_per_state, cfg.seed))
                }
                Mode::Optical => RunOutput::Patterns(sample_patterns(&model, cfg, cfg.seed)?),
                Mode::Analytic => {
                    return Err(FrioError::config(
                        "run samples an experiment; use montecarlo or optical mode",
                    ))
                }
            };
            Ok(PointRun { model, output })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::Schedule;

    fn cfg(n: usize, angles: &[f64], mode: Mode) -> RunConfig {
        RunConfig {
            n_states: n,
            schedule: Schedule::AnglesDeg(angles.to_vec()),
            shots_per_state: 2000,
            mode,
            seed: 7,
            ..RunConfig::default()
        }
    }

    #[test]
    fn no_separation_means_every_shot_succeeds() {
        let runs = run(&cfg(3, &[19.5], Mode::Montecarlo)).unwrap();
        let RunOutput::Records(records) = &runs[0].output else {
            panic!("expected records")
        };
        assert_eq!(records.len(), 3 * 2000);
        assert!(records.iter().all(|r| r.branch == Branch::Success && r.detector.is_some()));
    }

    #[test]
    fn detector_present_iff_success() {
        let runs = run(&cfg(5, &[34.2], Mode::Montecarlo)).unwrap();
        let RunOutput::Records(records) = &runs[0].output else {
            panic!("expected records")
        };
        assert!(records
            .iter()
            .all(|r| (r.branch == Branch::Success) == r.detector.is_some()));
        assert!(records.iter().any(|r| r.branch == Branch::Failure));
    }

    #[test]
    fn records_and_tally_agree() {
        let c = cfg(3, &[29.5], Mode::Montecarlo);
        let noise = c.noise_model().unwrap();
        let point = c.schedule_points().unwrap()[0];
        let model = PointModel::new(&c, 3, point, &noise).unwrap();
        let records = sample_records(&model, 5000, 11);
        let tally = sample_tally(&model, 5000, 11);
        assert_eq!(Tally::from_records(3, &records).unwrap(), tally);
    }

    #[test]
    fn runs_are_reproducible() {
        for mode in [Mode::Montecarlo, Mode::Optical] {
            let c = cfg(3, &[25.5, 45.0], mode);
            assert_eq!(run(&c).unwrap(), run(&c).unwrap());
            let other = RunConfig { seed: 8, ..c.clone() };
            assert_ne!(run(&c).unwrap(), run(&other).unwrap());
        }
    }

    #[test]
    fn analytic_mode_has_nothing_to_run() {
        assert!(run(&cfg(2, &[30.0], Mode::Analytic)).is_err());
    }

    #[test]
    fn tally_rejects_malformed_records() {
        let mut t = Tally::new(2);
        let bad = TrialRecord {
            prepared: 0,
            branch: Branch::Failure,
            detector: Some(1),
        };
        assert!(t.add(&bad).is_err());
        let bad = TrialRecord {
            prepared: 3,
            branch: Branch::Failure,
            detector: None,
        };
        assert!(t.add(&bad).is_err());
    }

    #[test]
    fn expected_patterns_peak_scaling() {
        let c = cfg(3, &[45.0], Mode::Optical);
        let noise = c.noise_model().unwrap();
        let point = c.schedule_points().unwrap()[0];
        let model = PointModel::new(&c, 3, point, &noise).unwrap();
        let set = expected_patterns(&model, &c, 1e4).unwrap();
        for j in 0..3 {
            let brightest = set.success[j].peak().max(set.failure[j].peak());
            assert!((brightest - 1e4).abs() < 1e-9);
        }
    }
}
