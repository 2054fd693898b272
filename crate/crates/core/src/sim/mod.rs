//! Shot-level simulation of the experiment and the estimators applied to its
//! output.
//!
//! Three modes share one configuration: `analytic` evaluates closed forms,
//! `montecarlo` samples branch and detector clicks per input, and `optical`
//! records Poisson-limited camera frames at both beam splitter outputs and
//! analyzes them the way the laboratory data are analyzed.

mod bloch;
mod config;
mod estimate;
mod run;
mod sweep;

pub use bloch::{characterize, BlochParallel, BlochState};
pub use config::{CurvesConfig, Mode, NoiseConfig, RunConfig, Schedule, SchedulePoint};
pub use estimate::{
    analytic_estimate, analyze_frames, estimate_patterns, estimate_tally, EstimateSet,
    FrameAnalysis, PerState, Stderr,
};
pub use run::{
    expected_patterns, run, sample_patterns, sample_records, sample_tally, substream, PatternSet,
    PointModel, PointRun, RunOutput, StateModel, Tally, TrialRecord,
};
pub use sweep::{estimate_point, read_sweep_csv, sweep, sweep_csv_bytes, SweepRow};

/// Estimates from the output of [`run`].
pub fn estimate(run: &PointRun, cfg: &RunConfig) -> crate::Result<EstimateSet> {
    match &run.output {
        RunOutput::Records(records) => estimate_tally(&Tally::from_records(run.model.n, records)?),
        RunOutput::Patterns(frames) => estimate_patterns(frames, &cfg.optics),
    }
}
