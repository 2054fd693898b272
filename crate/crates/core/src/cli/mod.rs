//! Command-line front end.
//!
//! Every command reads a JSON [`RunConfig`] (defaults when `--config` is
//! absent), applies `--seed`, `--mode` and dotted `--set key=value` overrides,
//! and writes its tables atomically into the output directory. Exit codes: 0 on
//! success, 2 for invalid input, 3 for failures at run time.

mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::error::{FrioError, Result};
use crate::imperfections::CalibrationTable;
use crate::io::{read_to_string, write_atomic, write_json};
use crate::sim::{self, Mode, RunConfig};

pub use output::{
    calibration_rows, curve_rows, read_calibration_csv, read_curves_csv, BlochReport,
    CalibrationEcho, CurveRow, FitDemoRecord, OracleOutput,
};

/// Environment variable naming the output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "FRIO_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "frio", version, about = "Fixed-rate inconclusive discrimination of symmetric qubit states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// JSON run configuration
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_parser = ["analytic", "montecarlo", "optical"])]
    pub mode: Option<String>,
    /// Override a configuration value by dotted path, e.g. `noise.crosstalk=0.01`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum error rate against inconclusive rate for each N
    Curves,
    /// Success and conditional correct rates along the separation schedule
    Sweep,
    /// Reconstructed separated states on the Bloch sphere
    Bloch,
    /// Brute-force optimality check
    Oracle,
    /// Interference patterns and their fits
    Fitdemo,
    /// Calibration table with the separation angle at each gray level
    Calibration {
        /// Table to echo; defaults to `calibration_path` or the synthetic table
        #[arg(long, value_name = "PATH")]
        table: Option<PathBuf>,
    },
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

/// Output directory: `--out`, else the environment variable, else the working directory.
pub fn output_dir(common: &CommonArgs) -> PathBuf {
    if let Some(p) = &common.out {
        return p.clone();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from("."),
    }
}

/// Load the configuration and apply command-line overrides.
pub fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut value = match &common.config {
        Some(path) => {
            let text = read_to_string(path)
                .map_err(|e| FrioError::config(format!("cannot read config: {e}")))?;
            serde_json::from_str::<Value>(&text)?
        }
        None => Value::Object(Default::default()),
    };
    if !value.is_object() {
        return Err(FrioError::config("configuration must be a JSON object"));
    }
    for item in &common.overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| FrioError::config(format!("override `{item}` is not KEY=VALUE")))?;
        apply_override(&mut value, key.trim(), raw.trim())?;
    }
    if let Some(seed) = common.seed {
        value["seed"] = Value::from(seed);
    }
    if let Some(mode) = &common.mode {
        let mode: Mode = mode.parse()?;
        value["mode"] = Value::from(mode.to_string());
    }
    let cfg: RunConfig = serde_json::from_value(value)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Set `key` (dotted path) to `raw`, parsed as JSON when possible and as a
/// string otherwise. Missing intermediate objects are created.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(FrioError::config(format!("invalid override key `{key}`")));
    }
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| FrioError::config(format!("`{key}`: `{part}` is inside a non-object value")))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| FrioError::config(format!("`{key}` does not address an object field")))?;
    obj.insert(parts[parts.len() - 1].to_owned(), parsed);
    Ok(())
}

/// Run one command and return the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = load_config(&cli.common)?;
    let out = output_dir(&cli.common);
    match &cli.command {
        Command::Curves => {
            let rows = curve_rows(&cfg)?;
            let path = out.join("curves.csv");
            write_atomic(&path, &output::csv_bytes(&rows)?)?;
            Ok(vec![path])
        }
        Command::Sweep => {
            let rows = sim::sweep(&cfg)?;
            let path = out.join("sweep.csv");
            write_atomic(&path, &sim::sweep_csv_bytes(&rows)?)?;
            Ok(vec![path])
        }
        Command::Bloch => {
            let report = BlochReport {
                n: cfg.n_states,
                theta_deg: cfg.theta_deg,
                mode: cfg.mode,
                parallels: sim::characterize(&cfg)?,
            };
            let path = out.join("bloch.json");
            write_json(&path, &report)?;
            Ok(vec![path])
        }
        Command::Oracle => {
            let result = OracleOutput::run(&cfg)?;
            for r in &result.reports {
                let status = if r.within(result.gap_min, result.gap_max) { "PASS" } else { "FAIL" };
                println!(
                    "{status} {:?} n={} q={:.4} pe_bruteforce={:.6} pe_formula={:.6} gap={:+.2e}",
                    r.family, r.n, r.q_target, r.pe_bruteforce, r.pe_formula, r.gap
                );
            }
            let path = out.join("oracle.json");
            write_json(&path, &result)?;
            Ok(vec![path])
        }
        Command::Fitdemo => fitdemo(&cfg, &out.join("fitdemo")),
        Command::Calibration { table } => {
            let table = match table.as_ref().or(cfg.calibration_path.as_ref()) {
                Some(p) => CalibrationTable::from_path(p)?,
                None => cfg.calibration_table()?,
            };
            let rows = calibration_rows(&table, cfg.theta())?;
            let path = out.join("calibration.csv");
            write_atomic(&path, &output::csv_bytes(&rows)?)?;
            Ok(vec![path])
        }
    }
}

fn fitdemo(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let noise = cfg.noise_model()?;
    let mut written = Vec::new();
    let mut records = Vec::new();
    for point in cfg.schedule_points()? {
        let model = sim::PointModel::new(cfg, cfg.n_states, point, &noise)?;
        let frames = if cfg.mode == Mode::Optical {
            sim::sample_patterns(&model, cfg, cfg.seed)?
        } else {
            sim::expected_patterns(&model, cfg, cfg.peak_counts)?
        };
        let analysis = sim::analyze_frames(&frames, &cfg.optics)?;
        for (j, fit) in analysis.fits.iter().enumerate() {
            for p in [&frames.success[j], &frames.failure[j]] {
                let path = dir.join(format!("pattern_t{}_j{}_{}.csv", point.index, j, p.branch));
                p.write_csv(&path)?;
                written.push(path);
            }
            records.push(FitDemoRecord::new(&point, j, fit, analysis.correction.phi_corr)?);
        }
    }
    let path = dir.join("fits.json");
    write_json(&path, &records)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_use_dotted_paths() {
        let mut v = serde_json::json!({"noise": {"crosstalk": 0.0}});
        apply_override(&mut v, "noise.crosstalk", "0.01").unwrap();
        apply_override(&mut v, "optics.samples", "128").unwrap();
        apply_override(&mut v, "mode", "montecarlo").unwrap();
        apply_override(&mut v, "schedule.angles_deg", "[30, 45]").unwrap();
        assert_eq!(v["noise"]["crosstalk"], 0.01);
        assert_eq!(v["optics"]["samples"], 128);
        assert_eq!(v["mode"], "montecarlo");
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.schedule, sim::Schedule::AnglesDeg(vec![30.0, 45.0]));

        let mut v = serde_json::json!({"seed": 1});
        assert!(apply_override(&mut v, "seed.x", "1").is_err());
        assert!(apply_override(&mut v, "a..b", "1").is_err());
    }

    #[test]
    fn flags_override_config() {
        let common = CommonArgs {
            seed: Some(42),
            mode: Some("optical".into()),
            overrides: vec!["n_states=5".into()],
            ..CommonArgs::default()
        };
        let cfg = load_config(&common).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.mode, Mode::Optical);
        assert_eq!(cfg.n_states, 5);

        let bad = CommonArgs {
            overrides: vec!["n_states=1".into()],
            ..CommonArgs::default()
        };
        assert!(load_config(&bad).unwrap_err().is_validation());
        let bad = CommonArgs {
            overrides: vec!["no_equals".into()],
            ..CommonArgs::default()
        };
        assert!(load_config(&bad).unwrap_err().is_validation());
    }

    #[test]
    fn out_flag_wins() {
        let common = CommonArgs {
            out: Some("x".into()),
            ..CommonArgs::default()
        };
        assert_eq!(output_dir(&common), PathBuf::from("x"));
    }
}
