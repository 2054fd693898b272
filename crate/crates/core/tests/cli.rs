use std::f64::consts::TAU;
use std::path::Path;
use std::process::{Command, Output};

use frio::cli::{read_calibration_csv, read_curves_csv, BlochReport, OracleOutput, OUT_DIR_ENV};
use frio::sim::read_sweep_csv;

fn frio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frio"))
        .args(args)
        .env_remove(OUT_DIR_ENV)
        .output()
        .unwrap()
}

fn frio_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    let out = dir.to_str().unwrap();
    all.extend(["--out", out]);
    let o = frio(&all);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn same_sig(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[test]
fn curves_examples_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    frio_in(tmp.path(), &["curves", "--set", "n_values=[2,3,5,7]"]);
    let path = tmp.path().join("curves.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("N,Q,P_e_min\n"));
    let rows = read_curves_csv(&path).unwrap();
    assert_eq!(rows.len(), 4 * 101);
    let at = |n: usize, first: bool| {
        let mut it = rows.iter().filter(|r| r.n == n);
        if first { it.next() } else { it.next_back() }.copied().unwrap()
    };
    assert_eq!(at(2, true).q, 0.0);
    assert!((at(2, true).p_e_min - 0.1853).abs() < 5e-5);
    assert!(at(2, false).p_e_min.abs() < 1e-12);
    assert!((at(7, false).q - 0.7771).abs() < 5e-5);
    assert!((at(7, false).p_e_min - 0.1592).abs() < 5e-5);

    // re-serialize what was read and compare at 12 significant digits
    let again = frio::cli::curve_rows(&frio::sim::RunConfig {
        n_values: vec![2, 3, 5, 7],
        ..Default::default()
    })
    .unwrap();
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!(a.n, b.n);
        assert!(same_sig(a.q, b.q) && same_sig(a.p_e_min, b.p_e_min));
    }
}

#[test]
fn sweep_examples_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    frio_in(tmp.path(), &["sweep", "--set", "n_values=[2]", "--mode", "montecarlo", "--seed", "3"]);
    let rows = read_sweep_csv(&tmp.path().join("sweep.csv")).unwrap();
    let analytic: Vec<_> = rows.iter().filter(|r| r.mode == frio::sim::Mode::Analytic).collect();
    assert_eq!(analytic.len(), 7);
    assert_eq!(rows.len(), 14);
    assert!((analytic[6].q - 0.7771).abs() < 5e-5);
    assert!((analytic[6].theta_out_deg - 45.0).abs() < 1e-9);

    let bytes = std::fs::read(tmp.path().join("sweep.csv")).unwrap();
    let rewritten = frio::sim::sweep_csv_bytes(&rows).unwrap();
    assert_eq!(bytes, rewritten);
}

#[test]
fn calibration_echo_reports_separation_angles() {
    let tmp = tempfile::tempdir().unwrap();
    frio_in(tmp.path(), &["calibration"]);
    let rows = read_calibration_csv(&tmp.path().join("calibration.csv")).unwrap();
    let at142 = rows.iter().find(|r| r.gl == 142).unwrap();
    assert!((at142.theta_out_deg - 22.6).abs() < 1e-9);
    let angles: Vec<f64> = rows.iter().map(|r| r.theta_out_deg).collect();
    assert!(angles.windows(2).all(|w| w[1] >= w[0]));

    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reference_calibration_v1.csv");
    let other = tempfile::tempdir().unwrap();
    frio_in(other.path(), &["calibration", "--table", fixture.to_str().unwrap()]);
    let echoed = read_calibration_csv(&other.path().join("calibration.csv")).unwrap();
    assert_eq!(echoed.len(), 7);
    for (a, b) in echoed.iter().zip(&rows) {
        assert!(same_sig(a.theta_out_deg, b.theta_out_deg));
    }
}

#[test]
fn bloch_azimuths_without_noise() {
    let tmp = tempfile::tempdir().unwrap();
    frio_in(tmp.path(), &["bloch", "--set", "n_states=5"]);
    let text = std::fs::read_to_string(tmp.path().join("bloch.json")).unwrap();
    let report: BlochReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.parallels.len(), 7);
    for parallel in &report.parallels {
        for s in &parallel.states {
            let nominal = TAU * s.j as f64 / 5.0;
            let d = (s.azimuth - nominal).rem_euclid(TAU);
            assert!(d.min(TAU - d) < 1e-9, "j={} azimuth {}", s.j, s.azimuth);
        }
    }
}

#[test]
fn fitdemo_writes_patterns_and_fits() {
    let tmp = tempfile::tempdir().unwrap();
    frio_in(tmp.path(), &["fitdemo", "--set", "n_states=2", "--set", "schedule.angles_deg=[30]"]);
    let dir = tmp.path().join("fitdemo");
    let pattern = frio::optics::IntensityPattern::read_csv(
        &dir.join("pattern_t0_j1_success.csv"),
        1,
        frio::optics::Branch::Success,
    )
    .unwrap();
    assert!(pattern.peak() > 0.0);
    assert!(dir.join("pattern_t0_j0_failure.csv").exists());
    let fits: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fits.json")).unwrap()).unwrap();
    assert_eq!(fits.len(), 2);
    let v = fits[1]["visibility"].as_f64().unwrap();
    assert!((v - 60f64.to_radians().sin()).abs() < 1e-3);
}

#[test]
fn oracle_report_is_json() {
    let tmp = tempfile::tempdir().unwrap();
    let o = frio_in(
        tmp.path(),
        &[
            "oracle",
            "--set", "oracle.n_values=[3]",
            "--set", "oracle.q_values=[0.3]",
            "--set", "oracle.unconstrained=false",
        ],
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS"), "{stdout}");
    let report: OracleOutput =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("oracle.json")).unwrap()).unwrap();
    assert!(report.pass);
    assert_eq!(report.reports.len(), 1);
    assert!(report.reports[0].gap.abs() <= 2e-3);
}

#[test]
fn same_seed_gives_identical_files() {
    for args in [
        &["sweep", "--mode", "optical", "--seed", "11"][..],
        &["sweep", "--mode", "montecarlo", "--seed", "11", "--set", "noise.crosstalk=0.02"][..],
    ] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        frio_in(a.path(), args);
        frio_in(b.path(), args);
        let read = |d: &Path| std::fs::read(d.join("sweep.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    frio_in(a.path(), &["sweep", "--mode", "montecarlo", "--seed", "1"]);
    frio_in(b.path(), &["sweep", "--mode", "montecarlo", "--seed", "2"]);
    assert_ne!(
        std::fs::read(a.path().join("sweep.csv")).unwrap(),
        std::fs::read(b.path().join("sweep.csv")).unwrap()
    );
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"n_values": [3], "schedule": {"angles_deg": [20.0, 45.0]}}"#).unwrap();
    let out = tmp.path().join("out");
    frio_in(&out, &["sweep", "--config", cfg.to_str().unwrap(), "--set", "theta_deg=20"]);
    let rows = read_sweep_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.n == 3));
    assert!((rows[1].q - 40f64.to_radians().cos()).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let code = |args: &[&str]| frio(args).status.code().unwrap();

    assert_eq!(code(&["curves", "--out", out]), 0);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["sweep", "--mode", "quantum"]), 2);
    assert_eq!(code(&["sweep", "--out", out, "--set", "n_states=1"]), 2);
    assert_eq!(code(&["sweep", "--out", out, "--set", "unknown_key=1"]), 2);
    assert_eq!(code(&["sweep", "--out", out, "--set", "theta_deg"]), 2);
    assert_eq!(code(&["sweep", "--out", out, "--config", "/nonexistent/run.json"]), 2);

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&["sweep", "--out", out, "--config", bad.to_str().unwrap()]), 2);

    // a regular file where the output directory should be
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, b"").unwrap();
    let nested = blocker.join("sub");
    assert_eq!(code(&["curves", "--out", nested.to_str().unwrap()]), 3);
}

#[test]
fn environment_supplies_default_output_dir() {
    let (env_dir, flag_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |args: &[&str]| {
        let status = Command::new(env!("CARGO_BIN_EXE_frio"))
            .args(args)
            .env(OUT_DIR_ENV, env_dir.path())
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
    };
    run(&["calibration"]);
    assert!(env_dir.path().join("calibration.csv").exists());
    run(&["curves", "--out", flag_dir.path().to_str().unwrap()]);
    assert!(flag_dir.path().join("curves.csv").exists());
    assert!(!env_dir.path().join("curves.csv").exists());
}
