//! End-to-end tests that drive the compiled binary through every
//! subcommand, every documented exit code, and the determinism contract
//! on the files it writes.

use std::fs;
use std::path::Path;
use std::process::Command;

use phasedamp_core::mat::{random_density_matrix, ComplexMatrix, DensityMatrix};
use phasedamp_core::recon::{bell_mixture_state, BellMixture};
use num_complex::Complex64;
use serde_json::Value;
use tempfile::TempDir;

const RATES3: &str = r#"{"dim": 3, "rates": {"1,2": 1.0, "1,3": 2.0, "2,3": 3.0}}"#;
const RATES4: &str = r#"{"dim": 4, "rates": {"1,2": 1.0, "1,3": 2.0, "1,4": 3.0, "2,3": 4.0, "2,4": 5.0, "3,4": 6.0}}"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_in(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_phasedamp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary launches");
    Run {
        code: out.status.code().expect("terminated by exit, not signal"),
        stdout: String::from_utf8(out.stdout).expect("stdout is UTF-8"),
        stderr: String::from_utf8(out.stderr).expect("stderr is UTF-8"),
    }
}

fn write(dir: &Path, name: &str, contents: &str) {
    fs::write(dir.join(name), contents).expect("fixture write");
}

fn write_state(dir: &Path, name: &str, state: &DensityMatrix) {
    write(dir, name, &serde_json::to_string(state).expect("state serializes"));
}

fn read_json(path: &Path) -> Value {
    let text = fs::read_to_string(path).expect("output file exists");
    serde_json::from_str(&text).expect("output file is JSON")
}

fn diag_state(populations: &[f64]) -> DensityMatrix {
    let n = populations.len();
    let mat = ComplexMatrix::from_fn(n, |r, c| {
        if r == c {
            Complex64::new(populations[r], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .expect("square");
    DensityMatrix::new(mat).expect("valid diagonal state")
}

/// CSV body as (observable, time, value) rows, header checked.
fn parse_rows(path: &Path) -> Vec<(String, f64, f64)> {
    let text = fs::read_to_string(path).expect("CSV exists");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("observable,time,value"));
    lines
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 3, "malformed row {line:?}");
            (
                fields[0].to_string(),
                fields[1].parse().expect("time parses"),
                fields[2].parse().expect("value parses"),
            )
        })
        .collect()
}

#[test]
fn simulate_writes_the_record_and_its_sidecar() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write_state(dir.path(), "state.json", &random_density_matrix(3, 7).unwrap());

    let run = run_in(
        dir.path(),
        &[
            "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates", "rates.json",
            "--seed", "7",
        ],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(run.stdout.contains("simulated qutrit [dim 3] over 4 instants"));
    assert!(run.stdout.contains("(8 rows)"));

    let rows = parse_rows(&dir.path().join("measurements.csv"));
    assert_eq!(rows.len(), 8);
    let labels: Vec<&str> = rows.iter().map(|(l, _, _)| l.as_str()).collect();
    assert_eq!(labels, ["Q1", "Q1", "Q1", "Q1", "Q2", "Q2", "Q2", "Q2"]);
    // Auto step resolves to 1/(2 gamma_max) = 1/6; the grid is its first
    // four multiples, written with twelve digits.
    for (i, (_, t, _)) in rows.iter().take(4).enumerate() {
        assert!((t - (i + 1) as f64 / 6.0).abs() < 1e-11, "instant {i} is {t}");
    }

    let sidecar = read_json(&dir.path().join("sidecar.json"));
    assert_eq!(sidecar["scheme"], "qutrit");
    assert_eq!(sidecar["dim"], 3);
    assert_eq!(sidecar["step"].as_f64().unwrap(), 1.0 / 6.0);
    assert_eq!(sidecar["count"], 4);
    assert_eq!(sidecar["sigma"].as_f64().unwrap(), 0.0);
    assert_eq!(sidecar["seed"], 7);
    assert_eq!(sidecar["rates"]["dim"], 3);
    assert!(sidecar["created_unix"].as_u64().is_some());
}

#[test]
fn diagonal_states_produce_flat_series() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write_state(dir.path(), "diag.json", &diag_state(&[0.5, 0.3, 0.2]));
    write_state(dir.path(), "flat.json", &diag_state(&[1.0 / 3.0; 3]));

    let base = ["--scheme", "qutrit", "--rates", "rates.json"];

    let mut args = vec!["simulate", "--state", "diag.json", "--out", "diag"];
    args.extend_from_slice(&base);
    assert_eq!(run_in(dir.path(), &args).code, 0);
    let rows = parse_rows(&dir.path().join("diag/measurements.csv"));
    for label in ["Q1", "Q2"] {
        let series: Vec<f64> = rows
            .iter()
            .filter(|(l, _, _)| l == label)
            .map(|&(_, _, v)| v)
            .collect();
        assert_eq!(series.len(), 4);
        // Dephasing leaves diagonals untouched, so each observable's
        // series is constant to the last bit.
        assert!(series.iter().all(|&v| v == series[0]), "{label}: {series:?}");
    }

    let mut args = vec!["simulate", "--state", "flat.json", "--out", "flat"];
    args.extend_from_slice(&base);
    assert_eq!(run_in(dir.path(), &args).code, 0);
    let rows = parse_rows(&dir.path().join("flat/measurements.csv"));
    // Every observable is traceless, so the maximally mixed state reads
    // exactly zero at all instants.
    assert!(rows.iter().all(|&(_, _, v)| v == 0.0), "{rows:?}");
}

#[test]
fn each_scheme_writes_its_documented_row_count() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates4.json", RATES4);
    write_state(dir.path(), "state4.json", &random_density_matrix(4, 5).unwrap());
    let bell = bell_mixture_state(&BellMixture::new(0.5, 0.3, 0.05).unwrap()).unwrap();
    write_state(dir.path(), "bell.json", &bell);

    let run = run_in(
        dir.path(),
        &[
            "simulate", "--state", "state4.json", "--scheme", "fourlevel", "--rates",
            "rates4.json", "--out", "four",
        ],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let rows = parse_rows(&dir.path().join("four/measurements.csv"));
    assert_eq!(rows.len(), 15);
    assert_eq!(rows.iter().filter(|(l, _, _)| l == "Q1").count(), 7);
    assert_eq!(rows.iter().filter(|(l, _, _)| l == "Q2").count(), 7);
    let static_row = rows.last().unwrap();
    assert_eq!(static_row.0, "Ld_3");
    assert_eq!(static_row.1, 0.0);

    let run = run_in(
        dir.path(),
        &[
            "simulate", "--state", "bell.json", "--scheme", "bell", "--rates", "rates4.json",
            "--out", "bell",
        ],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let rows = parse_rows(&dir.path().join("bell/measurements.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|(l, _, _)| l == "Q"));
}

#[test]
fn reconstruct_recovers_the_simulated_state() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write_state(dir.path(), "state.json", &random_density_matrix(3, 11).unwrap());

    let base = ["--scheme", "qutrit", "--rates", "rates.json"];
    let mut args = vec!["simulate", "--state", "state.json"];
    args.extend_from_slice(&base);
    assert_eq!(run_in(dir.path(), &args).code, 0);

    let mut args = vec![
        "reconstruct", "--data", "measurements.csv", "--truth", "state.json",
    ];
    args.extend_from_slice(&base);
    let run = run_in(dir.path(), &args);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(run.stdout.contains("reconstructed qutrit [dim 3]"));
    assert!(run.stdout.contains("psd = true"));
    assert!(run.stdout.contains("trace distance to truth"));

    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["scheme"], "qutrit");
    assert!(report["trace_distance"].as_f64().unwrap() <= 1e-9);
    assert_eq!(report["psd"]["psd"], true);
    assert_eq!(report["psd_repair_applied"], false);
    assert!(report.get("repaired").is_none());
    assert_eq!(report["components"].as_object().unwrap().len(), 8);
    assert_eq!(report["systems"].as_array().unwrap().len(), 2);
}

#[test]
fn reconstruct_round_trips_bell_weights() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES4);
    let truth = bell_mixture_state(&BellMixture::new(0.5, 0.3, 0.05).unwrap()).unwrap();
    write_state(dir.path(), "bell.json", &truth);

    let base = ["--scheme", "bell", "--rates", "rates.json"];
    let mut args = vec!["simulate", "--state", "bell.json"];
    args.extend_from_slice(&base);
    assert_eq!(run_in(dir.path(), &args).code, 0);

    let mut args = vec![
        "reconstruct", "--data", "measurements.csv", "--truth", "bell.json",
    ];
    args.extend_from_slice(&base);
    let run = run_in(dir.path(), &args);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(run.stdout.contains("recovered Bell weights"));
    assert!(run.stdout.contains("within range: yes"));

    let report = read_json(&dir.path().join("report.json"));
    let raw: Vec<f64> = report["raw"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (got, want) in raw.iter().zip([0.5, 0.3, 0.05, 0.15]) {
        assert!((got - want).abs() <= 1e-10, "weights {raw:?}");
    }
    assert_eq!(report["within_range"], true);
    assert!(report["trace_distance"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn unreadable_state_files_exit_two() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write(dir.path(), "state.json", r#"{"dim": 3, "entries": "nonsense"}"#);

    let base = [
        "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates", "rates.json",
    ];
    let run = run_in(dir.path(), &base);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("error: state.json:"), "stderr: {}", run.stderr);

    let run = run_in(
        dir.path(),
        &[
            "simulate", "--state", "missing.json", "--scheme", "qutrit", "--rates", "rates.json",
        ],
    );
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("missing.json"));

    // Valid JSON that is not a state fails the same way.
    write(
        dir.path(),
        "heavy.json",
        r#"{"dim": 2, "entries": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]}"#,
    );
    let run = run_in(
        dir.path(),
        &[
            "simulate", "--state", "heavy.json", "--scheme", "qutrit", "--rates", "rates.json",
        ],
    );
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("trace"), "stderr: {}", run.stderr);
}

#[test]
fn coincident_rates_refuse_to_simulate() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "rates.json",
        r#"{"dim": 3, "rates": {"1,2": 1.0, "1,3": 1.0, "2,3": 3.0}}"#,
    );
    write_state(dir.path(), "state.json", &random_density_matrix(3, 1).unwrap());

    let run = run_in(
        dir.path(),
        &[
            "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates", "rates.json",
        ],
    );
    assert_eq!(run.code, 4);
    assert!(
        run.stderr.contains("rates for pairs (1,2) and (1,3) coincide"),
        "stderr: {}",
        run.stderr
    );
    assert!(run.stderr.contains("would not be invertible"));
}

#[test]
fn invalid_channels_exit_three_unless_forced() {
    let dir = TempDir::new().unwrap();
    // gamma(2,3) far above the other two rates breaks positivity of D(t).
    write(
        dir.path(),
        "rates.json",
        r#"{"dim": 3, "rates": {"1,2": 0.01, "1,3": 0.02, "2,3": 10.0}}"#,
    );
    write_state(dir.path(), "state.json", &random_density_matrix(3, 2).unwrap());

    let base = [
        "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates", "rates.json",
    ];
    let run = run_in(dir.path(), &base);
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains("channel validation failed"), "stderr: {}", run.stderr);
    assert!(run.stderr.contains("negative eigenvalue"));
    assert!(run.stderr.contains("(pass --force to simulate anyway)"));

    let mut forced = base.to_vec();
    forced.push("--force");
    let run = run_in(dir.path(), &forced);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(dir.path().join("measurements.csv").exists());
}

#[test]
fn nearly_equal_rates_refuse_reconstruction() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write_state(dir.path(), "state.json", &random_density_matrix(3, 3).unwrap());
    assert_eq!(
        run_in(
            dir.path(),
            &[
                "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates",
                "rates.json", "--step", "0.2",
            ],
        )
        .code,
        0
    );

    // Same record and grid, but the rates claimed at inversion time differ
    // by only 1e-12: the coefficient columns collapse onto each other.
    write(
        dir.path(),
        "close.json",
        r#"{"dim": 3, "rates": {"1,2": 1.0, "1,3": 2.0, "2,3": 2.000000000001}}"#,
    );
    let run = run_in(
        dir.path(),
        &[
            "reconstruct", "--data", "measurements.csv", "--scheme", "qutrit", "--rates",
            "close.json", "--step", "0.2",
        ],
    );
    assert_eq!(run.code, 5);
    assert!(
        run.stderr.contains("coincident decoherence rates"),
        "stderr: {}",
        run.stderr
    );
}

#[test]
fn deleted_rows_are_reported_by_name_and_time() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write_state(dir.path(), "state.json", &random_density_matrix(3, 4).unwrap());
    assert_eq!(
        run_in(
            dir.path(),
            &[
                "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates",
                "rates.json",
            ],
        )
        .code,
        0
    );

    let full = fs::read_to_string(dir.path().join("measurements.csv")).unwrap();
    let truncated: Vec<&str> = full.trim_end().lines().collect();
    write(
        dir.path(),
        "truncated.csv",
        &format!("{}\n", truncated[..truncated.len() - 1].join("\n")),
    );

    let run = run_in(
        dir.path(),
        &[
            "reconstruct", "--data", "truncated.csv", "--scheme", "qutrit", "--rates",
            "rates.json",
        ],
    );
    assert_eq!(run.code, 6);
    assert!(
        run.stderr.contains("missing entry for observable \"Q2\""),
        "stderr: {}",
        run.stderr
    );
    assert!(run.stderr.contains("0.66666666666666"));
}

#[test]
fn malformed_csv_exits_two() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write(dir.path(), "junk.csv", "observable,time\nQ1,0.1\n");

    let run = run_in(
        dir.path(),
        &[
            "reconstruct", "--data", "junk.csv", "--scheme", "qutrit", "--rates", "rates.json",
        ],
    );
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("bad CSV header"), "stderr: {}", run.stderr);
}

#[test]
fn records_from_another_scheme_exit_six() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES4);
    write_state(dir.path(), "state.json", &random_density_matrix(4, 6).unwrap());
    assert_eq!(
        run_in(
            dir.path(),
            &[
                "simulate", "--state", "state.json", "--scheme", "fourlevel", "--rates",
                "rates.json",
            ],
        )
        .code,
        0
    );

    // A fourlevel record has no "Q" rows, so the Bell inversion cannot
    // find its entries.
    let run = run_in(
        dir.path(),
        &[
            "reconstruct", "--data", "measurements.csv", "--scheme", "bell", "--rates",
            "rates.json",
        ],
    );
    assert_eq!(run.code, 6);
    assert!(run.stderr.contains("missing entry"), "stderr: {}", run.stderr);
}

#[test]
fn validate_passes_a_healthy_configuration() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);

    let run = run_in(dir.path(), &["validate", "--rates", "rates.json"]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    for line in [
        "condition 1 (positive semidefinite at sampled times): pass",
        "condition 2 (unit diagonal): pass",
        "condition 3 (symmetric): pass",
        "condition 4 (all-ones at t = 0): pass",
        "non-frozen rates pairwise distinct: yes",
        "schemes for dimension 3: qutrit, qudit",
    ] {
        assert!(run.stdout.contains(line), "missing {line:?} in:\n{}", run.stdout);
    }
    assert!(!run.stdout.contains("reconstruction unsupported"));
}

#[test]
fn validate_reports_violations_without_failing() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "rates.json",
        r#"{"dim": 3, "rates": {"1,2": 0.01, "1,3": 0.01, "2,3": 10.0}}"#,
    );

    let run = run_in(dir.path(), &["validate", "--rates", "rates.json"]);
    // Diagnosis is the job here; a bad configuration is still a clean run.
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(
        run.stdout.contains("condition 1 (positive semidefinite at sampled times): fail"),
        "stdout: {}",
        run.stdout
    );
    assert!(run.stdout.contains("negative eigenvalue"));
    assert!(run.stdout.contains("at t = "));
    assert!(run.stdout.contains("non-frozen rates pairwise distinct: no"));
    assert!(run.stdout.contains("reconstruction unsupported: degenerate rates"));

    // Dimension cross-checks and parse failures are input errors.
    let run = run_in(dir.path(), &["validate", "--rates", "rates.json", "--dim", "4"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("--dim says 4"));

    write(dir.path(), "bad.json", r#"{"dim": 3, "rates": {"1,2": -1.0}}"#);
    let run = run_in(dir.path(), &["validate", "--rates", "bad.json"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("bad.json"));
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write_state(dir.path(), "state.json", &random_density_matrix(3, 21).unwrap());

    // Noise makes determinism interesting: same seed, same bytes.
    let args = |out: &str, seed: &str| {
        vec![
            "simulate".to_string(),
            "--state".into(), "state.json".into(),
            "--scheme".into(), "qutrit".into(),
            "--rates".into(), "rates.json".into(),
            "--sigma".into(), "0.01".into(),
            "--seed".into(), seed.into(),
            "--out".into(), out.into(),
        ]
    };
    for (out, seed) in [("a", "9"), ("b", "9"), ("c", "10")] {
        let argv: Vec<String> = args(out, seed);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        assert_eq!(run_in(dir.path(), &argv).code, 0);
    }

    let csv_a = fs::read(dir.path().join("a/measurements.csv")).unwrap();
    let csv_b = fs::read(dir.path().join("b/measurements.csv")).unwrap();
    let csv_c = fs::read(dir.path().join("c/measurements.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_ne!(csv_a, csv_c);

    // Sidecars agree up to the timestamp, which is informational only.
    let mut side_a = read_json(&dir.path().join("a/sidecar.json"));
    let mut side_b = read_json(&dir.path().join("b/sidecar.json"));
    side_a.as_object_mut().unwrap().remove("created_unix");
    side_b.as_object_mut().unwrap().remove("created_unix");
    assert_eq!(side_a, side_b);
}

#[test]
fn roundtrip_reports_trials_and_aggregate() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);

    let run = run_in(
        dir.path(),
        &[
            "roundtrip", "--scheme", "qutrit", "--rates", "rates.json", "--trials", "5",
            "--seed", "3", "--psd-repair",
        ],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(run.stdout.contains("5 trials: max trace distance"));

    let doc = read_json(&dir.path().join("roundtrip.json"));
    assert_eq!(doc["config"]["scheme"], "qutrit");
    assert_eq!(doc["config"]["trials"], 5);
    let trials = doc["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 5);
    for (i, trial) in trials.iter().enumerate() {
        assert_eq!(trial["trial"], i as u64);
        assert!(trial["trace_distance"].as_f64().unwrap() <= 1e-9);
        assert!(trial["fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
        assert_eq!(trial["psd"], true);
        // Noiseless runs must never trigger repair, even when offered.
        assert_eq!(trial["repair_applied"], false);
    }
    assert!(doc["aggregate"]["max_trace_distance"].as_f64().unwrap() <= 1e-9);
    assert_eq!(doc["aggregate"]["repairs_applied"], 0);
}

#[test]
fn roundtrip_scores_bell_mixtures_by_weight_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES4);

    let run = run_in(
        dir.path(),
        &[
            "roundtrip", "--scheme", "bell", "--rates", "rates.json", "--trials", "4",
            "--seed", "9",
        ],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(run.stdout.contains("max Bell weight error"));

    let doc = read_json(&dir.path().join("roundtrip.json"));
    let trials = doc["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 4);
    for trial in trials {
        assert!(trial["max_weight_error"].as_f64().unwrap() <= 1e-10);
        assert!(trial["trace_distance"].as_f64().unwrap() <= 1e-10);
        // Weight recovery has no spectral meaning, so no fidelity column.
        assert!(trial.get("fidelity").is_none());
    }
    assert!(doc["aggregate"]["max_weight_error"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn config_files_drive_runs_and_flags_override_them() {
    let dir = TempDir::new().unwrap();
    write_state(dir.path(), "state.json", &random_density_matrix(3, 30).unwrap());
    write(
        dir.path(),
        "config.json",
        r#"{
            "scheme": "qutrit",
            "rates": {"dim": 3, "rates": {"1,2": 1.0, "1,3": 2.0, "2,3": 3.0}},
            "sigma": 0.05,
            "seed": 1,
            "out": "run_a"
        }"#,
    );

    let run = run_in(
        dir.path(),
        &["simulate", "--state", "state.json", "--config", "config.json"],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let sidecar = read_json(&dir.path().join("run_a/sidecar.json"));
    assert_eq!(sidecar["sigma"].as_f64().unwrap(), 0.05);
    assert_eq!(sidecar["seed"], 1);

    let run = run_in(
        dir.path(),
        &[
            "simulate", "--state", "state.json", "--config", "config.json", "--sigma", "0",
            "--seed", "2", "--out", "run_b",
        ],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let sidecar = read_json(&dir.path().join("run_b/sidecar.json"));
    assert_eq!(sidecar["sigma"].as_f64().unwrap(), 0.0);
    assert_eq!(sidecar["seed"], 2);

    write(dir.path(), "typo.json", r#"{"scheme": "qutrit", "sigmaa": 1.0}"#);
    let run = run_in(
        dir.path(),
        &["simulate", "--state", "state.json", "--config", "typo.json"],
    );
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("unknown field"), "stderr: {}", run.stderr);
}

#[test]
fn step_accepts_numbers_or_auto_and_rejects_garbage() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write_state(dir.path(), "state.json", &random_density_matrix(3, 31).unwrap());

    let base = [
        "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates", "rates.json",
    ];

    let mut args = base.to_vec();
    args.extend_from_slice(&["--step", "0.25", "--out", "fixed"]);
    assert_eq!(run_in(dir.path(), &args).code, 0);
    let sidecar = read_json(&dir.path().join("fixed/sidecar.json"));
    assert_eq!(sidecar["step"].as_f64().unwrap(), 0.25);
    let rows = parse_rows(&dir.path().join("fixed/measurements.csv"));
    assert_eq!(rows[3].1, 1.0);

    let mut args = base.to_vec();
    args.extend_from_slice(&["--step", "auto", "--out", "auto"]);
    assert_eq!(run_in(dir.path(), &args).code, 0);
    let sidecar = read_json(&dir.path().join("auto/sidecar.json"));
    assert_eq!(sidecar["step"].as_f64().unwrap(), 1.0 / 6.0);

    let mut args = base.to_vec();
    args.push("--step=-0.1");
    let run = run_in(dir.path(), &args);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("step must be positive"), "stderr: {}", run.stderr);

    let mut args = base.to_vec();
    args.extend_from_slice(&["--step", "wobble"]);
    let run = run_in(dir.path(), &args);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("auto"), "stderr: {}", run.stderr);
}

#[test]
fn qudit_runs_need_an_explicit_dimension() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "rates5.json",
        r#"{"dim": 5, "rates": {
            "1,2": 1.0, "1,3": 2.0, "1,4": 3.0, "1,5": 4.0, "2,3": 5.0,
            "2,4": 6.0, "2,5": 7.0, "3,4": 8.0, "3,5": 9.0, "4,5": 10.0
        }}"#,
    );

    let run = run_in(
        dir.path(),
        &["roundtrip", "--scheme", "qudit", "--rates", "rates5.json", "--trials", "3"],
    );
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("explicit --dim"), "stderr: {}", run.stderr);

    let run = run_in(
        dir.path(),
        &[
            "roundtrip", "--scheme", "qudit", "--dim", "5", "--rates", "rates5.json",
            "--trials", "3", "--step", "0.18",
        ],
    );
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let doc = read_json(&dir.path().join("roundtrip.json"));
    assert!(doc["aggregate"]["max_trace_distance"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn missing_configuration_is_reported_before_any_work() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write(dir.path(), "rates4.json", RATES4);
    write_state(dir.path(), "state.json", &random_density_matrix(3, 32).unwrap());

    let run = run_in(dir.path(), &["simulate", "--state", "state.json", "--rates", "rates.json"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("no scheme given"), "stderr: {}", run.stderr);

    let run = run_in(dir.path(), &["simulate", "--state", "state.json", "--scheme", "qutrit"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("no rates given"), "stderr: {}", run.stderr);

    let run = run_in(
        dir.path(),
        &[
            "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates", "rates4.json",
        ],
    );
    assert_eq!(run.code, 2);
    assert!(
        run.stderr.contains("rates are for dimension 4, experiment is dimension 3"),
        "stderr: {}",
        run.stderr
    );

    write_state(dir.path(), "truth4.json", &random_density_matrix(4, 33).unwrap());
    assert_eq!(
        run_in(
            dir.path(),
            &[
                "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates",
                "rates.json",
            ],
        )
        .code,
        0
    );
    let run = run_in(
        dir.path(),
        &[
            "reconstruct", "--data", "measurements.csv", "--truth", "truth4.json", "--scheme",
            "qutrit", "--rates", "rates.json",
        ],
    );
    assert_eq!(run.code, 2);
    assert!(
        run.stderr.contains("truth state has dimension 4"),
        "stderr: {}",
        run.stderr
    );
}

#[test]
fn noisy_reconstruction_repairs_only_on_request() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.json", RATES3);
    write_state(dir.path(), "state.json", &random_density_matrix(3, 42).unwrap());

    // Heavy noise through a condition number in the thousands guarantees
    // the raw inversion leaves the state body.
    assert_eq!(
        run_in(
            dir.path(),
            &[
                "simulate", "--state", "state.json", "--scheme", "qutrit", "--rates",
                "rates.json", "--sigma", "0.05", "--seed", "42",
            ],
        )
        .code,
        0
    );

    let base = [
        "reconstruct", "--data", "measurements.csv", "--scheme", "qutrit", "--rates",
        "rates.json",
    ];
    let run = run_in(dir.path(), &base);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(run.stdout.contains("psd = false"), "stdout: {}", run.stdout);
    assert!(run.stdout.contains("repair applied = false"));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["psd"]["psd"], false);
    assert!(report.get("repaired").is_none());

    let mut args = base.to_vec();
    args.push("--psd-repair");
    let run = run_in(dir.path(), &args);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(run.stdout.contains("repair applied = true"), "stdout: {}", run.stdout);
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["psd_repair_applied"], true);
    assert!(report.get("repaired").is_some());
}

#[test]
fn bell_records_ignore_rates_outside_the_informative_pairs() {
    let dir = TempDir::new().unwrap();
    // Same (1,4) and (2,3) rates; everything else differs, including four
    // frozen zero pairs. Both multipliers fail positivity, so this also
    // exercises --force on a set that is useful despite it.
    write(
        dir.path(),
        "lively.json",
        r#"{"dim": 4, "rates": {"1,2": 9.0, "1,3": 8.0, "1,4": 2.0, "2,3": 3.0, "2,4": 7.0, "3,4": 6.0}}"#,
    );
    write(
        dir.path(),
        "frozen.json",
        r#"{"dim": 4, "rates": {"1,2": 0.0, "1,3": 0.0, "1,4": 2.0, "2,3": 3.0, "2,4": 0.0, "3,4": 0.0},
            "frozen": ["1,2", "1,3", "2,4", "3,4"]}"#,
    );
    let truth = bell_mixture_state(&BellMixture::new(0.4, 0.2, 0.25).unwrap()).unwrap();
    write_state(dir.path(), "bell.json", &truth);

    // The frozen multiplier is genuinely not positive semidefinite: the
    // vector (1, -1, -1, 1) sees 2e^(-2t) + 2e^(-3t) - 4 < 0 for t > 0.
    let run = run_in(
        dir.path(),
        &[
            "simulate", "--state", "bell.json", "--scheme", "bell", "--rates", "frozen.json",
            "--out", "frozen",
        ],
    );
    assert_eq!(run.code, 3, "stderr: {}", run.stderr);

    // Auto stepping keys off the fastest rate, which differs between the
    // two files, so pin the grid explicitly for the comparison.
    for (rates, out) in [("lively.json", "lively"), ("frozen.json", "frozen")] {
        let run = run_in(
            dir.path(),
            &[
                "simulate", "--state", "bell.json", "--scheme", "bell", "--rates", rates,
                "--out", out, "--step", "0.2", "--force",
            ],
        );
        assert_eq!(run.code, 0, "stderr: {}", run.stderr);
        let run = run_in(
            dir.path(),
            &[
                "reconstruct", "--data", &format!("{out}/measurements.csv"), "--scheme",
                "bell", "--rates", rates, "--out", out, "--step", "0.2",
            ],
        );
        assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    }

    let csv_lively = fs::read(dir.path().join("lively/measurements.csv")).unwrap();
    let csv_frozen = fs::read(dir.path().join("frozen/measurements.csv")).unwrap();
    assert_eq!(csv_lively, csv_frozen, "spectator rates leaked into the record");

    let report_lively = fs::read(dir.path().join("lively/report.json")).unwrap();
    let report_frozen = fs::read(dir.path().join("frozen/report.json")).unwrap();
    assert_eq!(report_lively, report_frozen, "spectator rates leaked into the inversion");
}
