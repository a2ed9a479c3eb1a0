use std::path::Path;
use std::process::{Command, Output};

fn genkant(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genkant"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("GENKANT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path, stem: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn iterate_admissible_observable_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = genkant(
        dir.path(),
        &[
            "iterate",
            "--op",
            "kantorovich",
            "--i",
            "1",
            "--f",
            "3*t^2-4*t",
            "--m",
            "500",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "iterate");
    assert_eq!(s["verdict"], "converges");
    assert!((s["target"].as_f64().unwrap() + 1.0).abs() < 1e-9);
    let csv = std::fs::read_to_string(dir.path().join("iterate.csv")).unwrap();
    assert!(csv
        .lines()
        .any(|l| l == "m,sup_error,lower_interval,upper_interval"));
}

#[test]
fn iterate_inadmissible_observable_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let out = genkant(dir.path(), &["iterate", "--f", "t", "--m", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "iterate");
    assert_eq!(s["verdict"], "diverges");
    assert!((s["certified_floor"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn gap02_survey_stays_below_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = genkant(dir.path(), &["gap02", "--i", "1", "--x", "0.9,0.99,0.999"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "gap02");
    assert!(s["max_gap"].as_f64().unwrap() < 2.0);
    assert!(s["min_wedge"].as_f64().unwrap() > 0.0);
}

#[test]
fn every_csv_starts_with_the_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 7] = [
        &[
            "iterate",
            "--op",
            "bernstein",
            "--k",
            "3",
            "--f",
            "t^2",
            "--m",
            "40",
        ],
        &["cesaro", "--f", "3*t^2-4*t", "--m", "20"],
        &["dual", "--x", "0.5", "--m", "3", "--eps", "1e-5"],
        &["weights", "--i", "2", "--x", "0.9"],
        &[
            "kernel-check",
            "--i",
            "1,2",
            "--j",
            "50",
            "--quad-points",
            "20",
        ],
        &["disc-sim", "--n", "5000", "--re", "0.4", "--im", "0.3"],
        &["bernstein-rate", "--k", "4"],
    ];
    for args in runs {
        let out = genkant(dir.path(), args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let stem = args[0];
        let csv = std::fs::read_to_string(dir.path().join(format!("{stem}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), format!("# genkant {stem}"));
        let cfg = lines.next().unwrap().strip_prefix("# config ").unwrap();
        let cfg: serde_json::Value = serde_json::from_str(cfg).unwrap();
        assert_eq!(cfg["command"], stem);
        assert_eq!(summary(dir.path(), stem)["config"], cfg);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "disc-sim", "--n", "20000", "--re", "0.1", "--im", "-0.2", "--seed", "9", "--every", "7",
    ];
    for dir in [&a, &b] {
        assert_eq!(genkant(dir.path(), &args).status.code(), Some(0));
    }
    for f in ["disc-sim.csv", "disc-sim.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_genkant"))
        .args(["weights", "--x", "0.5"])
        .env("GENKANT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("weights.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage errors
    assert_eq!(genkant(dir.path(), &["--bogus"]).status.code(), Some(64));
    assert_eq!(genkant(dir.path(), &["iterate"]).status.code(), Some(64));
    assert_eq!(genkant(dir.path(), &["frobnicate"]).status.code(), Some(64));
    assert_eq!(genkant(dir.path(), &["--help"]).status.code(), Some(0));
    // domain errors
    let out = genkant(dir.path(), &["weights", "--i", "0", "--x", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
    assert_eq!(
        genkant(dir.path(), &["weights", "--x", "1.5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        genkant(dir.path(), &["iterate", "--f", "sin(t)"])
            .status
            .code(),
        Some(1)
    );
    // unattainable accuracy reports the achieved bound
    let out = genkant(
        dir.path(),
        &["dual", "--x", "0.5", "--m", "2", "--eps", "1e-300"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("achieved"));
}

#[test]
fn verify_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = genkant(dir.path(), &["verify", "--i", "1", "--only", "2,6,7"]);
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().filter(|l| l.contains("PASS")).count(), 3);
    let s = summary(dir.path(), "verify");
    assert_eq!(s["passed"], true);
    assert_eq!(
        genkant(dir.path(), &["verify", "--only", "13"])
            .status
            .code(),
        Some(1)
    );
}
