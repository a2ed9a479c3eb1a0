//! The acceptance suite: every criterion at full size, one line each.
//!
//! Runs without the libtest harness so the lines always reach the output.

use genkant::verify::{self, CriterionResult, VerifyConfig};
use std::process::Command;
use std::time::Instant;

// Two `verify --quick` runs through the binary must write identical files,
// on top of the in-process check.
fn reproducibility(cfg: &VerifyConfig) -> CriterionResult {
    let mut r = verify::run_criterion(12, cfg).expect("criterion 12 runs");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_genkant"))
            .args(["verify", "--quick", "--out"])
            .arg(d.path())
            .stderr(std::process::Stdio::null())
            .stdout(std::process::Stdio::null())
            .status()
            .expect("binary runs");
        r.require(status.success(), "cli verify --quick", format!("{status}"));
    }
    for f in ["verify.csv", "verify.json"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap_or_default();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap_or_default();
        r.require(
            !a.is_empty() && a == b,
            format!("cli {f}"),
            format!("{} bytes", a.len()),
        );
    }
    if r.passed {
        r.summary
            .push_str("; two CLI verify runs write identical files");
    }
    r
}

fn main() {
    // `cargo test -- --list` and filters come through here too
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let cfg = VerifyConfig::default();
    let mut failed = Vec::new();
    for id in 1..=verify::CRITERIA {
        let t0 = Instant::now();
        let r = if id == 12 {
            reproducibility(&cfg)
        } else {
            match verify::run_criterion(id, &cfg) {
                Ok(r) => r,
                Err(e) => {
                    let mut r = CriterionResult::new(id, verify::title(id));
                    r.require(false, "error", e.to_string());
                    r.summary = format!("error: {e}");
                    r
                }
            }
        };
        println!("{}  [{:.1}s]", r.line(), t0.elapsed().as_secs_f64());
        if !r.passed {
            for (k, v) in r.rows.iter().filter(|(_, v)| v.ends_with("[FAIL]")) {
                println!("    {k}: {v}");
            }
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", verify::CRITERIA);
    } else {
        println!("acceptance: criteria {failed:?} fail");
        std::process::exit(1);
    }
}
