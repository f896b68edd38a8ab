//! Acceptance suite. Prints one PASS/FAIL line per criterion, then checks
//! that a corrupted sigma is rejected. Exits nonzero on any failure.

use std::process::ExitCode;

use structembed::cli::{verify_with, CommandKind, Flags, RunConfig};
use structembed::diagnostics::sigma_unchecked;
use structembed::structured::StructuredMatrix;
use structembed::verify::{run_one, VerifyOptions, CRITERIA};

fn off_by_one_sigma(a: &StructuredMatrix, i1: usize, i2: usize, n1: usize, n2: usize) -> f64 {
    sigma_unchecked(a, i1, i2, (n1 + 1) % a.cols(), n2)
}

fn corrupted_sigma_is_caught() -> bool {
    let cfg = RunConfig::resolve(CommandKind::Verify, &Flags::default()).expect("default config");
    let opts = VerifyOptions { only: Some(vec!["sigma".into()]), sigma_fn: off_by_one_sigma, ..VerifyOptions::default() };
    let mut out = Vec::new();
    let ok = verify_with(&cfg, &opts, &mut out).expect("verify runs");
    let text = String::from_utf8(out).expect("utf-8");
    !ok && text.contains("FAIL [2] sigma")
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let opts = VerifyOptions::default();
    let mut failed = 0;
    for &(id, _) in CRITERIA.iter() {
        let r = run_one(id, &opts);
        println!("{}", r.line());
        if !r.outcome.passed {
            failed += 1;
        }
    }
    let control = corrupted_sigma_is_caught();
    println!("{} negative control: corrupted sigma is rejected", if control { "PASS" } else { "FAIL" });
    if !control {
        failed += 1;
    }
    println!("acceptance: {} of {} checks passed", CRITERIA.len() + 1 - failed, CRITERIA.len() + 1);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
