//! Acceptance suite: one line per criterion, then a failure if any check missed.

use std::io::Write;

use harmonic_rmt::verify::{run_criterion, VerifyConfig, CRITERIA};

#[test]
fn acceptance_criteria() {
    let cfg = VerifyConfig {
        seed: 42,
        samples: 100_000,
    };
    // Written to the process stdout directly so the lines survive test output capture.
    let mut out = std::io::stdout().lock();
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        let report = run_criterion(id, &cfg).expect("known criterion");
        writeln!(out, "{}", report.summary()).unwrap();
        for c in report.failures() {
            writeln!(
                out,
                "    failed: {} (value {:e}, target {:e}, tolerance {:e}) {}",
                c.name,
                c.value,
                c.target,
                c.tolerance,
                c.note.clone().unwrap_or_default()
            )
            .unwrap();
        }
        out.flush().unwrap();
        if !report.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "criteria {failed:?} failed");
}
