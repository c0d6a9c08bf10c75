//! Runs one acceptance criterion and prints every check.
//!
//! cargo run --release -p harmonic-rmt --example criterion -- <id> [samples]

use harmonic_rmt::verify::{run_criterion, VerifyConfig};

fn main() {
    let id: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let samples: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let rep = run_criterion(id, &VerifyConfig { seed: 42, samples }).unwrap();
    println!("{}", rep.summary());
    for c in &rep.checks {
        println!(
            "  [{}] {} value={:e} tol={:e} {}",
            if c.passed { "ok" } else { "XX" },
            c.name,
            c.value,
            c.tolerance,
            c.note.clone().unwrap_or_default()
        );
    }
}
