//! Acceptance gate: every criterion must pass at its stated tolerance.
//! Prints one line per criterion; run with `--nocapture` to see them on
//! success.

use std::time::Instant;

use sid::acceptance::run_all;
use sid::Tolerances;

#[test]
fn acceptance_criteria() {
    let start = Instant::now();
    let reports = run_all(&Tolerances::from_env(), 0);
    let mut all_pass = true;
    for r in &reports {
        println!(
            "criterion {}: {} — {} [{} ms] {}",
            r.index,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.millis,
            r.details
        );
        all_pass &= r.passed;
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!("total wall clock: {elapsed:.1}s (budget 120s)");
    assert!(all_pass, "at least one acceptance criterion failed");
    assert!(
        elapsed < 120.0,
        "acceptance suite exceeded the two-minute budget: {elapsed:.1}s"
    );
}
