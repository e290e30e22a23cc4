//! End-to-end acceptance suite. Each check prints one pass/fail line; the
//! test fails if any check fails.

use paa_core::verify::run_all;

#[test]
fn acceptance() {
    let results = run_all();
    let mut failed = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} - {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance check(s) failed");
}
