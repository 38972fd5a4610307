//! Runs the ten acceptance criteria with the default seed and parameters.

use std::io::Write;

use gyrostat::verify::{verify_all, VerifyConfig};

#[test]
fn acceptance_criteria() {
    let report = verify_all(&VerifyConfig::default());
    assert_eq!(report.criteria.len(), 10);
    // Written to the raw handle so the lines show without --nocapture.
    let mut err = std::io::stderr().lock();
    for c in &report.criteria {
        let _ = writeln!(
            err,
            "{} criterion {:>2} {}: metric {:.3e}, threshold {:.1e}; {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.metric,
            c.threshold,
            c.detail
        );
    }
    let failed: Vec<_> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
