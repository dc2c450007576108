//! End-to-end acceptance: the full check suite at default settings,
//! one pass/fail line per check, each with its pinned threshold and a
//! wall-clock budget.

use evolin::suite::{run_suite, SuiteOptions, BUDGET_SECONDS};

#[test]
fn acceptance_suite() {
    let outcome = run_suite(&SuiteOptions::default()).expect("suite runs to completion");
    assert_eq!(outcome.checks.len(), BUDGET_SECONDS.len());

    let mut failures = Vec::new();
    for (i, check) in outcome.checks.iter().enumerate() {
        let (expected_name, budget) = BUDGET_SECONDS[i];
        assert_eq!(check.name, expected_name, "check order is pinned");
        let seconds = outcome.seconds[i];
        let ok = check.passed && seconds <= budget;
        println!(
            "{} {}: achieved {:.3e} (threshold {:.3e}), {seconds:.2}s of {budget:.0}s budget",
            if ok { "PASS" } else { "FAIL" },
            check.name,
            check.achieved,
            check.threshold,
        );
        if !check.passed {
            failures.push(format!(
                "{}: achieved {:.3e} vs threshold {:.3e}; {}",
                check.name, check.achieved, check.threshold, check.detail
            ));
        }
        if seconds > budget {
            failures.push(format!(
                "{}: took {seconds:.2}s, budget is {budget:.0}s",
                check.name
            ));
        }
    }
    assert!(failures.is_empty(), "acceptance failures:\n{}", failures.join("\n"));
}
