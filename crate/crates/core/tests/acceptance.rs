//! Acceptance run: one PASS/FAIL line per criterion, with the runtime
//! budget enforced on top of each criterion's own verdict.

use std::time::{Duration, Instant};

use mixbound::report::{self, Status};
use mixbound::seed::DEFAULT_SEED;
use mixbound::verify;

fn budget(id: u32) -> Duration {
    Duration::from_secs(match id {
        1 | 2 | 4 | 8 => 30,
        3 | 13 => 5,
        6 => 1,
        5 | 7 | 10 => 120,
        9 => 10,
        11 => 60,
        12 => 180,
        14 => 300,
        _ => 600,
    })
}

#[test]
fn acceptance_criteria() {
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    let mut with_four = Vec::new();
    for id in 1..=14 {
        let start = Instant::now();
        let result = verify::run_criterion(id, DEFAULT_SEED, 4).expect("criterion runs");
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget(id);
        let ok = result.status == Status::Pass && in_budget;
        let line = format!(
            "criterion {id:>2} {} {} ({:.2}s, budget {}s{}) {}",
            if ok { "PASS" } else { "FAIL" },
            result.name,
            elapsed.as_secs_f64(),
            budget(id).as_secs(),
            if in_budget { "" } else { ", over budget" },
            result.summary
        );
        println!("{line}");
        lines.push(line);
        if !ok {
            failed.push(id);
        }
        with_four.push(result);
    }

    // Determinism across worker counts: rerun the whole suite on one worker.
    let one = verify::verify_suite("all", DEFAULT_SEED, 1).expect("suite runs");
    let four = verify::suite_report("all", DEFAULT_SEED, with_four).unwrap();
    let a = report::to_json(&one).unwrap();
    let b = report::to_json(&four).unwrap();
    let identical = a == b;
    println!("criterion 15 {} determinism (reports for workers 1 and 4 are bit-identical: {identical})", if identical { "PASS" } else { "FAIL" });
    if !identical {
        failed.push(15);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
