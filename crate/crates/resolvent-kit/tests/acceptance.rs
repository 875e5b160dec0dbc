//! Acceptance criteria 1 to 10, one line each.

use std::process::Command;
use std::time::Instant;

use resolvent_kit::suite::{self, CriterionRun};

fn line(k: usize, pass: bool, detail: &str) -> bool {
    println!("criterion {k:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn summary(run: &CriterionRun) -> String {
    let ok = run.rows.iter().filter(|r| r.pass).count();
    let budget = run.budget().map_or("-".to_string(), |b| format!("{b:.0}s"));
    let failed: Vec<&str> = run.rows.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    let mut s = format!(
        "({ok}/{} checks, {:.2}s of {budget})",
        run.rows.len(),
        run.runtime
    );
    if !failed.is_empty() {
        s.push_str(&format!(" failing: {}", failed.join("; ")));
    }
    if !run.within_budget() {
        s.push_str(" over budget");
    }
    s
}

fn main() {
    let mut all = true;
    for k in 1..=9 {
        let run = suite::run_criterion(k);
        all &= line(k, run.pass() && run.within_budget(), &summary(&run));
    }

    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_resolvent-kit"))
        .args(["suite", "all", "--tier", "coarse"])
        .output();
    let secs = start.elapsed().as_secs_f64();
    let budget = suite::budget(10).unwrap_or(600.0);
    let ok = match &out {
        Ok(o) => o.status.code() == Some(0) && secs <= budget,
        Err(_) => false,
    };
    let code = out.as_ref().ok().and_then(|o| o.status.code());
    all &= line(10, ok, &format!("(suite all --tier coarse: exit {code:?}, {secs:.2}s of {budget:.0}s)"));

    if !all {
        std::process::exit(1);
    }
}
