//! Human-readable summaries on stdout.

use charflow::scenario::{ReportDocument, SelfTestReport, TaskOutcome};

fn status<T>(name: &str, t: &Option<TaskOutcome<T>>, show: impl Fn(&T) -> String) {
    match t {
        None => {}
        Some(t) => match (&t.result, &t.error) {
            (Some(v), _) => println!("{name:<11} {}", show(v)),
            (None, Some(e)) => println!("{name:<11} FAILED: {e}"),
            (None, None) => println!("{name:<11} FAILED"),
        },
    }
}

pub fn print_report(r: &ReportDocument) {
    println!("model       {}", r.model.name);
    status("lk", &r.lk, |l| {
        let mut s = format!("{:.9} ± {:.2e} ({} nodes)", l.result.value, l.result.error, l.result.nodes);
        if let Some(d) = &l.result.domain {
            s.push_str(&format!("; domain side {:.6} ± {:.2e}", d.value, d.error));
        }
        s
    });
    status("currents", &r.currents, |c| {
        format!(
            "A = {:.9} ± {:.2e}; max boundary pairing {:.2e} over {} forms",
            c.action.value,
            c.action.error,
            c.boundary.max_abs,
            c.boundary.pairings.len()
        )
    });
    status("orbits", &r.orbits, |o| {
        let mut s = format!("{} closed ({:?})", o.records.len(), o.obstruction);
        for (i, x) in o.records.iter().enumerate().take(8) {
            s.push_str(&format!("\n  #{i} period {:.9} action {:.9} residual {:.1e}", x.period, x.action, x.residual));
        }
        if o.records.len() > 8 {
            s.push_str(&format!("\n  ... {} more", o.records.len() - 8));
        }
        s
    });
    status("ergodicity", &r.ergodicity, |d| {
        let curve: Vec<String> = d.curve().iter().map(|(h, m)| format!("{h:.0e}:{m:.3e}")).collect();
        format!("{:?}; max deviation {}", d.verdict, curve.join(" "))
    });
    status("certify", &r.certify, |c| {
        let c = &c.certificate;
        format!("{:?}; margin {:.4e}, sign {:+}, revalidated {:.4e}", c.status, c.margin, c.sign, c.revalidated_margin)
    });
    for c in &r.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

pub fn print_selftest(r: &SelfTestReport) {
    for e in &r.entries {
        println!("[{}] {:.1} s", e.scenario, e.seconds);
        for t in &e.failed_tasks {
            println!("FAIL task {t}");
        }
        for c in &e.checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    println!("selftest {}", if r.passed() { "passed" } else { "FAILED" });
}
