//! Runs all thirteen checks at full size and prints one line per check.

use bregvar::suite::{run_criterion, Level, SuiteConfig, CRITERIA};

const SEED: u64 = 20240607;

fn main() {
    let cfg = SuiteConfig::new(Level::Full, SEED);
    let mut failed = Vec::new();
    for (id, name, _) in CRITERIA {
        let r = run_criterion(id, &cfg).expect("known criterion");
        let ok = r.passed && r.within_budget();
        let budget = r
            .budget_seconds
            .map_or(String::new(), |b| format!(" (budget {b:.0}s)"));
        println!(
            "C{id:<2} {:<4} {name}  [{:.2}s{budget}]",
            if ok { "PASS" } else { "FAIL" },
            r.seconds
        );
        if !ok {
            for f in &r.failures {
                println!("      {f}");
            }
            if let Some(e) = &r.error {
                println!("      error: {e}");
            }
            if !r.within_budget() {
                println!("      over wall-time budget");
            }
            failed.push(id);
        }
    }
    println!("{} of {} checks passed", CRITERIA.len() - failed.len(), CRITERIA.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
