//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use stimpair::verify::Suite;

fn main() {
    let report = Suite::default().run(&[]).expect("check names are static");
    println!();
    println!("acceptance criteria");
    for check in &report.checks {
        println!("{check}");
    }
    let failed: Vec<String> = report
        .failures()
        .map(|c| format!("{} {}", c.criterion, c.name))
        .collect();
    println!(
        "{} passed, {} failed",
        report.checks.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        eprintln!("failing criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
