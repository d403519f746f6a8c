//! Evaluate every tier with the full pipeline and both ablations and print
//! a markdown summary.
//!
//!     cargo run --release --example evaluate_tiers -- 30

use dlo_trace::harness::{emit_reports, run_tier, Ablations, EvalConfig, ReportFormat, Tier};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = std::env::args().nth(1).map_or(Ok(10), |s| s.parse())?;
    let mut reports = Vec::new();
    for tier in Tier::ALL {
        for ablations in [
            Ablations::default(),
            Ablations { analytic_tracer: true, ..Default::default() },
            Ablations { no_cancel: true, ..Default::default() },
        ] {
            reports.push(run_tier(tier, trials, 0, &EvalConfig { ablations, ..Default::default() }));
        }
    }
    print!("{}", emit_reports(&reports, ReportFormat::Markdown)?);
    Ok(())
}
