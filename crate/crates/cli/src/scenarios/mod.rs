//! Scenario runners. Each one appends checks and tables to a report.

mod classical;
mod constraints;
mod extended;
mod hj;
mod pw;

use std::path::Path;

use anyhow::{Context, Result};

use crate::config::Scenario;
use crate::report::VerificationReport;

pub use classical::MIN_SPACING_SIGMAS;
pub use pw::DEGRADATION_FLOOR;

/// Runs the full check suite of one scenario. Relative file references in
/// the parameters resolve against `base_dir`.
pub fn run_scenario(
    scenario: &Scenario,
    base_dir: Option<&Path>,
    tol_scale: f64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(scenario.name(), scenario.seed(), tol_scale);
    let out = match scenario {
        Scenario::PwQuantum(p) => pw::run(p, &mut report),
        Scenario::ClassicalLiouville(p) => classical::run(p, &mut report),
        Scenario::Extended(p) => extended::run(p, &mut report),
        Scenario::HjCorrelation(p) => hj::run(p, &mut report),
        Scenario::Constraints(p) => constraints::run(p, base_dir, &mut report),
    };
    out.with_context(|| format!("scenario {}", scenario.name()))?;
    Ok(report)
}
