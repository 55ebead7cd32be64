//! Built-in configurations covering every scenario.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use crate::config::{
    ClassicalParams, ConstraintParams, ExtendedParams, HjParams, PwParams, Scenario,
};
use crate::report::{write_json, VerificationReport};
use crate::scenarios::run_scenario;

fn defaults<T: serde::de::DeserializeOwned>(doc: serde_json::Value) -> T {
    serde_json::from_value(doc).expect("built-in config")
}

/// Named built-in scenarios in run order.
pub fn builtin_scenarios() -> Vec<(&'static str, Scenario)> {
    let pw: PwParams = defaults(serde_json::json!({
        "d_s": 2, "d": 8, "dt": 0.5, "refinements": 3, "incommensurate_gap": 1.0, "degradation_steps": 4
    }));
    let classical: ClassicalParams = defaults(serde_json::json!({}));
    let extended: ExtendedParams = defaults(serde_json::json!({}));
    let hj_free: HjParams = defaults(serde_json::json!({
        "system": "free_particle(1)", "q1": 3.0, "e1": 0.5, "expected_t1": 3.0, "expected_t2": -3.0, "tol": 1e-10
    }));
    let hj_harmonic: HjParams = defaults(serde_json::json!({
        "system": "harmonic(1,1)", "q1": 1.0, "e1": 1.0, "tol": 1e-6
    }));
    let constraints: ConstraintParams = defaults(serde_json::json!({}));
    vec![
        ("pw_quantum", Scenario::PwQuantum(pw)),
        (
            "classical_liouville",
            Scenario::ClassicalLiouville(classical),
        ),
        ("extended", Scenario::Extended(extended)),
        ("hj_free_particle", Scenario::HjCorrelation(hj_free)),
        ("hj_harmonic", Scenario::HjCorrelation(hj_harmonic)),
        ("constraints", Scenario::Constraints(constraints)),
    ]
}

#[derive(Debug, Serialize)]
pub struct SelftestEntry {
    pub name: String,
    pub directory: String,
    pub config: Scenario,
    pub report: VerificationReport,
}

#[derive(Debug, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub tol_scale: f64,
    pub pass: bool,
    pub scenarios: Vec<SelftestEntry>,
}

/// Runs every built-in scenario into `out/NN_name/` and writes the combined
/// `out/report.json`.
pub fn run_selftest(out: &Path, seed: u64, tol_scale: f64) -> Result<SelftestReport> {
    let mut entries = Vec::new();
    for (i, (name, mut scenario)) in builtin_scenarios().into_iter().enumerate() {
        scenario.set_seed(seed);
        scenario.scale_tolerances(tol_scale)?;
        let report = run_scenario(&scenario, None, tol_scale)?;
        let directory = format!("{i:02}_{name}");
        report.write(&out.join(&directory))?;
        entries.push(SelftestEntry {
            name: name.to_string(),
            directory,
            config: scenario,
            report,
        });
    }
    let summary = SelftestReport {
        seed,
        tol_scale,
        pass: entries.iter().all(|e| e.report.pass),
        scenarios: entries,
    };
    write_json(&out.join("report.json"), &summary)?;
    Ok(summary)
}
