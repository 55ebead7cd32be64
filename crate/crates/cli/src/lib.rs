//! Scenario runner for `timeless-core`: JSON configs in, CSV tables and a
//! pass/fail `report.json` out.

pub mod config;
pub mod report;
pub mod scenarios;
pub mod selftest;

pub use config::{load_config, parse_config, Scenario, ScenarioConfig, SCENARIOS};
pub use report::{Check, Table, VerificationReport};
pub use scenarios::run_scenario;
pub use selftest::{builtin_scenarios, run_selftest, SelftestReport};
