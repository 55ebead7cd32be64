use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use timeless::{load_config, run_scenario, run_selftest, SCENARIOS};

#[derive(Parser)]
#[command(
    name = "timeless",
    version,
    about = "Relational dynamics verification harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for scenarios that draw random numbers.
        #[arg(long)]
        seed: Option<u64>,
        /// Multiplies every tolerance.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
    /// List the available scenarios.
    ListScenarios,
    /// Run every scenario with built-in configs.
    Selftest {
        #[arg(long, default_value = "selftest_out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            tol_scale,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.scenario.set_seed(s);
            }
            cfg.scenario.scale_tolerances(tol_scale)?;
            let dir = out
                .or(cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("timeless_out"));
            let report = run_scenario(&cfg.scenario, cfg.base_dir.as_deref(), tol_scale)?;
            report.write(&dir)?;
            for c in &report.checks {
                println!(
                    "{} {} = {:e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value
                );
            }
            println!(
                "{}: {} ({} checks, report in {})",
                report.scenario,
                if report.pass { "pass" } else { "FAIL" },
                report.checks.len(),
                dir.display()
            );
            Ok(report.pass)
        }
        Command::ListScenarios => {
            for (name, about) in SCENARIOS {
                println!("{name:<20} {about}");
            }
            Ok(true)
        }
        Command::Selftest {
            out,
            seed,
            tol_scale,
        } => {
            let summary = run_selftest(&out, seed, tol_scale)?;
            for e in &summary.scenarios {
                let failed: Vec<&str> = e.report.failures().map(|c| c.name.as_str()).collect();
                if failed.is_empty() {
                    println!("PASS {} ({} checks)", e.name, e.report.checks.len());
                } else {
                    println!("FAIL {}: {}", e.name, failed.join(", "));
                }
            }
            println!("selftest: {}", if summary.pass { "pass" } else { "FAIL" });
            Ok(summary.pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
