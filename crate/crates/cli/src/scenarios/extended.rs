use anyhow::Result;
use timeless_core::classical_liouville::{
    flow_map, HamiltonianField, LibrarySystem, PhaseSpacePoint,
};
use timeless_core::extended_hj::{extend, extended_flow, reduction_deviation, ExtendedPhaseState};

use crate::config::ExtendedParams;
use crate::report::{stopwatch, Check, Table, VerificationReport};

pub fn run(p: &ExtendedParams, report: &mut VerificationReport) -> Result<()> {
    let h: LibrarySystem = p.system.parse()?;
    let x0 = ExtendedPhaseState::on_surface(&h, p.q0.clone(), p.p0.clone(), p.t0)?;
    report.check(Check::below(
        "initial_constraint_residual",
        x0.constraint_residual(&h),
        p.tol,
    ));
    let tau = p.steps as f64 * p.dtau;

    let (run, secs) = stopwatch(|| extended_flow(&extend(&h), &x0, tau, p.dtau, p.record_every));
    let run = run?;
    report.check(Check::below("p0_drift", run.p0_drift, p.tol).timed(secs));
    report.check(Check::below("clock_step_error", run.max_clock_step_error, p.tol).timed(secs));

    let (dev, secs) = stopwatch(|| reduction_deviation(&h, &x0, tau, p.dtau));
    report.check(Check::below("reduction_deviation", dev?, p.reduction_tol).timed(secs));

    let (direct, secs) =
        stopwatch(|| flow_map(&h, &PhaseSpacePoint::new(x0.reduced())?, tau, p.dtau));
    let direct = direct?;
    let final_dev = run
        .final_state
        .reduced()
        .iter()
        .zip(direct.as_slice())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    report.check(Check::below("flow_map_deviation", final_dev, p.reduction_tol).timed(secs));

    let k = h.dof();
    let mut header = vec!["tau".to_string(), "t".to_string()];
    header.extend((1..=k).map(|i| format!("q{i}")));
    header.extend((1..=k).map(|i| format!("p{i}")));
    header.extend(["p0".to_string(), "constraint_residual".to_string()]);
    let mut table = Table {
        name: "trajectory".into(),
        header,
        rows: Vec::new(),
    };
    for (s, x) in &run.recorded {
        let mut row = vec![*s, x.t];
        row.extend(&x.q);
        row.extend(&x.p);
        row.extend([x.p0, x.constraint_residual(&h)]);
        table.push(row);
    }
    report.table(table);

    let mut summary = Table::new(
        "extended_summary",
        &[
            "steps",
            "dtau",
            "p0_drift",
            "clock_step_error",
            "clock_offset",
            "energy_drift",
        ],
    );
    summary.push(vec![
        run.steps as f64,
        run.step,
        run.p0_drift,
        run.max_clock_step_error,
        run.final_state.t - p.t0 - tau,
        run.energy_drift,
    ]);
    report.table(summary);
    Ok(())
}
