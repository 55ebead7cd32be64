use std::path::Path;

use anyhow::{ensure, Result};
use timeless_core::generalized_constraints::{
    build_constraint_state, classical_momentum_constraint, covariance_check,
    global_invariance_deviation, position_basis, relational_readout, ConstraintSpec, GeneratorId,
    GeneratorLabel,
};
use timeless_core::quantum_pw::{
    build_cyclic_clock, build_history_state, condition_on_clock, Subsystem,
};
use timeless_core::ComplexVector;

use crate::config::ConstraintParams;
use crate::report::{stopwatch, Check, Table, VerificationReport};

/// Eigenvalue tolerance when collecting the constraint space.
const EIGEN_TOL: f64 = 1e-9;

pub fn run(
    p: &ConstraintParams,
    base_dir: Option<&Path>,
    report: &mut VerificationReport,
) -> Result<()> {
    let gs: GeneratorId = p.generator_s.parse()?;
    let gc: GeneratorId = p.generator_c.parse()?;
    let spec = ConstraintSpec::new(
        gs.matrix(base_dir)?,
        gc.matrix(base_dir)?,
        p.target,
        gs.label(),
    )?;
    let states = build_constraint_state(&spec, EIGEN_TOL)?;
    report.check(Check::above(
        "constraint_space_dim",
        states.len() as f64,
        0.0,
    ));

    let mut table = Table::new(
        "covariance",
        &["state", "s", "covariance", "global_invariance"],
    );
    let (worst, secs) = stopwatch(|| -> Result<(f64, f64, f64)> {
        let mut worst = (0.0f64, 0.0f64, 0.0f64);
        for (i, st) in states.iter().enumerate() {
            worst.0 = worst.0.max(spec.residual(st.psi())?);
            for j in 0..p.shifts {
                let s = if p.shifts == 1 {
                    p.shift_range
                } else {
                    -p.shift_range + 2.0 * p.shift_range * j as f64 / (p.shifts - 1) as f64
                };
                let cov = covariance_check(st, &spec, s)?;
                let inv = global_invariance_deviation(st, &spec, s)?;
                worst.1 = worst.1.max(cov);
                worst.2 = worst.2.max(inv);
                table.push(vec![i as f64, s, cov, inv]);
            }
        }
        Ok(worst)
    });
    let (residual, cov, inv) = worst?;
    report.check(Check::below("constraint_residual", residual, p.tol));
    report.check(Check::below("covariance_max", cov, p.tol).timed(secs));
    report.check(Check::below("global_invariance_max", inv, p.tol).timed(secs));
    report.table(table);

    let (ds, dc) = spec.dims();
    if ds == dc {
        let mut worst = 0.0f64;
        for st in &states {
            let r = relational_readout(st.psi(), (ds, dc), Subsystem::System, &position_basis(ds))?;
            let total: f64 = r.branches.iter().map(|b| b.probability).sum();
            worst = worst.max((total - 1.0).abs());
        }
        report.check(Check::below("readout_probability_error", worst, p.tol));
    }

    energy_instance(p, report)?;
    two_particle(p, report)
}

/// Energy generators with a cyclic clock reproduce the history-state readout.
fn energy_instance(p: &ConstraintParams, report: &mut VerificationReport) -> Result<()> {
    let (d, dt) = (p.energy_d, p.energy_dt);
    let clock = build_cyclic_clock(d, dt)?;
    let h_s = clock.commensurate_hamiltonian(&[0, 1])?;
    let spec = ConstraintSpec::new(
        h_s.clone(),
        clock.hamiltonian().clone(),
        0.0,
        GeneratorLabel::Energy,
    )?;
    let states = build_constraint_state(&spec, EIGEN_TOL)?;
    ensure!(!states.is_empty(), "energy constraint space is empty");
    let phi0 = ComplexVector::uniform(2);
    let hs = build_history_state(&h_s, &phi0, &clock)?;
    let captured: f64 = states
        .iter()
        .map(|s| s.psi().inner(hs.psi()).map(|z| z.norm_sqr()))
        .sum::<timeless_core::Result<f64>>()?;
    report.check(Check::below(
        "energy_space_capture_error",
        (captured - 1.0).abs(),
        p.tol,
    ));

    let readout = relational_readout(hs.psi(), (2, d), Subsystem::Clock, clock.time_states())?;
    let mut table = Table::new("cross_module", &["k", "probability", "infidelity"]);
    let mut worst = 0.0f64;
    for b in &readout.branches {
        let pw = condition_on_clock(&hs, b.index)?;
        let inf = 1.0 - pw.fidelity(&b.state)?;
        worst = worst
            .max(inf.abs())
            .max((b.probability - 1.0 / d as f64).abs());
        table.push(vec![b.index as f64, b.probability, inf]);
    }
    report.check(Check::holds(
        "cross_module_complete",
        readout.empty.is_empty(),
    ));
    report.check(Check::below("cross_module_infidelity", worst, p.tol));
    report.table(table);
    Ok(())
}

fn two_particle(p: &ConstraintParams, report: &mut VerificationReport) -> Result<()> {
    let tp = &p.two_particle;
    let sc = classical_momentum_constraint(tp.m1, tp.m2, tp.p_total, tp.p1)?;
    let (run, secs) = stopwatch(|| sc.run(tp.q1, tp.q2, tp.steps, tp.dt));
    let run = run?;
    report.check(
        Check::below(
            "total_momentum_drift",
            run.total_momentum_drift,
            p.momentum_tol,
        )
        .timed(secs),
    );
    let v_err = (run.relative_velocity - run.expected_relative_velocity).abs();
    let mut table = Table::new(
        "two_particle",
        &[
            "steps",
            "dt",
            "total_momentum_drift",
            "p1_drift",
            "p2_drift",
            "center_of_mass_drift",
            "relative_velocity",
            "expected_relative_velocity",
        ],
    );
    table.push(vec![
        run.steps as f64,
        tp.dt,
        run.total_momentum_drift,
        run.p1_drift,
        run.p2_drift,
        run.center_of_mass_drift,
        run.relative_velocity,
        run.expected_relative_velocity,
    ]);
    report.table(table);
    report.check(Check::below(
        "relative_velocity_error",
        v_err,
        1e-6 * run.expected_relative_velocity.abs().max(1.0),
    ));
    Ok(())
}
