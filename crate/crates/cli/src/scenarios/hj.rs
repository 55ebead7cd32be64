use anyhow::Result;
use timeless_core::extended_hj::{
    time_correlation_check, total_time_sensitivity, ActionProfile, MirrorPair,
};

use crate::config::HjParams;
use crate::report::{stopwatch, Check, Table, VerificationReport};

/// Energy steps of the finite-difference convergence check, relative to `max(|E|, 1)`.
const FD_STEPS: [f64; 2] = [2e-2, 1e-2];

pub fn run(p: &HjParams, report: &mut VerificationReport) -> Result<()> {
    let pair = MirrorPair::parse(&p.system, &p.partner())?;
    let (q1, q2) = (p.q1, p.q2());

    let (c, secs) = stopwatch(|| time_correlation_check(&pair, q1, q2, p.e1));
    let c = c?;
    report.check(Check::below("residual", c.residual, p.tol).timed(secs));
    if let Some(t1) = p.expected_t1 {
        report.check(Check::below("t1_error", (c.t1 - t1).abs(), p.tol));
    }
    if let Some(t2) = p.expected_t2 {
        report.check(Check::below("t2_error", (c.t2 - t2).abs(), p.tol));
    }

    let mut table = Table::new(
        "correlation",
        &["q1", "q2", "e1", "t1", "t2", "constant", "residual"],
    );
    let mut worst = 0.0f64;
    for j in 0..=p.sweep {
        let f = j as f64 / p.sweep as f64;
        let r = time_correlation_check(&pair, f * q1, f * q2, p.e1)?;
        worst = worst.max(r.residual);
        table.push(vec![
            f * q1,
            f * q2,
            p.e1,
            r.t1,
            r.t2,
            r.constant,
            r.residual,
        ]);
    }
    report.check(Check::below("residual_sweep_max", worst, p.tol));
    report.table(table);

    // Moving energy δ from one subsystem to the other leaves t₁ + t₂ unchanged.
    let delta = p.transfer * p.e1.abs();
    let sens = total_time_sensitivity(&pair, q1, q2, p.e1, delta)?;
    report.check(Check::below(
        "stationarity_sensitivity",
        sens / delta,
        p.tol,
    ));

    let profile = ActionProfile::new(pair.sys1().clone());
    let exact = profile.time_exact(q1, p.e1)?;
    let scale = p.e1.abs().max(1.0);
    let mut fd = Table::new(
        "time_derivative",
        &["de", "finite_difference", "exact", "error"],
    );
    let mut errors = Vec::new();
    for h in FD_STEPS {
        let de = h * scale;
        let v = profile.time_finite_difference(q1, p.e1, de)?;
        fd.push(vec![de, v, exact, (v - exact).abs()]);
        errors.push((v - exact).abs());
    }
    if errors[1] > 0.0 {
        report.check(Check::within(
            "time_fd_ratio",
            errors[0] / errors[1],
            3.5,
            4.5,
        ));
    }
    report.table(fd);
    Ok(())
}
