use anyhow::{ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timeless_core::quantum_pw::{
    build_cyclic_clock, build_history_state, clock_covariance_deviation, conditional_infidelities,
    stationarity_residual, von_neumann_residual,
};
use timeless_core::{ComplexMatrix, ComplexVector, C64};

use crate::config::PwParams;
use crate::report::{stopwatch, Check, Table, VerificationReport};

/// Threshold the incommensurate residual must exceed at the smallest clock.
pub const DEGRADATION_FLOOR: f64 = 1e-3;

fn initial_state(p: &PwParams) -> Result<ComplexVector> {
    Ok(match &p.phi0 {
        Some(v) => ComplexVector::new(v.iter().map(|[re, im]| C64::new(*re, *im)).collect())?
            .normalized()?,
        None => ComplexVector::uniform(p.d_s),
    })
}

pub fn run(p: &PwParams, report: &mut VerificationReport) -> Result<()> {
    let phi0 = initial_state(p)?;
    let levels = p.levels();
    let tol = p.tol;

    let base = build_cyclic_clock(p.d, p.dt)?;
    report.check(Check::below(
        "clock_orthonormality",
        base.orthonormality_deviation(),
        tol,
    ));
    report.check(Check::below(
        "clock_cyclicity",
        base.cyclicity_deviation(),
        tol,
    ));

    // Refinements keep d·dt, hence ω_c and the commensurate H_s, fixed.
    let k0 = (p.d / 4).max(1);
    let mut fidelity = Table::new("fidelity", &["d", "k", "t", "fidelity", "infidelity"]);
    let mut refine = Table::new(
        "refinements",
        &[
            "d",
            "dt",
            "k",
            "stationarity",
            "max_infidelity",
            "covariance",
            "von_neumann_residual",
        ],
    );
    let mut vn: Vec<(usize, f64)> = Vec::new();
    for i in 0..p.refinements {
        let d = p.d << i;
        let dt = p.dt / (1u64 << i) as f64;
        let (out, secs) = stopwatch(|| -> Result<_> {
            let clock = build_cyclic_clock(d, dt)?;
            let h_s = clock.commensurate_hamiltonian(&levels)?;
            let hs = build_history_state(&h_s, &phi0, &clock)?;
            let stat = stationarity_residual(&hs, &h_s)?;
            let inf = conditional_infidelities(&hs, &h_s, &phi0)?;
            for (k, x) in inf.iter().enumerate() {
                fidelity.push(vec![d as f64, k as f64, k as f64 * dt, 1.0 - x, *x]);
            }
            let worst = inf.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let cov = clock_covariance_deviation(&hs, &h_s)?;
            let k = k0 << i;
            let vn_res = if k + 1 < d {
                Some(von_neumann_residual(&hs, &h_s, k)?)
            } else {
                None
            };
            Ok((stat, worst, cov, vn_res))
        });
        let (stat, worst, cov, vn_res) = out?;
        report.check(Check::below(format!("stationarity_d{d}"), stat, tol).timed(secs));
        report.check(Check::below(format!("max_infidelity_d{d}"), worst, tol).timed(secs));
        report.check(Check::below(format!("clock_covariance_d{d}"), cov, tol).timed(secs));
        refine.push(vec![
            d as f64,
            dt,
            (k0 << i) as f64,
            stat,
            worst,
            cov,
            vn_res.unwrap_or(f64::NAN),
        ]);
        if let Some(r) = vn_res {
            vn.push((d, r));
        }
    }
    for w in vn.windows(2) {
        report.check(Check::within(
            format!("von_neumann_ratio_d{}_d{}", w[0].0, w[1].0),
            w[0].1 / w[1].1,
            3.5,
            4.5,
        ));
    }
    report.table(fidelity);
    report.table(refine);

    let h_s = base.commensurate_hamiltonian(&levels)?;
    let hs = build_history_state(&h_s, &phi0, &base)?;
    let global = hs.projector().entropy()?;
    report.check(Check::below("global_entropy", global.abs(), tol));
    let bits = hs.reduced_system_state().entropy_bits()?;
    if p.min_reduced_entropy_bits > 0.0 {
        report.check(Check::above(
            "reduced_entropy_bits",
            bits,
            p.min_reduced_entropy_bits,
        ));
    }

    if p.random_states > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut table = Table::new(
            "random_states",
            &["trial", "stationarity", "max_infidelity"],
        );
        let mut worst = 0.0f64;
        for trial in 0..p.random_states {
            let phi = random_state(&mut rng, p.d_s)?;
            let hs = build_history_state(&h_s, &phi, &base)?;
            let stat = stationarity_residual(&hs, &h_s)?;
            let inf = conditional_infidelities(&hs, &h_s, &phi)?
                .into_iter()
                .fold(0.0f64, |a, x| a.max(x.abs()));
            worst = worst.max(stat).max(inf);
            table.push(vec![trial as f64, stat, inf]);
        }
        report.check(Check::below("random_states_worst", worst, tol));
        report.table(table);
    }

    if let Some(gap) = p.incommensurate_gap {
        degradation(p, gap, report)?;
    }
    Ok(())
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Result<ComplexVector> {
    loop {
        let v: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let v = ComplexVector::new(v)?;
        if v.norm() > 1e-3 {
            return Ok(v.normalized()?);
        }
    }
}

/// Qubit `diag(0, gap)` on clocks `d·2^j` at fixed `dt`.
fn degradation(p: &PwParams, gap: f64, report: &mut VerificationReport) -> Result<()> {
    let h = ComplexMatrix::from_real_diagonal(&[0.0, gap]);
    let phi = ComplexVector::uniform(2);
    let mut table = Table::new(
        "degradation",
        &["d", "dt", "gap_over_omega", "stationarity"],
    );
    let mut residuals = Vec::new();
    for j in 0..p.degradation_steps {
        let d = p.d << j;
        let clock = build_cyclic_clock(d, p.dt)?;
        let r = stationarity_residual(&build_history_state(&h, &phi, &clock)?, &h)?;
        table.push(vec![d as f64, p.dt, gap / clock.frequency(), r]);
        residuals.push(r);
    }
    ensure!(!residuals.is_empty(), "empty degradation sweep");
    report.check(Check::above(
        format!("incommensurate_residual_d{}", p.d),
        residuals[0],
        DEGRADATION_FLOOR,
    ));
    report.check(Check::holds(
        "incommensurate_residual_decreasing",
        residuals.windows(2).all(|w| w[1] < w[0]),
    ));
    report.table(table);
    Ok(())
}
