use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timeless_core::classical_liouville::{
    build_joint_density, condition_on_clock_density, determinant, energy_drift, flow_jacobian,
    joint_mixedness, l1_distance, paired_l1_bound, propagate_density, propagate_joint,
    HamiltonianField, JointBranch, JointDensity, LibrarySystem, PhaseSpaceDensity, PhaseSpacePoint,
    SampleDensity,
};

use crate::config::ClassicalParams;
use crate::report::{stopwatch, Check, Table, VerificationReport};

/// Transported-center snapshots between 0 and `t`.
const CENTER_ROWS: usize = 8;
/// Minimum clock-branch spacing in units of the clock blob width.
pub const MIN_SPACING_SIGMAS: f64 = 10.0;

/// Exact harmonic flow of a phase-space point.
fn harmonic_oracle(h: &LibrarySystem, z: &[f64], t: f64) -> Option<[f64; 2]> {
    let LibrarySystem::Harmonic { mass, omega } = *h else {
        return None;
    };
    let (s, c) = (omega * t).sin_cos();
    Some([
        z[0] * c + z[1] / (mass * omega) * s,
        -mass * omega * z[0] * s + z[1] * c,
    ])
}

fn samples_table(name: &str, rho: &PhaseSpaceDensity) -> Table {
    let mut t = Table::new(name, &["q", "p", "weight"]);
    if let PhaseSpaceDensity::Samples(s) = rho {
        for (z, w) in s.points().zip(s.weights()) {
            t.push(vec![z[0], z[1], *w]);
        }
    }
    t
}

pub fn run(p: &ClassicalParams, report: &mut VerificationReport) -> Result<()> {
    let h: LibrarySystem = p.system.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let rho0: PhaseSpaceDensity =
        SampleDensity::gaussian(&p.center, &[p.sigma, p.sigma], p.samples, &mut rng)?.into();

    transport(p, &h, &rho0, report)?;

    let (out, secs) = stopwatch(|| -> Result<_> {
        let t1 = 0.4 * p.t;
        let direct = propagate_density(&h, &rho0, p.t, p.dt)?;
        let mid = propagate_density(&h, &rho0, t1, p.dt)?.density;
        let twice = propagate_density(&h, &mid, p.t - t1, p.dt)?.density;
        Ok((l1_distance(&direct.density, &twice)?, direct.escaped_mass))
    });
    let (l1, escaped) = out.context("semigroup check")?;
    report.check(Check::below("semigroup_l1", l1, p.semigroup_tol).timed(secs));
    report.check(Check::below("escaped_mass", escaped, p.semigroup_tol));

    let horizon = h.period().unwrap_or(p.t.abs().max(p.dt));
    let z0 = PhaseSpacePoint::new(p.center.to_vec())?;
    let (det, secs) = stopwatch(|| -> Result<f64> {
        Ok(determinant(&flow_jacobian(&h, &z0, horizon, p.dt, 1e-6)?))
    });
    report
        .check(Check::below("jacobian_det_error", (det? - 1.0).abs(), p.jacobian_tol).timed(secs));

    let (drifts, secs) = stopwatch(|| -> Result<(f64, f64)> {
        Ok((
            energy_drift(&h, &z0, p.energy_horizon, p.dt)?,
            energy_drift(&h, &z0, p.energy_horizon, p.dt / 2.0)?,
        ))
    });
    let (coarse, fine) = drifts?;
    let scale = h.energy(z0.as_slice()).abs().max(1.0);
    if coarse > 1e-13 * scale {
        report.check(Check::within("energy_drift_ratio", coarse / fine, 3.5, 4.5).timed(secs));
    } else {
        // Leapfrog is exact for this system; the drift is rounding only.
        report.check(Check::below("energy_drift", coarse, 1e-12 * scale).timed(secs));
    }
    let mut drift = Table::new("energy_drift", &["dt", "horizon", "max_energy_error"]);
    drift.push(vec![p.dt, p.energy_horizon, coarse]);
    drift.push(vec![p.dt / 2.0, p.energy_horizon, fine]);
    report.table(drift);

    joint(p, &h, &rho0, &mut rng, report)
}

fn transport(
    p: &ClassicalParams,
    h: &LibrarySystem,
    rho0: &PhaseSpaceDensity,
    report: &mut VerificationReport,
) -> Result<()> {
    let mean0 = rho0.mean();
    let mut table = Table::new(
        "center",
        &["t", "q_mean", "p_mean", "q_oracle", "p_oracle", "error"],
    );
    let (out, secs) = stopwatch(|| -> Result<_> {
        let mut rho = rho0.clone();
        let mut worst = 0.0f64;
        let step = p.t / CENTER_ROWS as f64;
        for j in 0..=CENTER_ROWS {
            if j > 0 {
                rho = propagate_density(h, &rho, step, p.dt)?.density;
            }
            let t = j as f64 * step;
            let m = rho.mean();
            let oracle = harmonic_oracle(h, &mean0, t);
            let err = oracle.map(|o| (m[0] - o[0]).abs().max((m[1] - o[1]).abs()));
            if let Some(e) = err {
                worst = worst.max(e);
            }
            let [oq, op] = oracle.unwrap_or([f64::NAN; 2]);
            table.push(vec![t, m[0], m[1], oq, op, err.unwrap_or(f64::NAN)]);
        }
        Ok((rho, worst))
    });
    let (rho, worst) = out?;
    if harmonic_oracle(h, &mean0, 0.0).is_some() {
        report.check(Check::below("center_error", worst, p.center_tol).timed(secs));
    }
    report.table(table);
    report.table(samples_table("density_initial", rho0));
    report.table(samples_table("density_final", &rho));
    Ok(())
}

/// Joint density of `d` clock branches on one clock orbit at times `t_k + offset`.
fn build_joint(
    p: &ClassicalParams,
    h: &LibrarySystem,
    c: &LibrarySystem,
    sys0: &PhaseSpaceDensity,
    clock0: &PhaseSpaceDensity,
    times: &[f64],
    offset: f64,
) -> Result<JointDensity> {
    let prob = 1.0 / times.len() as f64;
    let branches = times
        .iter()
        .map(|&t| {
            Ok(JointBranch {
                label: t + offset,
                probability: prob,
                system: propagate_density(h, sys0, t + offset, p.dt)?.density,
                clock: propagate_density(c, clock0, t + offset, p.dt)?.density,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(build_joint_density(branches)?)
}

fn joint(
    p: &ClassicalParams,
    h: &LibrarySystem,
    sys0: &PhaseSpaceDensity,
    rng: &mut ChaCha8Rng,
    report: &mut VerificationReport,
) -> Result<()> {
    let c: LibrarySystem = p.clock_system.parse()?;
    let period = c.period().context("clock_system must be periodic")?;
    let d = p.clock_branches;
    let times: Vec<f64> = (0..d).map(|k| k as f64 * period / d as f64).collect();
    let clock0: PhaseSpaceDensity = SampleDensity::gaussian(
        &[p.clock_radius, 0.0],
        &[p.clock_sigma, p.clock_sigma],
        p.samples,
        rng,
    )?
    .into();

    let (joint, secs) = stopwatch(|| build_joint(p, h, &c, sys0, &clock0, &times, 0.0));
    let joint = joint.context("building the joint density")?;
    let centers: Vec<Vec<f64>> = joint.branches().iter().map(|b| b.clock.mean()).collect();
    let mut spacing = f64::INFINITY;
    for i in 0..d {
        for j in i + 1..d {
            let r = centers[i]
                .iter()
                .zip(&centers[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            spacing = spacing.min(r);
        }
    }
    report.check(Check::above(
        "clock_spacing_over_sigma",
        spacing / p.clock_sigma,
        MIN_SPACING_SIGMAS,
    ));
    report.check(Check::below("clock_overlap_ratio", joint.max_clock_overlap(), 1e-6).timed(secs));

    let mut table = Table::new(
        "conditioning",
        &[
            "k",
            "t",
            "probability",
            "clock_q",
            "clock_p",
            "l1",
            "system_entropy",
            "clock_entropy",
        ],
    );
    let (mix, msecs) = stopwatch(|| joint_mixedness(&joint));
    let mix = mix?;
    let (worst, csecs) = stopwatch(|| -> Result<f64> {
        let mut worst = 0.0f64;
        for (k, b) in joint.branches().iter().enumerate() {
            let back = condition_on_clock_density(&joint, k)?;
            let l1 = l1_distance(&back, &b.system)?;
            worst = worst.max(l1);
            table.push(vec![
                k as f64,
                b.label,
                b.probability,
                centers[k][0],
                centers[k][1],
                l1,
                mix.system_entropies[k],
                mix.clock_entropies[k],
            ]);
        }
        Ok(worst)
    });
    report.check(Check::below("conditioning_l1_max", worst?, p.conditioning_tol).timed(csecs));
    report.table(table);

    let max_branch = mix
        .system_entropies
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    report.check(
        Check::within(
            "joint_entropy_excess",
            mix.entropy - max_branch,
            0.0,
            f64::INFINITY,
        )
        .timed(msecs),
    );
    report.check(Check::within(
        "purity_deficit",
        mix.max_branch_purity - mix.purity,
        0.0,
        f64::INFINITY,
    ));
    let mut summary = Table::new(
        "mixedness",
        &[
            "joint_entropy",
            "label_entropy",
            "max_branch_entropy",
            "purity",
            "max_branch_purity",
        ],
    );
    summary.push(vec![
        mix.entropy,
        mix.label_entropy,
        max_branch,
        mix.purity,
        mix.max_branch_purity,
    ]);
    report.table(summary);

    let (sync, secs) = stopwatch(|| -> Result<f64> {
        let stepped = propagate_joint(&joint, h, &c, p.sync_step, p.dt)?;
        let direct = build_joint(p, h, &c, sys0, &clock0, &times, p.sync_step)?;
        Ok(paired_l1_bound(&stepped, &direct)?)
    });
    report.check(Check::below("relational_sync_l1", sync?, p.sync_tol).timed(secs));
    Ok(())
}
