//! Extended phase space with `ℋ = H + p₀` and Hamilton–Jacobi times of
//! mirrored subsystem pairs.

use std::f64::consts::FRAC_PI_2;

use crate::classical_liouville::flow::{step_plan, trajectory, Leapfrog};
use crate::classical_liouville::hamiltonian::{
    HamiltonianField, LibrarySystem, PhaseSpacePoint, ScalarField,
};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// `(q, p)` together with the dynamical time `t` and its conjugate `p₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedPhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
    pub p0: f64,
}

impl ExtendedPhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64, p0: f64) -> Result<Self> {
        if q.len() != p.len() || q.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: p.len(),
            });
        }
        if q.iter().chain(&p).chain([&t, &p0]).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "extended state entries must be finite".into(),
            ));
        }
        Ok(Self { q, p, t, p0 })
    }

    /// State on the constraint surface `H(q, p) + p₀ = 0`.
    pub fn on_surface(h: &dyn HamiltonianField, q: Vec<f64>, p: Vec<f64>, t: f64) -> Result<Self> {
        let e = h.energy(&[q.as_slice(), p.as_slice()].concat());
        Self::new(q, p, t, -e)
    }

    /// Unified extended coordinates `(q…, t, p…, p₀)`.
    pub fn to_coordinates(&self) -> Vec<f64> {
        let mut z = self.q.clone();
        z.push(self.t);
        z.extend_from_slice(&self.p);
        z.push(self.p0);
        z
    }

    pub fn from_coordinates(z: &[f64]) -> Result<Self> {
        if z.len() < 4 || z.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "extended coordinates need length 2k + 2 with k ≥ 1, got {}",
                z.len()
            )));
        }
        let n = z.len() / 2;
        Self::new(
            z[..n - 1].to_vec(),
            z[n..2 * n - 1].to_vec(),
            z[n - 1],
            z[2 * n - 1],
        )
    }

    pub fn reduced(&self) -> Vec<f64> {
        [self.q.as_slice(), self.p.as_slice()].concat()
    }

    /// `|H(q, p) + p₀|`.
    pub fn constraint_residual(&self, h: &dyn HamiltonianField) -> f64 {
        (h.energy(&self.reduced()) + self.p0).abs()
    }
}

/// `ℋ(q, t, p, p₀) = H(q, p) + p₀`.
pub struct ExtendedHamiltonian<'a> {
    inner: &'a dyn HamiltonianField,
}

pub fn extend(h: &dyn HamiltonianField) -> ExtendedHamiltonian<'_> {
    ExtendedHamiltonian { inner: h }
}

impl ExtendedHamiltonian<'_> {
    pub fn inner(&self) -> &dyn HamiltonianField {
        self.inner
    }

    fn split(&self, z: &[f64]) -> Vec<f64> {
        let k = self.inner.dof();
        [&z[..k], &z[k + 1..2 * k + 1]].concat()
    }
}

impl ScalarField for ExtendedHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.inner.dim() + 2
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.inner.value(&self.split(z)) + z[z.len() - 1]
    }

    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        let k = self.inner.dof();
        let g = self.inner.gradient(&self.split(z));
        out[..k].copy_from_slice(&g[..k]);
        out[k] = 0.0;
        out[k + 1..2 * k + 1].copy_from_slice(&g[k..]);
        out[2 * k + 1] = 1.0;
    }
}

impl HamiltonianField for ExtendedHamiltonian<'_> {
    fn name(&self) -> String {
        format!("extended({})", self.inner.name())
    }

    fn is_separable(&self) -> bool {
        self.inner.is_separable()
    }
}

/// Summary of an extended-phase-space run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedFlow {
    pub final_state: ExtendedPhaseState,
    pub steps: usize,
    pub step: f64,
    /// `max_n |(t_{n+1} − t_n) − Δτ|`.
    pub max_clock_step_error: f64,
    /// `max_n |p₀(τ_n) − p₀(0)|`.
    pub p0_drift: f64,
    /// `max_n |H(q_n, p_n) − H(q_0, p_0)|`.
    pub energy_drift: f64,
    /// States at every `record_every`-th step, including the first and last.
    pub recorded: Vec<(f64, ExtendedPhaseState)>,
}

/// Integrates Hamilton's equations of `ℋ` in the parameter `τ`.
pub fn extended_flow(
    ext: &ExtendedHamiltonian<'_>,
    x0: &ExtendedPhaseState,
    tau: f64,
    dtau: f64,
    record_every: usize,
) -> Result<ExtendedFlow> {
    if x0.q.len() != ext.inner.dof() {
        return Err(Error::DimensionMismatch {
            expected: ext.inner.dof(),
            actual: x0.q.len(),
        });
    }
    let (steps, step) = step_plan(tau, dtau)?;
    let z0 = PhaseSpacePoint::new(x0.to_coordinates())?;
    let k = ext.inner.dof();
    let e0 = ext.inner.energy(&x0.reduced());
    let mut prev_t = x0.t;
    let mut max_clock = 0.0f64;
    let mut p0_drift = 0.0f64;
    let mut energy_drift = 0.0f64;
    let mut recorded = Vec::new();
    let mut last = x0.clone();
    for (n, (s, z)) in trajectory(ext, &z0, tau, dtau)?.enumerate() {
        let t = z[k];
        let p0 = z[2 * k + 1];
        if n > 0 {
            max_clock = max_clock.max(((t - prev_t) - step).abs());
        }
        prev_t = t;
        p0_drift = p0_drift.max((p0 - x0.p0).abs());
        let reduced = [&z[..k], &z[k + 1..2 * k + 1]].concat();
        energy_drift = energy_drift.max((ext.inner.energy(&reduced) - e0).abs());
        let keep = record_every > 0 && (n % record_every == 0 || n == steps);
        if keep || n == steps {
            let state = ExtendedPhaseState::from_coordinates(&z)?;
            if keep {
                recorded.push((s, state.clone()));
            }
            last = state;
        }
    }
    Ok(ExtendedFlow {
        final_state: last,
        steps,
        step,
        max_clock_step_error: max_clock,
        p0_drift,
        energy_drift,
        recorded,
    })
}

/// `max_n |(q, p)_extended − (q, p)_reduced|` with both runs in lockstep.
pub fn reduction_deviation(
    h: &dyn HamiltonianField,
    x0: &ExtendedPhaseState,
    tau: f64,
    dtau: f64,
) -> Result<f64> {
    let ext = extend(h);
    let (steps, step) = step_plan(tau, dtau)?;
    let k = h.dof();
    let mut big = x0.to_coordinates();
    let mut small = x0.reduced();
    if steps == 0 {
        return Ok(0.0);
    }
    let mut lf_big = Leapfrog::new(&ext, step)?;
    let mut lf_small = Leapfrog::new(h, step)?;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        lf_big.step(&mut big);
        lf_small.step(&mut small);
        for i in 0..k {
            worst = worst
                .max((big[i] - small[i]).abs())
                .max((big[k + 1 + i] - small[k + i]).abs());
        }
    }
    Ok(worst)
}

/// Abbreviated action `S(q, E) = ∫₀^q √(2m(E − V))` on the positive-momentum
/// branch of a one-degree-of-freedom library system. Mirrored systems use
/// `S(q, E) = S_base(q, −E)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionProfile {
    system: LibrarySystem,
}

const QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-15,
    rel_tol: 1e-14,
    max_intervals: 4000,
};

/// Relative agreement required between the analytic and finite-difference
/// energy derivatives.
pub const DERIVATIVE_TOL: f64 = 1e-6;

impl ActionProfile {
    pub fn new(system: LibrarySystem) -> Self {
        Self { system }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        Ok(Self::new(id.parse()?))
    }

    pub fn system(&self) -> &LibrarySystem {
        &self.system
    }

    fn base_energy(&self, e: f64) -> f64 {
        self.system.sign() * e
    }

    /// Open interval of `q` reachable from `q_ref = 0` before a turning
    /// point, at energy `e`.
    pub fn domain(&self, e: f64) -> (f64, f64) {
        let eb = self.base_energy(e);
        if !(eb > 0.0) {
            return (0.0, 0.0);
        }
        let a = match self.system.base() {
            LibrarySystem::FreeParticle { .. } => f64::INFINITY,
            LibrarySystem::Harmonic { mass, omega } => (2.0 * eb / mass).sqrt() / omega,
            LibrarySystem::Quartic { lambda, .. } => (4.0 * eb / lambda).powf(0.25),
            LibrarySystem::Mirror(_) => unreachable!("base() strips mirrors"),
        };
        (-a, a)
    }

    fn check(&self, q: f64, e: f64, closed: bool) -> Result<()> {
        let (lo, hi) = self.domain(e);
        let inside = if closed {
            lo <= q && q <= hi
        } else {
            lo < q && q < hi
        };
        if lo < hi && inside && q.is_finite() {
            Ok(())
        } else {
            Err(Error::ActionDomain {
                q,
                energy: e,
                lower: lo,
                upper: hi,
            })
        }
    }

    /// Momentum on the positive branch, `p(q, E)`.
    pub fn momentum(&self, q: f64, e: f64) -> Result<f64> {
        self.check(q, e, true)?;
        let m = self.system.mass();
        Ok(
            (2.0 * m * (self.base_energy(e) - self.system.base_potential(q)))
                .max(0.0)
                .sqrt(),
        )
    }

    pub fn action(&self, q: f64, e: f64) -> Result<f64> {
        self.check(q, e, true)?;
        let eb = self.base_energy(e);
        let m = self.system.mass();
        match self.system.base() {
            LibrarySystem::FreeParticle { .. } => Ok(q * (2.0 * m * eb).sqrt()),
            LibrarySystem::Harmonic { mass, omega } => {
                let a2 = 2.0 * eb / (mass * omega * omega);
                let a = a2.sqrt();
                let x = (q / a).clamp(-1.0, 1.0);
                Ok(mass * omega * (0.5 * q * (a2 - q * q).max(0.0).sqrt() + 0.5 * a2 * x.asin()))
            }
            LibrarySystem::Quartic { .. } => {
                let sys = self.system.clone();
                integrate(
                    move |x| (2.0 * m * (eb - sys.base_potential(x))).max(0.0).sqrt(),
                    0.0,
                    q,
                    QUAD,
                )
                .map(|r| r.value)
            }
            LibrarySystem::Mirror(_) => unreachable!("base() strips mirrors"),
        }
    }

    /// `∂S/∂E` in closed form, or by quadrature of `∂p/∂E` for systems
    /// without one.
    pub fn time_exact(&self, q: f64, e: f64) -> Result<f64> {
        self.check(q, e, false)?;
        let eb = self.base_energy(e);
        let s = self.system.sign();
        let m = self.system.mass();
        let base = match self.system.base() {
            LibrarySystem::FreeParticle { .. } => q * m / (2.0 * m * eb).sqrt(),
            LibrarySystem::Harmonic { mass, omega } => {
                (q * (mass * omega * omega / (2.0 * eb)).sqrt())
                    .clamp(-1.0, 1.0)
                    .asin()
                    / omega
            }
            LibrarySystem::Quartic { .. } => {
                let sys = self.system.clone();
                integrate(
                    move |x| m / (2.0 * m * (eb - sys.base_potential(x))).sqrt(),
                    0.0,
                    q,
                    QUAD,
                )?
                .value
            }
            LibrarySystem::Mirror(_) => unreachable!("base() strips mirrors"),
        };
        Ok(s * base)
    }

    /// Central difference `(S(q, E + dE) − S(q, E − dE)) / 2dE`.
    pub fn time_finite_difference(&self, q: f64, e: f64, de: f64) -> Result<f64> {
        if !(de > 0.0) || !de.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dE must be positive, got {de}"
            )));
        }
        self.check(q, e - de, false)?;
        self.check(q, e + de, false)?;
        Ok((self.action(q, e + de)? - self.action(q, e - de)?) / (2.0 * de))
    }
}

/// Default energy step `1e−6·max(|E|, 1)`.
pub fn default_energy_step(e: f64) -> f64 {
    1e-6 * e.abs().max(1.0)
}

pub fn hj_action(id: &str, q: f64, e: f64) -> Result<f64> {
    ActionProfile::from_id(id)?.action(q, e)
}

/// `t = ∂S/∂E`. The finite difference must agree with the exact derivative
/// to [`DERIVATIVE_TOL`] (relative); the exact value is returned.
pub fn hj_time(id: &str, q: f64, e: f64, de: f64) -> Result<f64> {
    ActionProfile::from_id(id)?.time_checked(q, e, de)
}

impl ActionProfile {
    pub fn time_checked(&self, q: f64, e: f64, de: f64) -> Result<f64> {
        let fd = self.time_finite_difference(q, e, de)?;
        let exact = self.time_exact(q, e)?;
        if (fd - exact).abs() > DERIVATIVE_TOL * exact.abs().max(1.0) {
            return Err(Error::NumericalConsistency(format!(
                "∂S/∂E for {} at q = {q}, E = {e}: finite difference {fd} vs exact {exact}",
                self.system
            )));
        }
        Ok(exact)
    }
}

/// Two systems with `H₂ = −H₁` pointwise.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorPair {
    sys1: LibrarySystem,
    sys2: LibrarySystem,
}

impl MirrorPair {
    pub fn new(sys1: LibrarySystem, sys2: LibrarySystem) -> Result<Self> {
        if sys1.base() != sys2.base() || sys1.sign() == sys2.sign() {
            return Err(Error::InvalidParameter(format!(
                "{sys1} and {sys2} are not a mirror pair (need H₂ = −H₁)"
            )));
        }
        Ok(Self { sys1, sys2 })
    }

    /// `sys1` and its mirror image.
    pub fn from_id(id1: &str) -> Result<Self> {
        let sys1: LibrarySystem = id1.parse()?;
        let sys2 = LibrarySystem::mirror(sys1.clone());
        Self::new(sys1, sys2)
    }

    pub fn parse(id1: &str, id2: &str) -> Result<Self> {
        Self::new(id1.parse()?, id2.parse()?)
    }

    pub fn sys1(&self) -> &LibrarySystem {
        &self.sys1
    }

    pub fn sys2(&self) -> &LibrarySystem {
        &self.sys2
    }

    /// `|H₁(z) + H₂(z)|`.
    pub fn energy_sum(&self, z: &[f64]) -> f64 {
        (self.sys1.energy(z) + self.sys2.energy(z)).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeCorrelation {
    pub t1: f64,
    pub t2: f64,
    /// `t₁ + t₂` at the shared reference configuration `q₁ = q₂ = 0`.
    pub constant: f64,
    /// `|t₁ + t₂ − c|`.
    pub residual: f64,
}

/// Reference configuration where both actions vanish.
pub const Q_REF: f64 = 0.0;

/// Times `t₁ = ∂S₁/∂E₁`, `t₂ = ∂S₂/∂E₂` on the surface `E₁ + E₂ = 0`.
pub fn time_correlation_check(
    pair: &MirrorPair,
    q1: f64,
    q2: f64,
    e1: f64,
) -> Result<TimeCorrelation> {
    time_correlation_with_step(pair, q1, q2, e1, default_energy_step(e1))
}

pub fn time_correlation_with_step(
    pair: &MirrorPair,
    q1: f64,
    q2: f64,
    e1: f64,
    de: f64,
) -> Result<TimeCorrelation> {
    let a1 = ActionProfile::new(pair.sys1.clone());
    let a2 = ActionProfile::new(pair.sys2.clone());
    let e2 = -e1;
    let t1 = a1.time_checked(q1, e1, de)?;
    let t2 = a2.time_checked(q2, e2, de).map_err(|e| match e {
        Error::ActionDomain { lower, upper, .. } => Error::EmptyConstraintSurface(format!(
            "{} at q = {q2} has no positive-momentum branch at E₂ = {e2} (allowed q in ({lower}, {upper}))",
            pair.sys2
        )),
        other => other,
    })?;
    let c = a1.time_exact(Q_REF, e1)? + a2.time_exact(Q_REF, e2)?;
    Ok(TimeCorrelation {
        t1,
        t2,
        constant: c,
        residual: (t1 + t2 - c).abs(),
    })
}

/// Change of `t₁ + t₂` when energy is moved between the subsystems,
/// `(E₁, E₂) → (E₁ + δ, E₂ − δ)`.
pub fn total_time_sensitivity(
    pair: &MirrorPair,
    q1: f64,
    q2: f64,
    e1: f64,
    delta: f64,
) -> Result<f64> {
    let a = time_correlation_check(pair, q1, q2, e1)?;
    let b = time_correlation_check(pair, q1, q2, e1 + delta)?;
    Ok(((b.t1 + b.t2) - (a.t1 + a.t2)).abs())
}

/// Quarter-period action of the harmonic oscillator, `πE/2ω`.
pub fn harmonic_quarter_action(omega: f64, e: f64) -> f64 {
    FRAC_PI_2 * e / omega
}
