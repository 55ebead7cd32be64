//! Finite-dimensional Page–Wootters construction.
//!
//! A cyclic clock of `d` Fourier-conjugate time states is entangled with a
//! system of dimension `d_s` into a history state
//!
//! ```text
//! |Ψ⟩ = d^{-1/2} Σ_k (e^{-i H_s k dt} |φ₀⟩) ⊗ |t_k⟩
//! ```
//!
//! The global state can be an exact eigenstate of `H_s ⊗ I + I ⊗ H_c` while
//! the system state conditioned on the clock reading `k` still follows the
//! Schrödinger equation in `k·dt`.
//!
//! Bipartite kets use system ⊗ clock ordering: amplitude `(s, c)` lives at
//! index `s·d + c`.

use std::f64::consts::PI;

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{
    apply_left_factor, apply_right_factor, eigenspace, eigh, ComplexMatrix, ComplexVector, C64,
    ZERO,
};
use crate::ring::{self, Branch};

/// Tolerance used to accept Hermitian inputs and normalized kets.
pub const INPUT_TOL: f64 = 1e-12;

/// A cyclic clock: `d` orthonormal time states on a grid of spacing `dt`,
/// with `e^{-i H_c dt}|t_k⟩ = |t_{k+1 mod d}⟩`.
///
/// `H_c = ω_c Σ_n n |n⟩⟨n|` with `ω_c = 2π/(d·dt)` and `n` running over the
/// symmetric window `{-⌊d/2⌋, …, ⌈d/2⌉−1}` (FFT ordering of the basis). The
/// symmetric window is what lets a system level `m·ω_c` find a clock partner
/// at `-m` with exactly zero total energy.
#[derive(Clone, Debug)]
pub struct ClockModel {
    dt: f64,
    levels: Vec<i64>,
    hamiltonian: ComplexMatrix,
    time_states: Vec<ComplexVector>,
}

impl ClockModel {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn period(&self) -> f64 {
        self.dim() as f64 * self.dt
    }

    /// Fundamental frequency `ω_c = 2π/(d·dt)`.
    pub fn frequency(&self) -> f64 {
        2.0 * PI / self.period()
    }

    pub fn levels(&self) -> &[i64] {
        &self.levels
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn time_states(&self) -> &[ComplexVector] {
        &self.time_states
    }

    pub fn time_state(&self, k: usize) -> Result<&ComplexVector> {
        self.time_states.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: self.dim(),
        })
    }

    /// True when a system level `m·ω_c` has a clock partner at `-m`.
    pub fn supports_level(&self, m: i64) -> bool {
        self.levels.contains(&(-m))
    }

    /// `max_{j,k} |⟨t_j|t_k⟩ − δ_jk|`
    pub fn orthonormality_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for (j, a) in self.time_states.iter().enumerate() {
            for (k, b) in self.time_states.iter().enumerate() {
                let ip = a.inner(b).expect("clock states share a dimension");
                let target = if j == k { 1.0 } else { 0.0 };
                dev = dev.max((ip - C64::new(target, 0.0)).norm());
            }
        }
        dev
    }

    /// `max_k ‖e^{-iH_c dt}|t_k⟩ − |t_{k+1 mod d}⟩‖`, using the diagonal form
    /// of `H_c`.
    pub fn cyclicity_deviation(&self) -> f64 {
        let d = self.dim();
        let step: Vec<C64> = (0..d)
            .map(|i| C64::new(0.0, -self.hamiltonian[(i, i)].re * self.dt).exp())
            .collect();
        (0..d)
            .map(|k| {
                let shifted = ComplexVector::from_vec_unchecked(
                    self.time_states[k]
                        .entries()
                        .iter()
                        .zip(&step)
                        .map(|(a, u)| a * u)
                        .collect(),
                );
                shifted
                    .distance(&self.time_states[(k + 1) % d])
                    .expect("same dimension")
            })
            .fold(0.0, f64::max)
    }

    /// Diagonal system Hamiltonian `diag(m_j·ω_c)`; every `-m_j` must lie in
    /// the clock window so the resulting history state is exactly stationary.
    pub fn commensurate_hamiltonian(&self, multiples: &[i64]) -> Result<ComplexMatrix> {
        if multiples.is_empty() {
            return Err(Error::InvalidParameter("empty spectrum".into()));
        }
        if let Some(&m) = multiples.iter().find(|&&m| !self.supports_level(m)) {
            return Err(Error::InvalidParameter(format!(
                "level {m} has no partner in the clock window {:?}",
                self.window()
            )));
        }
        let w = self.frequency();
        Ok(ComplexMatrix::from_real_diagonal(
            &multiples.iter().map(|&m| m as f64 * w).collect::<Vec<_>>(),
        ))
    }

    fn window(&self) -> (i64, i64) {
        let lo = *self.levels.iter().min().expect("non-empty");
        let hi = *self.levels.iter().max().expect("non-empty");
        (lo, hi)
    }
}

pub fn build_cyclic_clock(d: usize, dt: f64) -> Result<ClockModel> {
    if d < 2 {
        return Err(Error::DegenerateClock { dim: d });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "clock spacing must be > 0, got {dt}"
        )));
    }
    let levels = ring::levels(d, Branch::Lower);
    let omega = 2.0 * PI / (d as f64 * dt);
    let hamiltonian = ComplexMatrix::from_real_diagonal(
        &levels.iter().map(|&n| n as f64 * omega).collect::<Vec<_>>(),
    );
    let a = 1.0 / (d as f64).sqrt();
    let time_states = (0..d as i64)
        .map(|k| {
            ComplexVector::from_vec_unchecked(
                levels
                    .iter()
                    .map(|&n| ring::root_of_unity(d, n, k) * a)
                    .collect(),
            )
        })
        .collect();
    Ok(ClockModel {
        dt,
        levels,
        hamiltonian,
        time_states,
    })
}

/// Normalized system ⊗ clock ket together with the clock it was built on.
#[derive(Clone, Debug)]
pub struct HistoryState {
    psi: ComplexVector,
    clock: ClockModel,
    system_dim: usize,
}

impl HistoryState {
    /// Wraps an arbitrary normalized bipartite ket (e.g. a constraint-kernel
    /// state) so the conditioning machinery can be applied to it.
    pub fn from_parts(psi: ComplexVector, clock: ClockModel, system_dim: usize) -> Result<Self> {
        if psi.dim() != system_dim * clock.dim() {
            return Err(Error::DimensionMismatch {
                expected: system_dim * clock.dim(),
                actual: psi.dim(),
            });
        }
        if !psi.is_normalized(INPUT_TOL) {
            return Err(Error::InvalidParameter(format!(
                "history state must be normalized (‖ψ‖ = {})",
                psi.norm()
            )));
        }
        Ok(Self {
            psi,
            clock,
            system_dim,
        })
    }

    pub fn psi(&self) -> &ComplexVector {
        &self.psi
    }

    pub fn clock(&self) -> &ClockModel {
        &self.clock
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::from_pure(&self.psi).expect("history state is normalized")
    }

    /// Reduced state of the system after tracing out the clock.
    pub fn reduced_system_state(&self) -> DensityMatrix {
        partial_trace(
            &self.projector(),
            (self.system_dim, self.clock.dim()),
            Subsystem::System,
        )
        .expect("dimensions consistent by construction")
    }
}

fn check_system_hamiltonian(h_s: &ComplexMatrix, d_s: usize) -> Result<()> {
    if !h_s.is_square() || h_s.rows() != d_s {
        return Err(Error::DimensionMismatch {
            expected: d_s,
            actual: h_s.rows(),
        });
    }
    h_s.require_hermitian(INPUT_TOL * h_s.max_abs().max(1.0))
}

/// `e^{-i H_s t}|φ₀⟩` for every `t` in `times`, from one eigendecomposition.
pub fn schrodinger_states(
    h_s: &ComplexMatrix,
    phi0: &ComplexVector,
    times: &[f64],
) -> Result<Vec<ComplexVector>> {
    check_system_hamiltonian(h_s, phi0.dim())?;
    let eig = eigh(h_s)?;
    let coeffs = eig.vectors.adjoint().matvec(phi0)?;
    Ok(times
        .iter()
        .map(|&t| {
            let evolved = ComplexVector::from_vec_unchecked(
                coeffs
                    .entries()
                    .iter()
                    .zip(&eig.values)
                    .map(|(c, &l)| c * C64::new(0.0, -l * t).exp())
                    .collect(),
            );
            eig.vectors.matvec(&evolved).expect("square eigenbasis")
        })
        .collect())
}

pub fn build_history_state(
    h_s: &ComplexMatrix,
    phi0: &ComplexVector,
    clock: &ClockModel,
) -> Result<HistoryState> {
    let d_s = phi0.dim();
    check_system_hamiltonian(h_s, d_s)?;
    if !phi0.is_normalized(INPUT_TOL) {
        return Err(Error::InvalidParameter(format!(
            "initial system state must be normalized (‖φ₀‖ = {})",
            phi0.norm()
        )));
    }
    let d = clock.dim();
    let times: Vec<f64> = (0..d).map(|k| k as f64 * clock.dt()).collect();
    let snapshots = schrodinger_states(h_s, phi0, &times)?;
    let a = 1.0 / (d as f64).sqrt();
    let mut psi = vec![ZERO; d_s * d];
    for (phi_k, t_k) in snapshots.iter().zip(clock.time_states()) {
        for s in 0..d_s {
            let amp = phi_k[s] * a;
            for c in 0..d {
                psi[s * d + c] += amp * t_k[c];
            }
        }
    }
    Ok(HistoryState {
        psi: ComplexVector::new(psi)?,
        clock: clock.clone(),
        system_dim: d_s,
    })
}

/// `‖(H_tot − E)ψ‖` with `E = ⟨ψ|H_tot|ψ⟩`, the distance of the history
/// state from the nearest eigenvector energy shell.
pub fn stationarity_residual(hs: &HistoryState, h_s: &ComplexMatrix) -> Result<f64> {
    check_system_hamiltonian(h_s, hs.system_dim)?;
    let d = hs.clock.dim();
    let h_psi = apply_left_factor(h_s, &hs.psi, d)?.add(&apply_right_factor(
        hs.clock.hamiltonian(),
        &hs.psi,
        hs.system_dim,
    )?)?;
    let energy = hs.psi.inner(&h_psi)?.re / hs.psi.norm_sqr();
    Ok(h_psi.sub(&hs.psi.scale(C64::new(energy, 0.0)))?.norm())
}

/// Unnormalized partial inner product `(⟨c| ⊗ I_s)|ψ⟩` against any clock ket.
pub fn project_clock(hs: &HistoryState, clock_ket: &ComplexVector) -> Result<ComplexVector> {
    let d = hs.clock.dim();
    if clock_ket.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: clock_ket.dim(),
        });
    }
    let out = (0..hs.system_dim)
        .map(|s| {
            (0..d)
                .map(|c| clock_ket[c].conj() * hs.psi[s * d + c])
                .sum()
        })
        .collect();
    Ok(ComplexVector::from_vec_unchecked(out))
}

/// Normalized system state conditioned on the clock reading `k`.
pub fn condition_on_clock(hs: &HistoryState, k: usize) -> Result<ComplexVector> {
    let t_k = hs.clock.time_state(k)?;
    let v = project_clock(hs, t_k)?;
    // Built history states give ‖v‖ = d^{-1/2}; anything near zero means the
    // ket is not correlated with this clock reading.
    if v.norm() < 1e-12 {
        return Err(Error::ZeroNormConditional { index: k });
    }
    v.normalized()
}

/// `1 − F(φ_k, e^{-iH_s k dt}φ₀)` for every clock index.
pub fn conditional_infidelities(
    hs: &HistoryState,
    h_s: &ComplexMatrix,
    phi0: &ComplexVector,
) -> Result<Vec<f64>> {
    let d = hs.clock.dim();
    let times: Vec<f64> = (0..d).map(|k| k as f64 * hs.clock.dt()).collect();
    let exact = schrodinger_states(h_s, phi0, &times)?;
    exact
        .iter()
        .enumerate()
        .map(|(k, e)| Ok(1.0 - condition_on_clock(hs, k)?.fidelity(e)?))
        .collect()
}

/// Largest infidelity between the conditional state at `k+1` and one step of
/// system evolution applied to the conditional state at `k`.
pub fn clock_covariance_deviation(hs: &HistoryState, h_s: &ComplexMatrix) -> Result<f64> {
    let d = hs.clock.dim();
    let mut worst = 0.0f64;
    for k in 0..d - 1 {
        let here = condition_on_clock(hs, k)?;
        let stepped = schrodinger_states(h_s, &here, &[hs.clock.dt()])?.remove(0);
        let next = condition_on_clock(hs, k + 1)?;
        worst = worst.max(1.0 - stepped.fidelity(&next)?);
    }
    Ok(worst)
}

/// Orthonormal basis of the zero-eigenvalue space of `H_s ⊗ I + I ⊗ H_c`.
pub fn kernel_constraint_states(
    h_s: &ComplexMatrix,
    h_c: &ComplexMatrix,
    tol: f64,
) -> Result<Vec<ComplexVector>> {
    h_s.require_hermitian(INPUT_TOL * h_s.max_abs().max(1.0))?;
    h_c.require_hermitian(INPUT_TOL * h_c.max_abs().max(1.0))?;
    let total = h_s
        .kron(&ComplexMatrix::identity(h_c.rows()))
        .add(&ComplexMatrix::identity(h_s.rows()).kron(h_c))?;
    eigenspace(&total, 0.0, tol)
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch {
                expected: mat.rows(),
                actual: mat.cols(),
            });
        }
        mat.require_hermitian(INPUT_TOL)?;
        let tr = mat.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > INPUT_TOL {
            return Err(Error::InvalidParameter(format!(
                "density matrix trace {tr} != 1"
            )));
        }
        let min_eig = eigh(&mat)?.values[0];
        if min_eig < -1e-10 {
            return Err(Error::InvalidParameter(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { mat })
    }

    /// `|v⟩⟨v|` for a normalized ket.
    pub fn from_pure(v: &ComplexVector) -> Result<Self> {
        if !v.is_normalized(INPUT_TOL) {
            return Err(Error::InvalidParameter(format!(
                "pure state must be normalized (‖v‖ = {})",
                v.norm()
            )));
        }
        Ok(Self {
            mat: ComplexMatrix::outer(v, v),
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// `tr ρ²`
    pub fn purity(&self) -> f64 {
        // ρ is Hermitian, so tr ρ² = Σ |ρ_ij|².
        self.mat.frobenius_norm().powi(2)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eigh(&self.mat)?.values)
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .into_iter()
            .filter(|&l| l > 0.0)
            .map(|l| -l * l.ln())
            .sum())
    }

    pub fn entropy_bits(&self) -> Result<f64> {
        Ok(self.entropy()? / std::f64::consts::LN_2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    /// First tensor factor.
    System,
    /// Second tensor factor.
    Clock,
}

/// Reduced state over the kept factor of a `d_s·d_c`-dimensional state.
pub fn partial_trace(
    rho: &DensityMatrix,
    (d_s, d_c): (usize, usize),
    keep: Subsystem,
) -> Result<DensityMatrix> {
    if d_s == 0 || d_c == 0 || d_s * d_c != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: d_s * d_c,
            actual: rho.dim(),
        });
    }
    let m = &rho.mat;
    let out = match keep {
        Subsystem::System => {
            let mut out = ComplexMatrix::zeros(d_s, d_s);
            for a in 0..d_s {
                for b in 0..d_s {
                    out[(a, b)] = (0..d_c).map(|c| m[(a * d_c + c, b * d_c + c)]).sum();
                }
            }
            out
        }
        Subsystem::Clock => {
            let mut out = ComplexMatrix::zeros(d_c, d_c);
            for c in 0..d_c {
                for e in 0..d_c {
                    out[(c, e)] = (0..d_s).map(|a| m[(a * d_c + c, a * d_c + e)]).sum();
                }
            }
            out
        }
    };
    Ok(DensityMatrix { mat: out })
}

/// Max-norm of `D_k − (−i)[H_s, ρ_k]`, where `D_k` is the central difference
/// of the conditioned projectors around clock index `k`.
pub fn von_neumann_residual(hs: &HistoryState, h_s: &ComplexMatrix, k: usize) -> Result<f64> {
    let d = hs.clock.dim();
    if k == 0 || k + 1 >= d {
        return Err(Error::Boundary { index: k, len: d });
    }
    check_system_hamiltonian(h_s, hs.system_dim)?;
    let dt = hs.clock.dt();
    let spectral_norm = eigh(h_s)?
        .values
        .iter()
        .fold(0.0f64, |acc, l| acc.max(l.abs()));
    if spectral_norm * dt > 1.0 {
        warn!(
            "clock spacing dt = {dt} does not resolve ‖H_s‖ = {spectral_norm:.3}; \
             finite-difference residual is not in its asymptotic regime"
        );
    }
    let projector = |j: usize| -> Result<ComplexMatrix> {
        let v = condition_on_clock(hs, j)?;
        Ok(ComplexMatrix::outer(&v, &v))
    };
    let derivative = projector(k + 1)?
        .sub(&projector(k - 1)?)?
        .scale_real(0.5 / dt);
    let generator = h_s.commutator(&projector(k)?)?.scale(C64::new(0.0, -1.0));
    derivative.max_abs_diff(&generator)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn plus() -> ComplexVector {
        ComplexVector::uniform(2)
    }

    #[test]
    fn two_state_clock() {
        let clock = build_cyclic_clock(2, 1.0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let t0 = ComplexVector::new(vec![c(s, 0.0), c(s, 0.0)]).unwrap();
        let t1 = ComplexVector::new(vec![c(s, 0.0), c(-s, 0.0)]).unwrap();
        assert!(clock.time_states()[0].distance(&t0).unwrap() < 1e-15);
        assert!(clock.time_states()[1].distance(&t1).unwrap() < 1e-15);
        // e^{-iπ} = e^{iπ}: the propagator agrees with diag(0, π).
        assert_eq!(clock.hamiltonian()[(0, 0)], ZERO);
        assert!((clock.hamiltonian()[(1, 1)].re.abs() - PI).abs() < 1e-15);
        assert!(clock.cyclicity_deviation() < 1e-15);
    }

    #[test]
    fn clock_gram_matrix() {
        // Independent Gram computation straight from the defining formula.
        let (d, dt) = (8usize, 0.5);
        let omega = 2.0 * PI / (d as f64 * dt);
        let ket = |k: usize| -> Vec<C64> {
            (0..d)
                .map(|i| {
                    let n = if i < d / 2 {
                        i as f64
                    } else {
                        i as f64 - d as f64
                    };
                    C64::from_polar(1.0 / (d as f64).sqrt(), -n * omega * k as f64 * dt)
                })
                .collect()
        };
        let clock = build_cyclic_clock(d, dt).unwrap();
        for k in 0..d {
            let oracle = ComplexVector::new(ket(k)).unwrap();
            assert!(clock.time_states()[k].distance(&oracle).unwrap() < 1e-13);
        }
        let mut max_off = 0.0f64;
        for j in 0..d {
            for k in 0..d {
                if j != k {
                    let ip: C64 = ket(j).iter().zip(ket(k)).map(|(a, b)| a.conj() * b).sum();
                    max_off = max_off.max(ip.norm());
                }
            }
        }
        assert!(max_off < 1e-12);
        assert!(clock.orthonormality_deviation() < 1e-12);
        assert!(clock.cyclicity_deviation() < 1e-12);
    }

    #[test]
    fn clock_parameter_errors() {
        assert!(matches!(
            build_cyclic_clock(1, 1.0),
            Err(Error::DegenerateClock { dim: 1 })
        ));
        assert!(matches!(
            build_cyclic_clock(0, 1.0),
            Err(Error::DegenerateClock { .. })
        ));
        assert!(matches!(
            build_cyclic_clock(4, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            build_cyclic_clock(4, -1.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn trivial_system_history_state_is_product() {
        let clock = build_cyclic_clock(4, 0.3).unwrap();
        let phi0 = ComplexVector::new(vec![c(0.6, 0.0), c(0.0, 0.8), ZERO]).unwrap();
        let h_s = ComplexMatrix::zeros(3, 3);
        let hs = build_history_state(&h_s, &phi0, &clock).unwrap();
        let mut clock_sum = ComplexVector::zeros(4);
        for t in clock.time_states() {
            clock_sum = clock_sum.add(t).unwrap();
        }
        let expected = phi0.kron(&clock_sum.scale(c(0.5, 0.0)));
        assert!(hs.psi().distance(&expected).unwrap() < 1e-14);
        assert!(stationarity_residual(&hs, &h_s).unwrap() < 1e-12);
    }

    #[test]
    fn commensurate_qubit_is_stationary() {
        let clock = build_cyclic_clock(8, 0.5).unwrap();
        for m in [1, 2, 3, 4, -3] {
            let h_s = clock.commensurate_hamiltonian(&[0, m]).unwrap();
            let hs = build_history_state(&h_s, &plus(), &clock).unwrap();
            assert!((hs.psi().norm() - 1.0).abs() < 1e-12);
            assert!(stationarity_residual(&hs, &h_s).unwrap() < 1e-10, "m = {m}");
        }
        assert!(clock.commensurate_hamiltonian(&[0, -4]).is_err());
    }

    #[test]
    fn incommensurate_qubit_is_not_stationary() {
        let clock = build_cyclic_clock(8, 0.5).unwrap();
        let h_s = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
        let hs = build_history_state(&h_s, &plus(), &clock).unwrap();
        assert!(stationarity_residual(&hs, &h_s).unwrap() > 1e-3);
    }

    #[test]
    fn history_state_input_errors() {
        let clock = build_cyclic_clock(4, 0.5).unwrap();
        let h = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
        let unnormalized = ComplexVector::from_real(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            build_history_state(&h, &unnormalized, &clock),
            Err(Error::InvalidParameter(_))
        ));
        let non_hermitian = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            build_history_state(&non_hermitian, &plus(), &clock),
            Err(Error::NotHermitian { .. })
        ));
        let h3 = ComplexMatrix::zeros(3, 3);
        assert!(matches!(
            build_history_state(&h3, &plus(), &clock),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn conditioning_recovers_initial_state_and_precession() {
        let (d, dt) = (8usize, 0.25);
        let clock = build_cyclic_clock(d, dt).unwrap();
        let omega = 2.0 * PI / (d as f64 * dt);
        let h_s = ComplexMatrix::from_real_diagonal(&[omega / 2.0, -omega / 2.0]);
        let phi0 = ComplexVector::new(vec![c(0.8, 0.0), c(0.0, 0.6)]).unwrap();
        let hs = build_history_state(&h_s, &phi0, &clock).unwrap();

        assert!(condition_on_clock(&hs, 0).unwrap().fidelity(&phi0).unwrap() > 1.0 - 1e-12);

        // Closed-form precession at t = (d/2)·dt = π/ω: phases e^{∓iπ/2}.
        let t = (d / 2) as f64 * dt;
        let analytic = ComplexVector::new(vec![
            phi0[0] * C64::from_polar(1.0, -omega * t / 2.0),
            phi0[1] * C64::from_polar(1.0, omega * t / 2.0),
        ])
        .unwrap();
        let got = condition_on_clock(&hs, d / 2).unwrap();
        assert!((got.fidelity(&analytic).unwrap() - 1.0).abs() < 1e-10);

        assert!(matches!(
            condition_on_clock(&hs, d),
            Err(Error::IndexOutOfRange { index: 8, len: 8 })
        ));
    }

    #[test]
    fn conditioning_on_foreign_clock_support_fails() {
        let clock = build_cyclic_clock(4, 0.5).unwrap();
        let phi0 = plus();
        // Clock part pinned to |t_0⟩ only: other readings have zero amplitude.
        let psi = phi0.kron(&clock.time_states()[0].clone());
        let hs = HistoryState::from_parts(psi, clock, 2).unwrap();
        assert!(matches!(
            condition_on_clock(&hs, 2),
            Err(Error::ZeroNormConditional { index: 2 })
        ));
    }

    #[test]
    fn kernel_examples() {
        let tol = 1e-8;
        let k = kernel_constraint_states(
            &ComplexMatrix::from_real_diagonal(&[0.0, 1.0]),
            &ComplexMatrix::from_real_diagonal(&[0.0, -1.0]),
            tol,
        )
        .unwrap();
        assert_eq!(k.len(), 2);
        let b00 = ComplexVector::basis(4, 0);
        let b11 = ComplexVector::basis(4, 3);
        for v in &k {
            let weight = v.inner(&b00).unwrap().norm_sqr() + v.inner(&b11).unwrap().norm_sqr();
            assert!((weight - 1.0).abs() < 1e-12);
        }

        let sz = ComplexMatrix::from_real_diagonal(&[1.0, -1.0]);
        let k = kernel_constraint_states(&sz, &sz.scale_real(-1.0), tol).unwrap();
        assert_eq!(k.len(), 2);

        let k = kernel_constraint_states(
            &ComplexMatrix::from_real_diagonal(&[0.0, 1.0]),
            &ComplexMatrix::from_real_diagonal(&[0.0, -0.5]),
            tol,
        )
        .unwrap();
        // (0, 0) sums to zero; the intended empty case needs no zero level.
        assert_eq!(k.len(), 1);
        let k = kernel_constraint_states(
            &ComplexMatrix::from_real_diagonal(&[0.25, 1.0]),
            &ComplexMatrix::from_real_diagonal(&[0.0, -0.5]),
            tol,
        )
        .unwrap();
        assert!(k.is_empty());

        let bad = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(kernel_constraint_states(&bad, &sz, tol).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let a = ComplexVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let b = ComplexVector::new(vec![
            c(0.0, 1.0 / 3f64.sqrt()),
            c(1.0 / 3f64.sqrt(), 0.0),
            c(0.0, -1.0 / 3f64.sqrt()),
        ])
        .unwrap();
        let rho = DensityMatrix::from_pure(&a.kron(&b)).unwrap();
        let rs = partial_trace(&rho, (2, 3), Subsystem::System).unwrap();
        assert!(
            rs.matrix()
                .max_abs_diff(&ComplexMatrix::outer(&a, &a))
                .unwrap()
                < 1e-12
        );
        let rc = partial_trace(&rho, (2, 3), Subsystem::Clock).unwrap();
        assert!(
            rc.matrix()
                .max_abs_diff(&ComplexMatrix::outer(&b, &b))
                .unwrap()
                < 1e-12
        );

        let s = 1.0 / 2f64.sqrt();
        let bell = ComplexVector::from_real(&[s, 0.0, 0.0, s]).unwrap();
        let rs = partial_trace(
            &DensityMatrix::from_pure(&bell).unwrap(),
            (2, 2),
            Subsystem::System,
        )
        .unwrap();
        assert!(
            rs.matrix()
                .max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5))
                .unwrap()
                < 1e-15
        );

        assert!(partial_trace(&rho, (4, 2), Subsystem::System).is_err());
    }

    #[test]
    fn reduced_history_state_is_snapshot_mixture() {
        let clock = build_cyclic_clock(6, 0.4).unwrap();
        let h_s = ComplexMatrix::from_real_rows(&[&[0.3, 0.7], &[0.7, -0.2]]).unwrap();
        let phi0 = ComplexVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let hs = build_history_state(&h_s, &phi0, &clock).unwrap();
        let reduced = hs.reduced_system_state();

        // Oracle: explicit average of snapshot projectors, each snapshot
        // propagated by a truncated Taylor series.
        let mut oracle = ComplexMatrix::zeros(2, 2);
        for k in 0..6 {
            let t = k as f64 * 0.4;
            let gen = h_s.scale(c(0.0, -t));
            let mut term = ComplexMatrix::identity(2);
            let mut u = ComplexMatrix::identity(2);
            for n in 1..60 {
                term = term.matmul(&gen).unwrap().scale_real(1.0 / n as f64);
                u = u.add(&term).unwrap();
            }
            let phi = u.matvec(&phi0).unwrap();
            oracle = oracle.add(&ComplexMatrix::outer(&phi, &phi)).unwrap();
        }
        let oracle = oracle.scale_real(1.0 / 6.0);
        assert!(reduced.matrix().max_abs_diff(&oracle).unwrap() < 1e-12);
        assert!((reduced.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::identity(2)).is_err());
        let neg = ComplexMatrix::from_real_diagonal(&[1.5, -0.5]);
        assert!(DensityMatrix::new(neg).is_err());
        let ok = DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.5, 0.5])).unwrap();
        assert!((ok.entropy_bits().unwrap() - 1.0).abs() < 1e-14);
        assert!((ok.purity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn von_neumann_residual_examples() {
        let clock = build_cyclic_clock(8, 0.1).unwrap();
        let zero = ComplexMatrix::zeros(2, 2);
        let hs = build_history_state(&zero, &plus(), &clock).unwrap();
        assert!(von_neumann_residual(&hs, &zero, 3).unwrap() < 1e-12);
        assert!(matches!(
            von_neumann_residual(&hs, &zero, 0),
            Err(Error::Boundary { .. })
        ));
        assert!(matches!(
            von_neumann_residual(&hs, &zero, 7),
            Err(Error::Boundary { .. })
        ));
    }

    #[test]
    fn clock_covariance_holds_for_generic_hamiltonian() {
        let clock = build_cyclic_clock(10, 0.3).unwrap();
        let h_s = ComplexMatrix::from_rows(vec![
            vec![c(0.4, 0.0), c(0.2, -0.5), c(0.0, 0.1)],
            vec![c(0.2, 0.5), c(-0.7, 0.0), c(0.3, 0.0)],
            vec![c(0.0, -0.1), c(0.3, 0.0), c(1.1, 0.0)],
        ])
        .unwrap();
        let phi0 = ComplexVector::uniform(3);
        let hs = build_history_state(&h_s, &phi0, &clock).unwrap();
        assert!(clock_covariance_deviation(&hs, &h_s).unwrap() < 1e-10);
        let inf = conditional_infidelities(&hs, &h_s, &phi0).unwrap();
        assert!(inf.iter().all(|&x| x.abs() < 1e-10));
    }
}
