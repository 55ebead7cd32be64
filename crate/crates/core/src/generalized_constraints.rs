//! States annihilated by total conserved generators `G_s ⊗ I + I ⊗ G_c`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::classical_liouville::flow::Leapfrog;
use crate::classical_liouville::hamiltonian::{
    split_call, Composite, HamiltonianField, LibrarySystem,
};
use crate::error::{Error, Result};
use crate::linalg::{
    apply_left_factor, apply_right_factor, eigenspace, eigh, read_matrix_csv, unitary_evolution,
    ComplexMatrix, ComplexVector, C64,
};
use crate::quantum_pw::Subsystem;
use crate::ring::{levels, plane_wave, Branch};

/// Residual below which a state counts as satisfying a constraint.
pub const CONSTRAINT_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;

/// Momentum generator on a ring of `d` sites, eigenvalues in the lower
/// window `{−⌊d/2⌋, …, ⌈d/2⌉ − 1}`.
pub fn cyclic_translation_generator(d: usize) -> Result<ComplexMatrix> {
    cyclic_translation_generator_with(d, Branch::Lower)
}

/// `G = Σ_n n |k_n⟩⟨k_n|` over plane waves `|k_n⟩`; `e^{−iG·2π/d}` is the
/// shift `|x⟩ → |x + 1 mod d⟩` for either branch.
pub fn cyclic_translation_generator_with(d: usize, branch: Branch) -> Result<ComplexMatrix> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "ring needs at least 2 sites, got {d}"
        )));
    }
    let mut g = ComplexMatrix::zeros(d, d);
    for n in levels(d, branch) {
        if n != 0 {
            g = g.add(
                &ComplexMatrix::outer(&plane_wave(d, n), &plane_wave(d, n)).scale_real(n as f64),
            )?;
        }
    }
    Ok(g)
}

/// Permutation `|x⟩ → |x + 1 mod d⟩`.
pub fn shift_matrix(d: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    for x in 0..d {
        m[((x + 1) % d, x)] = C64::new(1.0, 0.0);
    }
    m
}

/// `S_z` for spin `j` in the basis `m = j, j − 1, …, −j`.
pub fn spin_z(j: f64) -> Result<ComplexMatrix> {
    let twice = 2.0 * j;
    if !(j > 0.0) || (twice - twice.round()).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "spin must be a positive half-integer, got {j}"
        )));
    }
    let n = twice.round() as usize + 1;
    Ok(ComplexMatrix::from_real_diagonal(
        &(0..n).map(|i| j - i as f64).collect::<Vec<_>>(),
    ))
}

/// Generator ids accepted in configs.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorId {
    /// `momentum_ring(d)`, lower branch.
    MomentumRing(usize),
    /// `momentum_ring_upper(d)`, upper branch.
    MomentumRingUpper(usize),
    /// `sz(j)`.
    Sz(f64),
    /// `custom(path)`: matrix CSV with `re,im` column pairs.
    Custom(String),
}

impl FromStr for GeneratorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s).ok_or_else(|| Error::UnknownId(s.to_string()))?;
        let args = args.trim();
        let bad = || Error::UnknownId(s.to_string());
        match name {
            "momentum_ring" => Ok(Self::MomentumRing(args.parse().map_err(|_| bad())?)),
            "momentum_ring_upper" => Ok(Self::MomentumRingUpper(args.parse().map_err(|_| bad())?)),
            "sz" => Ok(Self::Sz(args.parse().map_err(|_| bad())?)),
            "custom" if !args.is_empty() => Ok(Self::Custom(args.to_string())),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GeneratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MomentumRing(d) => write!(f, "momentum_ring({d})"),
            Self::MomentumRingUpper(d) => write!(f, "momentum_ring_upper({d})"),
            Self::Sz(j) => write!(f, "sz({j})"),
            Self::Custom(p) => write!(f, "custom({p})"),
        }
    }
}

impl GeneratorId {
    /// Builds the matrix; relative custom paths resolve against `base_dir`.
    pub fn matrix(&self, base_dir: Option<&Path>) -> Result<ComplexMatrix> {
        match self {
            Self::MomentumRing(d) => cyclic_translation_generator_with(*d, Branch::Lower),
            Self::MomentumRingUpper(d) => cyclic_translation_generator_with(*d, Branch::Upper),
            Self::Sz(j) => spin_z(*j),
            Self::Custom(p) => {
                let path = Path::new(p);
                let path = match base_dir {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.to_path_buf(),
                };
                let file = std::fs::File::open(&path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                read_matrix_csv(file)
            }
        }
    }

    pub fn label(&self) -> GeneratorLabel {
        match self {
            Self::MomentumRing(_) | Self::MomentumRingUpper(_) => GeneratorLabel::Momentum,
            Self::Sz(_) => GeneratorLabel::AngularMomentum,
            Self::Custom(_) => GeneratorLabel::Custom,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorLabel {
    Energy,
    Momentum,
    AngularMomentum,
    Custom,
}

impl fmt::Display for GeneratorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Energy => "energy",
            Self::Momentum => "momentum",
            Self::AngularMomentum => "angular-momentum",
            Self::Custom => "custom",
        })
    }
}

/// `G_s ⊗ I + I ⊗ G_c = target`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSpec {
    g_s: ComplexMatrix,
    g_c: ComplexMatrix,
    target: f64,
    label: GeneratorLabel,
}

impl ConstraintSpec {
    pub fn new(
        g_s: ComplexMatrix,
        g_c: ComplexMatrix,
        target: f64,
        label: GeneratorLabel,
    ) -> Result<Self> {
        for g in [&g_s, &g_c] {
            if !g.is_square() {
                return Err(Error::DimensionMismatch {
                    expected: g.rows(),
                    actual: g.cols(),
                });
            }
            g.require_hermitian(HERMITIAN_TOL * g.max_abs().max(1.0))?;
        }
        if !target.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "target must be finite, got {target}"
            )));
        }
        Ok(Self {
            g_s,
            g_c,
            target,
            label,
        })
    }

    pub fn g_s(&self) -> &ComplexMatrix {
        &self.g_s
    }

    pub fn g_c(&self) -> &ComplexMatrix {
        &self.g_c
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn label(&self) -> GeneratorLabel {
        self.label
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.g_s.rows(), self.g_c.rows())
    }

    pub fn total(&self) -> ComplexMatrix {
        let (ds, dc) = self.dims();
        self.g_s
            .kron(&ComplexMatrix::identity(dc))
            .add(&ComplexMatrix::identity(ds).kron(&self.g_c))
            .expect("square factors")
    }

    /// `‖(G_s ⊗ I + I ⊗ G_c − target)ψ‖`.
    pub fn residual(&self, psi: &ComplexVector) -> Result<f64> {
        let (ds, dc) = self.dims();
        let g =
            apply_left_factor(&self.g_s, psi, dc)?.add(&apply_right_factor(&self.g_c, psi, ds)?)?;
        Ok(g.sub(&psi.scale(C64::new(self.target, 0.0)))?.norm())
    }
}

/// A normalized joint state satisfying every spec in its set.
#[derive(Clone, Debug)]
pub struct ConstraintState {
    psi: ComplexVector,
    specs: Vec<ConstraintSpec>,
}

impl ConstraintState {
    pub fn new(psi: ComplexVector, specs: Vec<ConstraintSpec>) -> Result<Self> {
        let first = specs
            .first()
            .ok_or_else(|| Error::InvalidParameter("no constraints given".into()))?;
        let (ds, dc) = first.dims();
        if psi.dim() != ds * dc {
            return Err(Error::DimensionMismatch {
                expected: ds * dc,
                actual: psi.dim(),
            });
        }
        let psi = psi.normalized()?;
        for spec in &specs {
            if spec.dims() != (ds, dc) {
                return Err(Error::DimensionMismatch {
                    expected: ds * dc,
                    actual: spec.dims().0 * spec.dims().1,
                });
            }
            let r = spec.residual(&psi)?;
            if r > CONSTRAINT_TOL {
                return Err(Error::ConstraintViolated {
                    residual: r,
                    tol: CONSTRAINT_TOL,
                });
            }
        }
        Ok(Self { psi, specs })
    }

    pub fn psi(&self) -> &ComplexVector {
        &self.psi
    }

    pub fn specs(&self) -> &[ConstraintSpec] {
        &self.specs
    }

    pub fn dims(&self) -> (usize, usize) {
        self.specs[0].dims()
    }
}

/// Orthonormal basis of the eigenspace of the total generator at `target`.
pub fn build_constraint_state(spec: &ConstraintSpec, tol: f64) -> Result<Vec<ConstraintState>> {
    build_joint_constraint_states(std::slice::from_ref(spec), tol)
}

/// Joint eigenspace of several commuting total generators.
pub fn build_joint_constraint_states(
    specs: &[ConstraintSpec],
    tol: f64,
) -> Result<Vec<ConstraintState>> {
    let first = specs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no constraints given".into()))?;
    let totals: Vec<ComplexMatrix> = specs.iter().map(ConstraintSpec::total).collect();
    for s in specs {
        if s.dims() != first.dims() {
            return Err(Error::DimensionMismatch {
                expected: first.dims().0 * first.dims().1,
                actual: s.dims().0 * s.dims().1,
            });
        }
    }
    for i in 0..totals.len() {
        for j in i + 1..totals.len() {
            let norm = totals[i].commutator(&totals[j])?.frobenius_norm();
            let scale = totals[i].frobenius_norm() * totals[j].frobenius_norm();
            if norm > 1e-10 * scale.max(1.0) {
                return Err(Error::NonCommuting {
                    first: i,
                    second: j,
                    norm,
                });
            }
        }
    }
    let mut basis = eigenspace(&totals[0], first.target, tol)?;
    for (spec, total) in specs.iter().zip(&totals).skip(1) {
        if basis.is_empty() {
            break;
        }
        basis = restrict_to_eigenspace(&basis, total, spec.target, tol)?;
    }
    basis
        .into_iter()
        .map(|v| ConstraintState::new(v, specs.to_vec()))
        .collect()
}

/// Eigenvectors of `a` restricted to `span(basis)` with eigenvalue `target`.
fn restrict_to_eigenspace(
    basis: &[ComplexVector],
    a: &ComplexMatrix,
    target: f64,
    tol: f64,
) -> Result<Vec<ComplexVector>> {
    let n = basis.len();
    let images = basis
        .iter()
        .map(|v| a.matvec(v))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![vec![C64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            rows[i][j] = basis[i].inner(&images[j])?;
        }
    }
    let m = ComplexMatrix::from_rows(rows)?;
    let m = m.add(&m.adjoint())?.scale_real(0.5);
    let eig = eigh(&m)?;
    let dim = basis[0].dim();
    let mut out = Vec::new();
    for (i, &l) in eig.values.iter().enumerate() {
        if (l - target).abs() < tol {
            let c = eig.eigenvector(i);
            let mut v = ComplexVector::zeros(dim);
            for (b, cj) in basis.iter().zip(c.entries()) {
                v = v.add(&b.scale(*cj))?;
            }
            out.push(v.normalized()?);
        }
    }
    Ok(out)
}

fn require_satisfied(state: &ConstraintState, spec: &ConstraintSpec) -> Result<()> {
    let r = spec.residual(&state.psi)?;
    if r > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolated {
            residual: r,
            tol: CONSTRAINT_TOL,
        });
    }
    Ok(())
}

/// `‖(e^{−iG_s s} ⊗ I)ψ − e^{−i·target·s}(I ⊗ e^{+iG_c s})ψ‖`: moving the
/// system by `s` is the same as moving the partner by `−s`.
pub fn covariance_check(state: &ConstraintState, spec: &ConstraintSpec, s: f64) -> Result<f64> {
    require_satisfied(state, spec)?;
    let (ds, dc) = spec.dims();
    let left = apply_left_factor(&unitary_evolution(&spec.g_s, s)?, &state.psi, dc)?;
    let right = apply_right_factor(&unitary_evolution(&spec.g_c, -s)?, &state.psi, ds)?;
    let phase = C64::new(0.0, -spec.target * s).exp();
    Ok(left.sub(&right.scale(phase))?.norm())
}

/// `‖e^{−i(G_s + G_c)s}ψ − e^{−i·target·s}ψ‖`.
pub fn global_invariance_deviation(
    state: &ConstraintState,
    spec: &ConstraintSpec,
    s: f64,
) -> Result<f64> {
    let (ds, dc) = spec.dims();
    let moved = apply_right_factor(
        &unitary_evolution(&spec.g_c, s)?,
        &apply_left_factor(&unitary_evolution(&spec.g_s, s)?, &state.psi, dc)?,
        ds,
    )?;
    let phase = C64::new(0.0, -spec.target * s).exp();
    Ok(moved.sub(&state.psi.scale(phase))?.norm())
}

#[derive(Clone, Debug)]
pub struct ReadoutBranch {
    /// Index of the reference basis vector.
    pub index: usize,
    pub probability: f64,
    /// Normalized state of the other subsystem.
    pub state: ComplexVector,
}

#[derive(Clone, Debug)]
pub struct RelationalReadout {
    pub branches: Vec<ReadoutBranch>,
    /// Reference outcomes with zero probability.
    pub empty: Vec<usize>,
}

/// Conditional states of the other subsystem given each outcome of an
/// orthonormal basis on `reference`.
pub fn relational_readout(
    psi: &ComplexVector,
    dims: (usize, usize),
    reference: Subsystem,
    basis: &[ComplexVector],
) -> Result<RelationalReadout> {
    let (ds, dc) = dims;
    if psi.dim() != ds * dc {
        return Err(Error::DimensionMismatch {
            expected: ds * dc,
            actual: psi.dim(),
        });
    }
    let d_ref = match reference {
        Subsystem::System => ds,
        Subsystem::Clock => dc,
    };
    for (i, a) in basis.iter().enumerate() {
        if a.dim() != d_ref {
            return Err(Error::DimensionMismatch {
                expected: d_ref,
                actual: a.dim(),
            });
        }
        for (j, b) in basis.iter().enumerate().skip(i) {
            let expect = if i == j { 1.0 } else { 0.0 };
            let ip = a.inner(b)?;
            if (ip - C64::new(expect, 0.0)).norm() > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "conditioning basis is not orthonormal: ⟨{i}|{j}⟩ = {ip}"
                )));
            }
        }
    }
    let norm2 = psi.norm_sqr();
    let mut branches = Vec::new();
    let mut empty = Vec::new();
    for (index, r) in basis.iter().enumerate() {
        let v: Vec<C64> = match reference {
            Subsystem::Clock => (0..ds)
                .map(|s| (0..dc).map(|c| r[c].conj() * psi[s * dc + c]).sum())
                .collect(),
            Subsystem::System => (0..dc)
                .map(|c| (0..ds).map(|s| r[s].conj() * psi[s * dc + c]).sum())
                .collect(),
        };
        let v = ComplexVector::new(v)?;
        let p = v.norm_sqr() / norm2;
        if v.norm() < 1e-12 {
            empty.push(index);
            continue;
        }
        branches.push(ReadoutBranch {
            index,
            probability: p,
            state: v.normalized()?,
        });
    }
    Ok(RelationalReadout { branches, empty })
}

/// Site basis `|0⟩, …, |d − 1⟩`.
pub fn position_basis(d: usize) -> Vec<ComplexVector> {
    (0..d).map(|x| ComplexVector::basis(d, x)).collect()
}

/// Two free particles with `p₁ + p₂ = P`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoParticleScenario {
    pub m1: f64,
    pub m2: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Fixes `p₂ = P − p₁`.
pub fn classical_momentum_constraint(
    m1: f64,
    m2: f64,
    p_total: f64,
    p1: f64,
) -> Result<TwoParticleScenario> {
    for (name, m) in [("m1", m1), ("m2", m2)] {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {m}"
            )));
        }
    }
    if !p_total.is_finite() || !p1.is_finite() {
        return Err(Error::InvalidParameter("momenta must be finite".into()));
    }
    Ok(TwoParticleScenario {
        m1,
        m2,
        p1,
        p2: p_total - p1,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoParticleRun {
    pub steps: usize,
    /// `max_n |P(t_n) − P(0)|`.
    pub total_momentum_drift: f64,
    pub p1_drift: f64,
    pub p2_drift: f64,
    /// `max_n |Q_cm(t_n) − Q_cm(0) − P t_n / M|`.
    pub center_of_mass_drift: f64,
    /// `(q₁ − q₂)` rate over the run.
    pub relative_velocity: f64,
    pub expected_relative_velocity: f64,
}

impl TwoParticleScenario {
    pub fn total_momentum(&self) -> f64 {
        self.p1 + self.p2
    }

    pub fn hamiltonian(&self) -> Result<Composite> {
        Composite::new(vec![
            Box::new(LibrarySystem::free_particle(self.m1)?),
            Box::new(LibrarySystem::free_particle(self.m2)?),
        ])
    }

    /// Leapfrog run of `steps` steps of size `dt` from positions `(q1, q2)`.
    pub fn run(&self, q1: f64, q2: f64, steps: usize, dt: f64) -> Result<TwoParticleRun> {
        let h = self.hamiltonian()?;
        let mut z = [q1, q2, self.p1, self.p2];
        let mut lf = Leapfrog::new(&h as &dyn HamiltonianField, dt)?;
        let m = self.m1 + self.m2;
        let p0 = self.total_momentum();
        let com0 = (self.m1 * q1 + self.m2 * q2) / m;
        let mut drift = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for n in 1..=steps {
            lf.step(&mut z);
            let t = n as f64 * dt;
            drift.0 = drift.0.max((z[2] + z[3] - p0).abs());
            drift.1 = drift.1.max((z[2] - self.p1).abs());
            drift.2 = drift.2.max((z[3] - self.p2).abs());
            let com = (self.m1 * z[0] + self.m2 * z[1]) / m;
            drift.3 = drift.3.max((com - com0 - p0 * t / m).abs());
        }
        let duration = steps as f64 * dt;
        let relative_velocity = if steps == 0 {
            0.0
        } else {
            ((z[0] - z[1]) - (q1 - q2)) / duration
        };
        Ok(TwoParticleRun {
            steps,
            total_momentum_drift: drift.0,
            p1_drift: drift.1,
            p2_drift: drift.2,
            center_of_mass_drift: drift.3,
            relative_velocity,
            expected_relative_velocity: self.p1 / self.m1 - self.p2 / self.m2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_pw::{build_cyclic_clock, build_history_state, condition_on_clock};
    use std::f64::consts::PI;

    #[test]
    fn two_site_generator() {
        let g = cyclic_translation_generator(2).unwrap();
        let eig = eigh(&g).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-12 && eig.values[1].abs() < 1e-12);
        let u = unitary_evolution(&g, PI).unwrap();
        assert!(u.max_abs_diff(&shift_matrix(2)).unwrap() < 1e-10);
        assert!(cyclic_translation_generator(1).is_err());
    }

    #[test]
    fn ring_generator_exponentiates_to_shift() {
        for d in [3, 4, 8] {
            for branch in [Branch::Lower, Branch::Upper] {
                let g = cyclic_translation_generator_with(d, branch).unwrap();
                let u = unitary_evolution(&g, 2.0 * PI / d as f64).unwrap();
                assert!(u.max_abs_diff(&shift_matrix(d)).unwrap() < 1e-10, "d = {d}");
            }
        }
    }

    #[test]
    fn generator_ids() {
        assert_eq!(
            "momentum_ring(4)".parse::<GeneratorId>().unwrap(),
            GeneratorId::MomentumRing(4)
        );
        assert_eq!(
            "sz(0.5)".parse::<GeneratorId>().unwrap(),
            GeneratorId::Sz(0.5)
        );
        assert_eq!(
            "custom(a/b.csv)".parse::<GeneratorId>().unwrap(),
            GeneratorId::Custom("a/b.csv".into())
        );
        assert!("boost(2)".parse::<GeneratorId>().is_err());
        assert!("momentum_ring(x)".parse::<GeneratorId>().is_err());
        assert!(spin_z(0.3).is_err());
        assert_eq!(spin_z(1.0).unwrap().rows(), 3);
        for id in ["momentum_ring(5)", "momentum_ring_upper(4)", "sz(1.5)"] {
            assert_eq!(id.parse::<GeneratorId>().unwrap().to_string(), id);
        }
    }

    #[test]
    fn zero_momentum_pairs_on_four_sites() {
        let spec = ConstraintSpec::new(
            cyclic_translation_generator_with(4, Branch::Lower).unwrap(),
            cyclic_translation_generator_with(4, Branch::Upper).unwrap(),
            0.0,
            GeneratorLabel::Momentum,
        )
        .unwrap();
        let states = build_constraint_state(&spec, 1e-8).unwrap();
        assert_eq!(states.len(), 4);
        // Σ_x |x⟩|x⟩ / 2 lies in the span.
        let diag = ComplexVector::new(
            (0..16)
                .map(|i| C64::new(if i % 5 == 0 { 0.5 } else { 0.0 }, 0.0))
                .collect(),
        )
        .unwrap();
        let captured: f64 = states
            .iter()
            .map(|s| s.psi().inner(&diag).unwrap().norm_sqr())
            .sum();
        assert!((captured - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spin_pair_and_empty_target() {
        let half = spin_z(0.5).unwrap();
        let spec = ConstraintSpec::new(
            half.clone(),
            half.scale_real(-1.0),
            0.0,
            GeneratorLabel::AngularMomentum,
        )
        .unwrap();
        let states = build_constraint_state(&spec, 1e-8).unwrap();
        assert_eq!(states.len(), 2);
        for s in &states {
            let p = s.psi();
            assert!(p[1].norm() < 1e-12 && p[2].norm() < 1e-12);
        }
        let off = ConstraintSpec::new(
            half.clone(),
            half.scale_real(-1.0),
            5.0,
            GeneratorLabel::AngularMomentum,
        )
        .unwrap();
        assert!(build_constraint_state(&off, 1e-8).unwrap().is_empty());
    }

    #[test]
    fn covariance_and_violation() {
        let d = 8;
        let spec = ConstraintSpec::new(
            cyclic_translation_generator_with(d, Branch::Lower).unwrap(),
            cyclic_translation_generator_with(d, Branch::Upper).unwrap(),
            0.0,
            GeneratorLabel::Momentum,
        )
        .unwrap();
        let pair: Vec<C64> = (0..d * d)
            .map(|i| C64::new(if i / d == i % d { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let state =
            ConstraintState::new(ComplexVector::new(pair).unwrap(), vec![spec.clone()]).unwrap();
        assert_eq!(covariance_check(&state, &spec, 0.0).unwrap(), 0.0);
        assert!(covariance_check(&state, &spec, 2.0 * PI / d as f64).unwrap() < 1e-10);
        assert!(global_invariance_deviation(&state, &spec, 0.37).unwrap() < 1e-10);
        let product = ComplexVector::basis(d * d, 1);
        assert!(matches!(
            ConstraintState::new(product, vec![spec.clone()]),
            Err(Error::ConstraintViolated { .. })
        ));
    }

    #[test]
    fn non_commuting_sets_are_rejected() {
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let z = ComplexMatrix::from_real_diagonal(&[1.0, -1.0]);
        let a = ConstraintSpec::new(x.clone(), x, 0.0, GeneratorLabel::Custom).unwrap();
        let b = ConstraintSpec::new(z.clone(), z, 0.0, GeneratorLabel::Custom).unwrap();
        assert!(matches!(
            build_joint_constraint_states(&[a, b], 1e-8),
            Err(Error::NonCommuting {
                first: 0,
                second: 1,
                ..
            })
        ));
    }

    #[test]
    fn readout_reproduces_clock_conditioning() {
        let clock = build_cyclic_clock(8, 0.5).unwrap();
        let h_s = clock.commensurate_hamiltonian(&[0, 1]).unwrap();
        let phi0 = ComplexVector::uniform(2);
        let hs = build_history_state(&h_s, &phi0, &clock).unwrap();
        let spec = ConstraintSpec::new(
            h_s,
            clock.hamiltonian().clone(),
            0.0,
            GeneratorLabel::Energy,
        )
        .unwrap();
        let state = ConstraintState::new(hs.psi().clone(), vec![spec]).unwrap();
        let readout =
            relational_readout(state.psi(), (2, 8), Subsystem::Clock, clock.time_states()).unwrap();
        assert_eq!(readout.branches.len(), 8);
        for b in &readout.branches {
            let f = b
                .state
                .fidelity(&condition_on_clock(&hs, b.index).unwrap())
                .unwrap();
            assert!((1.0 - f).abs() < 1e-10);
        }
    }

    #[test]
    fn readout_flags_empty_branches() {
        let psi = ComplexVector::basis(4, 0);
        let r = relational_readout(&psi, (2, 2), Subsystem::Clock, &position_basis(2)).unwrap();
        assert_eq!(r.branches.len(), 1);
        assert_eq!(r.empty, vec![1]);
        assert!(relational_readout(
            &psi,
            (2, 2),
            Subsystem::Clock,
            &[ComplexVector::uniform(2), ComplexVector::basis(2, 0)]
        )
        .is_err());
    }

    #[test]
    fn two_particles() {
        let sc = classical_momentum_constraint(1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(sc.p2, -1.0);
        let run = sc.run(0.0, 0.0, 1000, 1e-3).unwrap();
        assert_eq!(run.total_momentum_drift, 0.0);
        assert!((run.relative_velocity - 2.0).abs() < 1e-12);
        assert!(run.center_of_mass_drift < 1e-12);
        assert!(classical_momentum_constraint(0.0, 1.0, 0.0, 1.0).is_err());
    }
}
