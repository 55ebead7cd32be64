use std::f64::consts::PI;

use proptest::prelude::*;
use timeless_core::generalized_constraints::{
    build_constraint_state, build_joint_constraint_states, classical_momentum_constraint,
    covariance_check, cyclic_translation_generator, cyclic_translation_generator_with,
    global_invariance_deviation, position_basis, relational_readout, shift_matrix, spin_z,
    ConstraintSpec, GeneratorLabel, CONSTRAINT_TOL,
};
use timeless_core::quantum_pw::{
    build_cyclic_clock, build_history_state, condition_on_clock, Subsystem,
};
use timeless_core::ring::Branch;
use timeless_core::{ComplexMatrix, ComplexVector};

fn ring_spec(d: usize, target: f64) -> ConstraintSpec {
    ConstraintSpec::new(
        cyclic_translation_generator(d).unwrap(),
        cyclic_translation_generator_with(d, Branch::Upper).unwrap(),
        target,
        GeneratorLabel::Momentum,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ring_states_are_covariant((d, target) in (2usize..=12).prop_flat_map(|d| (Just(d), -(d as i64 - 1).min(2)..=(d as i64 - 1).min(2)))) {
        let spec = ring_spec(d, target as f64);
        let states = build_constraint_state(&spec, 1e-9).unwrap();
        prop_assert!(!states.is_empty());
        for state in &states {
            prop_assert!(spec.residual(state.psi()).unwrap() <= CONSTRAINT_TOL);
            for k in 0..32 {
                let s = -3.0 + 6.0 * k as f64 / 31.0;
                prop_assert!(covariance_check(state, &spec, s).unwrap() < 1e-10);
                prop_assert!(global_invariance_deviation(state, &spec, s).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn spin_constraint_couples_opposite_projections(twice_j in 1u32..=4) {
        let j = twice_j as f64 / 2.0;
        let sz = spin_z(j).unwrap();
        let spec = ConstraintSpec::new(sz.clone(), sz, 0.0, GeneratorLabel::AngularMomentum).unwrap();
        let states = build_constraint_state(&spec, 1e-9).unwrap();
        prop_assert_eq!(states.len(), twice_j as usize + 1);
        for state in &states {
            prop_assert!(covariance_check(state, &spec, 0.7).unwrap() < 1e-10);
        }
    }
}

#[test]
fn ring_constraint_readout_shifts_partner_by_site() {
    let d = 6;
    let spec = ring_spec(d, 0.0);
    let states = build_constraint_state(&spec, 1e-9).unwrap();
    assert_eq!(states.len(), d);
    for state in &states {
        let readout =
            relational_readout(state.psi(), (d, d), Subsystem::System, &position_basis(d)).unwrap();
        let total: f64 = readout.branches.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn joint_constraints_intersect_eigenspaces() {
    let d = 4;
    let ring = ring_spec(d, 0.0);
    let ident = ComplexMatrix::identity(d);
    let number = ConstraintSpec::new(ident.clone(), ident, 2.0, GeneratorLabel::Custom).unwrap();
    let states = build_joint_constraint_states(&[ring.clone(), number], 1e-9).unwrap();
    assert_eq!(states.len(), d);
    let off = ConstraintSpec::new(
        shift_matrix(d).add(&shift_matrix(d).adjoint()).unwrap(),
        ComplexMatrix::identity(d),
        0.0,
        GeneratorLabel::Custom,
    )
    .unwrap();
    let position = ConstraintSpec::new(
        ComplexMatrix::from_real_diagonal(&(0..d).map(|x| x as f64).collect::<Vec<_>>()),
        ComplexMatrix::zeros(d, d),
        0.0,
        GeneratorLabel::Custom,
    )
    .unwrap();
    assert!(build_joint_constraint_states(&[off, position], 1e-9).is_err());
}

/// The energy constraint with a cyclic clock is the history-state construction.
#[test]
fn energy_instance_matches_history_state() {
    let (d, dt) = (8, 0.25);
    let clock = build_cyclic_clock(d, dt).unwrap();
    let h_s = clock.commensurate_hamiltonian(&[0, 1]).unwrap();
    let spec = ConstraintSpec::new(
        h_s.clone(),
        clock.hamiltonian().clone(),
        0.0,
        GeneratorLabel::Energy,
    )
    .unwrap();
    let states = build_constraint_state(&spec, 1e-9).unwrap();
    assert_eq!(states.len(), 2);
    let phi0 = ComplexVector::new(vec![(0.6).into(), (0.8).into()]).unwrap();
    let hs = build_history_state(&h_s, &phi0, &clock).unwrap();
    // The history state lies in the constraint space.
    let mut captured = 0.0;
    for s in &states {
        captured += s.psi().inner(hs.psi()).unwrap().norm_sqr();
    }
    assert!((captured - 1.0).abs() < 1e-10);
    let readout =
        relational_readout(hs.psi(), (2, d), Subsystem::Clock, clock.time_states()).unwrap();
    for b in &readout.branches {
        let pw = condition_on_clock(&hs, b.index).unwrap();
        let fid = pw.inner(&b.state).unwrap().norm_sqr();
        assert!((fid - 1.0).abs() < 1e-10);
        assert!((b.probability - 1.0 / d as f64).abs() < 1e-10);
    }
    assert!(covariance_check(&states[0], &spec, 2.0 * PI / 3.0).unwrap() < 1e-10);
}

#[test]
fn two_particle_momentum_is_exactly_conserved() {
    let sc = classical_momentum_constraint(1.0, 3.0, 2.0, 0.5).unwrap();
    let run = sc.run(0.0, 1.0, 200_000, 1e-3).unwrap();
    assert!(run.total_momentum_drift < 1e-12);
    assert_eq!(run.p1_drift, 0.0);
    assert!((run.relative_velocity - run.expected_relative_velocity).abs() < 1e-9);
    assert!(run.center_of_mass_drift < 1e-8);
}
