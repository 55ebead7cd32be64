use proptest::prelude::*;
use timeless_core::linalg::{eigh, unitary_evolution};
use timeless_core::quantum_pw::{
    build_cyclic_clock, build_history_state, clock_covariance_deviation, conditional_infidelities,
    partial_trace, stationarity_residual, von_neumann_residual, DensityMatrix, Subsystem,
};
use timeless_core::{ComplexMatrix, ComplexVector, C64};

fn random_state(re: &[f64], im: &[f64]) -> ComplexVector {
    ComplexVector::new(re.iter().zip(im).map(|(a, b)| C64::new(*a, *b)).collect())
        .unwrap()
        .normalized()
        .unwrap()
}

fn state_strategy(dim: usize) -> impl Strategy<Value = ComplexVector> {
    (
        prop::collection::vec(-1.0..1.0f64, dim),
        prop::collection::vec(-1.0..1.0f64, dim),
    )
        .prop_filter("non-zero", |(re, im)| {
            re.iter().chain(im).any(|x| x.abs() > 0.1)
        })
        .prop_map(|(re, im)| random_state(&re, &im))
}

/// Clock size, spacing, and system levels whose partners fit in the window.
fn commensurate_case() -> impl Strategy<Value = (usize, f64, Vec<i64>)> {
    (2usize..=16, 0.05..2.0f64, 1usize..=4).prop_flat_map(|(d, dt, ds)| {
        let lo = -((d as i64 - 1) / 2);
        let hi = d as i64 / 2;
        (Just(d), Just(dt), prop::collection::vec(lo..=hi, ds))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn commensurate_history_states_are_stationary((d, dt, ms) in commensurate_case(), seed in any::<u64>()) {
        let clock = build_cyclic_clock(d, dt).unwrap();
        let h_s = clock.commensurate_hamiltonian(&ms).unwrap();
        let ds = ms.len();
        let re: Vec<f64> = (0..ds).map(|i| ((seed >> (i * 8)) & 0xff) as f64 / 255.0 + 0.1).collect();
        let im: Vec<f64> = (0..ds).map(|i| ((seed >> (i * 8 + 4)) & 0x0f) as f64 / 15.0).collect();
        let phi0 = random_state(&re, &im);
        let hs = build_history_state(&h_s, &phi0, &clock).unwrap();
        prop_assert!(stationarity_residual(&hs, &h_s).unwrap() < 1e-10);
        for inf in conditional_infidelities(&hs, &h_s, &phi0).unwrap() {
            prop_assert!(inf.abs() < 1e-10);
        }
        prop_assert!(clock_covariance_deviation(&hs, &h_s).unwrap() < 1e-10);
    }

    #[test]
    fn clock_time_states_are_orthonormal_and_cyclic(d in 2usize..=32, dt in 0.01..3.0f64) {
        let clock = build_cyclic_clock(d, dt).unwrap();
        prop_assert!(clock.orthonormality_deviation() < 1e-12);
        prop_assert!(clock.cyclicity_deviation() < 1e-10);
    }

    #[test]
    fn history_state_is_globally_pure(phi0 in state_strategy(2), d in 2usize..=12) {
        let clock = build_cyclic_clock(d, 0.5).unwrap();
        let h_s = clock.commensurate_hamiltonian(&[0, 1]).unwrap();
        let hs = build_history_state(&h_s, &phi0, &clock).unwrap();
        let global = hs.projector();
        prop_assert!((global.purity() - 1.0).abs() < 1e-10);
        prop_assert!(global.entropy().unwrap().abs() < 1e-10);
        let rs = hs.reduced_system_state();
        let rc = partial_trace(&global, (2, d), Subsystem::Clock).unwrap();
        // Schmidt spectra of a pure bipartite state coincide.
        let a = rs.entropy().unwrap();
        let b = rc.entropy().unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn unitary_evolution_is_unitary(re in prop::collection::vec(-1.0..1.0f64, 9), t in -5.0..5.0f64) {
        let mut rows = vec![vec![C64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let z = C64::new(re[3 * i + j], if i == j { 0.0 } else { re[3 * j + i] });
                rows[i][j] = z;
                rows[j][i] = z.conj();
            }
        }
        let h = ComplexMatrix::from_rows(rows).unwrap();
        let u = unitary_evolution(&h, t).unwrap();
        prop_assert!(u.unitary_deviation() < 1e-10);
        let eig = eigh(&h).unwrap();
        let back = eig.apply_function(|l| C64::new(l, 0.0));
        prop_assert!(back.max_abs_diff(&h).unwrap() < 1e-10);
    }
}

#[test]
fn mixed_reduced_state_of_pure_history() {
    let clock = build_cyclic_clock(8, 0.5).unwrap();
    let h_s = clock.commensurate_hamiltonian(&[0, 1]).unwrap();
    let hs = build_history_state(&h_s, &ComplexVector::uniform(2), &clock).unwrap();
    assert!(hs.projector().entropy().unwrap().abs() < 1e-10);
    let bits = hs.reduced_system_state().entropy_bits().unwrap();
    assert!(bits > 0.5, "{bits}");
    let rho = DensityMatrix::from_pure(&ComplexVector::basis(2, 0)).unwrap();
    assert_eq!(rho.entropy().unwrap(), 0.0);
}

#[test]
fn von_neumann_residual_is_second_order() {
    // Fixed H_s and physical time T = 2; the clock is refined by doubling d
    // and halving dt, which keeps ω_c and hence H_s commensurate.
    let period = 8.0;
    let phi0 = ComplexVector::uniform(2);
    let mut residuals = Vec::new();
    for d in [32usize, 64, 128] {
        let dt = period / d as f64;
        let clock = build_cyclic_clock(d, dt).unwrap();
        let h_s = clock.commensurate_hamiltonian(&[0, 1]).unwrap();
        let hs = build_history_state(&h_s, &phi0, &clock).unwrap();
        let k = (2.0 / dt).round() as usize;
        residuals.push(von_neumann_residual(&hs, &h_s, k).unwrap());
    }
    for w in residuals.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            (3.5..=4.5).contains(&ratio),
            "ratio {ratio} from {residuals:?}"
        );
    }
}
