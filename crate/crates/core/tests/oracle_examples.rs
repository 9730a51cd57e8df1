use num_complex::Complex64;
use proptest::prelude::*;

use spinbath::engine;
use spinbath::oracle;
use spinbath::sampling::{sample_environment, AlphaMode, CouplingDistribution, EnvironmentSpec, GroupSpec};
use spinbath::{EnvironmentRealization, ObservableSpec, SystemCoefficients};

const TOL: f64 = 1e-10;

fn random_env(n: usize, seed: u64) -> EnvironmentRealization {
    let spec = EnvironmentSpec {
        groups: vec![GroupSpec::new("bath", n, CouplingDistribution::uniform(0.8, 0.6), AlphaMode::RandomUniform)],
        seed,
        randomize_phases: true,
    };
    sample_environment(&spec).unwrap()
}

fn tilted_system() -> SystemCoefficients {
    let a = Complex64::new(0.6, 0.0);
    let b = Complex64::from_polar(0.8, 0.7);
    SystemCoefficients::new(a, b).unwrap()
}

#[test]
fn four_particle_factor_matches_branch_overlap() {
    let env = EnvironmentRealization::from_pairs(&[(0.2, 0.3), (0.4, 0.5), (0.6, 0.7), (0.8, 1.1)]).unwrap();
    let sys = SystemCoefficients::equal_superposition();
    let state = oracle::evolve(&oracle::build_initial(&sys, &env).unwrap(), &env, 2.0).unwrap();
    let r_oracle = oracle::branch_overlap(&state).unwrap();
    let r_engine = engine::decoherence_factor(&env, 2.0);
    assert!((r_oracle - r_engine).norm() < TOL);
    assert!((r_oracle.norm_sqr() - engine::abs_r2(&env, 2.0)).abs() < TOL);
}

#[test]
fn six_particle_series_matches_oracle() {
    let env = random_env(6, 61);
    let sys = tilted_system();
    let initial = oracle::build_initial(&sys, &env).unwrap();
    for k in 0..50 {
        let t = 0.2 * k as f64;
        let state = oracle::evolve(&initial, &env, t).unwrap();
        let from_oracle = oracle::branch_overlap(&state).unwrap().norm_sqr();
        assert!((from_oracle - engine::abs_r2(&env, t)).abs() < TOL, "t = {t}");
    }
}

#[test]
fn five_particle_sigma_x_expectation() {
    let env = random_env(5, 5);
    let sys = SystemCoefficients::equal_superposition();
    let obs = ObservableSpec::sigma_x();
    let state = oracle::evolve(&oracle::build_initial(&sys, &env).unwrap(), &env, 1.3).unwrap();
    let expected = oracle::oracle_expectation(&state, &obs);
    let r = engine::decoherence_factor(&env, 1.3);
    let got = engine::expectation_relevant(&sys, &obs, r);
    assert!((got - expected).norm() < TOL);
    // σx expectation for the equal superposition is Re r
    assert!((got.re - r.re).abs() < TOL && got.im.abs() < TOL);
}

#[test]
fn six_particle_slice_overlap_at_fixed_time() {
    let env = random_env(6, 17);
    let sys = tilted_system();
    let state = oracle::evolve(&oracle::build_initial(&sys, &env).unwrap(), &env, 1.7).unwrap();
    let r = oracle::branch_overlap(&state).unwrap();
    assert!((r - engine::decoherence_factor(&env, 1.7)).norm() < TOL);
}

#[test]
fn eight_particle_time_sweep() {
    let env = random_env(8, 88);
    let sys = tilted_system();
    let initial = oracle::build_initial(&sys, &env).unwrap();
    for k in 1..=10 {
        let t = 0.5 * k as f64;
        let state = oracle::evolve(&initial, &env, t).unwrap();
        let r = oracle::branch_overlap(&state).unwrap();
        assert!((r - engine::decoherence_factor(&env, t)).norm() < TOL, "t = {t}");
    }
}

#[test]
fn reduced_matrix_trace_matches_engine() {
    let env = random_env(6, 22);
    let sys = tilted_system();
    let obs = ObservableSpec::hermitian(0.3, Complex64::new(0.5, -0.2), -0.9);
    let state = oracle::evolve(&oracle::build_initial(&sys, &env).unwrap(), &env, 2.2).unwrap();
    let rho = oracle::reduced_system_matrix(&state);
    let trace = rho[0][0] + rho[1][1];
    assert!((trace - Complex64::new(1.0, 0.0)).norm() < TOL);
    let from_rho = oracle::trace_product(&rho, &obs);
    let r = engine::decoherence_factor(&env, 2.2);
    assert!((from_rho - engine::expectation_relevant(&sys, &obs, r)).norm() < TOL);
}

#[test]
fn five_particle_hermitian_observable() {
    let env = random_env(5, 31);
    let sys = tilted_system();
    let obs = ObservableSpec::hermitian(1.2, Complex64::new(-0.4, 0.9), 0.1);
    let state = oracle::evolve(&oracle::build_initial(&sys, &env).unwrap(), &env, 3.1).unwrap();
    let expected = oracle::oracle_expectation(&state, &obs);
    assert!(expected.im.abs() < TOL);
    let got = engine::expectation_relevant(&sys, &obs, engine::decoherence_factor(&env, 3.1));
    assert!((got - expected).norm() < TOL);
}

#[test]
fn non_hermitian_observable_matches_oracle() {
    let env = random_env(4, 9);
    let sys = tilted_system();
    let obs = ObservableSpec::new(
        Complex64::new(0.1, 0.2),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(-0.3, 0.4),
    );
    let state = oracle::evolve(&oracle::build_initial(&sys, &env).unwrap(), &env, 0.9).unwrap();
    let got = engine::expectation_relevant(&sys, &obs, engine::decoherence_factor(&env, 0.9));
    assert!((got - oracle::oracle_expectation(&state, &obs)).norm() < TOL);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_agrees_with_oracle(
        n in 1usize..=8,
        seed in any::<u64>(),
        theta in 0.05f64..1.5,
        phi in 0.0f64..std::f64::consts::TAU,
        t in -6.0f64..6.0,
    ) {
        let env = random_env(n, seed);
        let sys = SystemCoefficients::new(Complex64::new(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), phi)).unwrap();
        let state = oracle::evolve(&oracle::build_initial(&sys, &env).unwrap(), &env, t).unwrap();
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
        let r = oracle::branch_overlap(&state).unwrap();
        prop_assert!((r - engine::decoherence_factor(&env, t)).norm() < TOL);
        let obs = ObservableSpec::sigma_x();
        let got = engine::expectation_relevant(&sys, &obs, r);
        prop_assert!((got - oracle::oracle_expectation(&state, &obs)).norm() < TOL);
    }
}
