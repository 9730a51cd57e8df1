//! Brute-force reference: the full `2^(N+1)` state vector evolved exactly.
//!
//! Basis index `s · 2^N + e`, where `s` is the system bit and `e` packs the
//! environment bits with particle 1 most significant; bit 0 is up, 1 is down.
//! The interaction Hamiltonian `S_S ⊗ Σ 2gᵢ Sᵢ` is diagonal in this basis with
//! eigenvalue `σ_s Σ gᵢ σᵢ / 2` (σ = ±1), so evolution is a phase per amplitude.
//! Nothing here shares code with the product formulas in [`crate::engine`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{EnvironmentRealization, ObservableSpec, SystemCoefficients, NORM_TOLERANCE};

/// Largest environment the oracle accepts by default (`2^15` amplitudes).
pub const DEFAULT_N_MAX: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    amplitudes: Vec<Complex64>,
    n_env: usize,
    system: SystemCoefficients,
}

impl FullState {
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn n_env(&self) -> usize {
        self.n_env
    }

    pub fn system(&self) -> &SystemCoefficients {
        &self.system
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Environment amplitudes conditioned on the system bit (0 = up), unnormalized.
    pub fn branch(&self, system_bit: usize) -> &[Complex64] {
        let dim = 1usize << self.n_env;
        &self.amplitudes[system_bit * dim..(system_bit + 1) * dim]
    }
}

fn env_bit(e: usize, i: usize, n: usize) -> usize {
    (e >> (n - 1 - i)) & 1
}

pub fn build_initial(sys: &SystemCoefficients, env: &EnvironmentRealization) -> Result<FullState> {
    build_initial_with_limit(sys, env, DEFAULT_N_MAX)
}

pub fn build_initial_with_limit(sys: &SystemCoefficients, env: &EnvironmentRealization, n_max: usize) -> Result<FullState> {
    let n = env.len();
    if n > n_max {
        return Err(Error::OracleLimit { n, limit: n_max });
    }
    let dim = 1usize << n;
    let coeffs: Vec<[Complex64; 2]> = env.particles().iter().map(|p| [p.alpha(), p.beta()]).collect();
    let mut amplitudes = Vec::with_capacity(2 * dim);
    for s in 0..2 {
        let head = if s == 0 { sys.a() } else { sys.b() };
        for e in 0..dim {
            let amp = coeffs
                .iter()
                .enumerate()
                .fold(head, |acc, (i, c)| acc * c[env_bit(e, i, n)]);
            amplitudes.push(amp);
        }
    }
    Ok(FullState {
        amplitudes,
        n_env: n,
        system: *sys,
    })
}

/// Energy of basis state `index` under the interaction Hamiltonian.
pub fn basis_energy(index: usize, env: &EnvironmentRealization) -> f64 {
    let n = env.len();
    let sigma_s = if index >> n == 0 { 1.0 } else { -1.0 };
    let e = index & ((1usize << n) - 1);
    let sum: f64 = env
        .particles()
        .iter()
        .enumerate()
        .map(|(i, p)| if env_bit(e, i, n) == 0 { p.g() } else { -p.g() })
        .sum();
    0.5 * sigma_s * sum
}

/// Energies of every basis state, in basis order.
pub fn basis_energies(env: &EnvironmentRealization) -> Vec<f64> {
    (0..2usize << env.len()).map(|idx| basis_energy(idx, env)).collect()
}

pub fn evolve(state: &FullState, env: &EnvironmentRealization, t: f64) -> Result<FullState> {
    if env.len() != state.n_env {
        return Err(Error::DimensionMismatch {
            state: state.n_env,
            env: env.len(),
        });
    }
    evolve_with_energies(state, &basis_energies(env), t)
}

/// [`evolve`] with energies precomputed by [`basis_energies`].
pub fn evolve_with_energies(state: &FullState, energies: &[f64], t: f64) -> Result<FullState> {
    if energies.len() != state.amplitudes.len() {
        return Err(Error::DimensionMismatch {
            state: state.n_env,
            env: energies.len().trailing_zeros().saturating_sub(1) as usize,
        });
    }
    let amplitudes = state
        .amplitudes
        .iter()
        .zip(energies)
        .map(|(&amp, &e)| amp * Complex64::from_polar(1.0, -e * t))
        .collect();
    Ok(FullState {
        amplitudes,
        n_env: state.n_env,
        system: state.system,
    })
}

/// `⟨E⇓(t)|E⇑(t)⟩` from the two unnormalized branches divided by `a·b*`.
pub fn branch_overlap(state: &FullState) -> Result<Complex64> {
    let (a, b) = (state.system.a(), state.system.b());
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return Err(Error::VanishingBranch);
    }
    let raw: Complex64 = state
        .branch(1)
        .iter()
        .zip(state.branch(0))
        .map(|(down, up)| down.conj() * up)
        .sum();
    Ok(raw / (a * b.conj()))
}

/// Partial trace over the environment: `ρ_S[s][s'] = Σ_e ψ(s,e) ψ(s',e)*`.
pub fn reduced_system_matrix(state: &FullState) -> [[Complex64; 2]; 2] {
    let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (s, row) in rho.iter_mut().enumerate() {
        for (s2, cell) in row.iter_mut().enumerate() {
            *cell = state
                .branch(s)
                .iter()
                .zip(state.branch(s2))
                .map(|(x, y)| x * y.conj())
                .sum();
        }
    }
    rho
}

/// `⟨ψ| O_S ⊗ I_E |ψ⟩` summed over every amplitude.
pub fn oracle_expectation(state: &FullState, obs: &ObservableSpec) -> Complex64 {
    let m = obs.matrix();
    let dim = 1usize << state.n_env;
    let psi = &state.amplitudes;
    let mut total = Complex64::new(0.0, 0.0);
    for e in 0..dim {
        for (s, row) in m.iter().enumerate() {
            for (s2, o) in row.iter().enumerate() {
                total += psi[s * dim + e].conj() * o * psi[s2 * dim + e];
            }
        }
    }
    total
}

/// `Tr(ρ O)` for a 2×2 density matrix.
pub fn trace_product(rho: &[[Complex64; 2]; 2], obs: &ObservableSpec) -> Complex64 {
    let m = obs.matrix();
    (0..2).flat_map(|s| (0..2).map(move |s2| (s, s2))).map(|(s, s2)| rho[s][s2] * m[s2][s]).sum()
}

pub fn is_normalized(state: &FullState) -> bool {
    (state.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EnvironmentParticle;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn half() -> SystemCoefficients {
        SystemCoefficients::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)).unwrap()
    }

    fn env_with_phases(n: usize) -> EnvironmentRealization {
        let ps = (0..n)
            .map(|i| {
                let x = i as f64 + 1.0;
                EnvironmentParticle::with_phases((0.37 * x) % 1.0, 0.2 + 0.31 * x, 0.7 * x, -1.3 * x).unwrap()
            })
            .collect();
        EnvironmentRealization::new(ps).unwrap()
    }

    #[test]
    fn product_basis_state() {
        let sys = SystemCoefficients::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let env = EnvironmentRealization::from_pairs(&[(1.0, 0.4), (1.0, 0.9), (1.0, 1.5)]).unwrap();
        let st = build_initial(&sys, &env).unwrap();
        assert_eq!(st.amplitudes()[0], c(1.0, 0.0));
        assert!(st.amplitudes()[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn two_term_superposition() {
        let env = EnvironmentRealization::from_pairs(&[(1.0, 0.4)]).unwrap();
        let st = build_initial(&half(), &env).unwrap();
        let amps = st.amplitudes();
        assert_eq!(amps.len(), 4);
        assert!((amps[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((amps[2] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert_eq!(amps[1].norm() + amps[3].norm(), 0.0);
    }

    #[test]
    fn generic_initial_is_normalized() {
        let st = build_initial(&half(), &env_with_phases(3)).unwrap();
        assert!(is_normalized(&st));
    }

    #[test]
    fn limit_enforced() {
        let env = EnvironmentRealization::homogeneous(&[0.5; 20], 1.0).unwrap();
        assert_eq!(
            build_initial(&half(), &env),
            Err(Error::OracleLimit { n: 20, limit: 14 })
        );
    }

    #[test]
    fn evolve_identity_and_phase() {
        let env = env_with_phases(4);
        let st = build_initial(&half(), &env).unwrap();
        assert_eq!(evolve(&st, &env, 0.0).unwrap(), st);

        let sys = SystemCoefficients::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let one = EnvironmentRealization::from_pairs(&[(1.0, 2.0)]).unwrap();
        let t = 0.9;
        let st = evolve(&build_initial(&sys, &one).unwrap(), &one, t).unwrap();
        assert!((st.amplitudes()[0] - Complex64::from_polar(1.0, -2.0 * t / 2.0)).norm() < 1e-15);

        let other = env_with_phases(3);
        assert!(matches!(evolve(&build_initial(&half(), &env).unwrap(), &other, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unitarity() {
        let env = env_with_phases(7);
        let st = build_initial(&half(), &env).unwrap();
        for k in 0..20 {
            let ev = evolve(&st, &env, 0.37 * k as f64).unwrap();
            assert!((ev.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    // Rebuild the up branch as a tensor product of single-particle rotated states.
    fn factored_up_branch(sys: &SystemCoefficients, env: &EnvironmentRealization, t: f64) -> Vec<Complex64> {
        let mut v = vec![sys.a()];
        for p in env.particles() {
            let up = p.alpha() * Complex64::from_polar(1.0, -p.g() * t / 2.0);
            let down = p.beta() * Complex64::from_polar(1.0, p.g() * t / 2.0);
            v = v.iter().flat_map(|x| [x * up, x * down]).collect();
        }
        v
    }

    #[test]
    fn up_branch_is_tensor_product() {
        for n in 1..=8 {
            let env = env_with_phases(n);
            let sys = SystemCoefficients::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
            let t = 1.1 + n as f64 * 0.3;
            let st = evolve(&build_initial(&sys, &env).unwrap(), &env, t).unwrap();
            let factored = factored_up_branch(&sys, &env, t);
            for (x, y) in st.branch(0).iter().zip(&factored) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn time_reversal_of_branches() {
        let env = env_with_phases(6);
        let st = build_initial(&half(), &env).unwrap();
        let t = 2.3;
        let fwd = evolve(&st, &env, t).unwrap();
        let back = evolve(&st, &env, -t).unwrap();
        for (up, down) in fwd.branch(0).iter().zip(back.branch(1)) {
            assert!((up - down).norm() < 1e-12);
        }
    }

    #[test]
    fn overlap_examples() {
        let env = env_with_phases(5);
        let st = build_initial(&half(), &env).unwrap();
        assert!((branch_overlap(&st).unwrap() - c(1.0, 0.0)).norm() < 1e-12);

        let one = EnvironmentRealization::from_pairs(&[(0.5, 1.0)]).unwrap();
        let st = evolve(&build_initial(&half(), &one).unwrap(), &one, PI / 2.0).unwrap();
        assert!(branch_overlap(&st).unwrap().norm() < 1e-15);

        let up = SystemCoefficients::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(branch_overlap(&build_initial(&up, &one).unwrap()), Err(Error::VanishingBranch));
    }

    #[test]
    fn reduced_matrix_examples() {
        let env = env_with_phases(4);
        let up = SystemCoefficients::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let rho = reduced_system_matrix(&build_initial(&up, &env).unwrap());
        assert!((rho[0][0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(rho[0][1].norm() + rho[1][0].norm() + rho[1][1].norm() < 1e-12);

        let rho = reduced_system_matrix(&build_initial(&half(), &env).unwrap());
        for row in rho {
            for x in row {
                assert!((x - c(0.5, 0.0)).norm() < 1e-12);
            }
        }

        let st = evolve(&build_initial(&half(), &env).unwrap(), &env, 1.4).unwrap();
        let rho = reduced_system_matrix(&st);
        assert!((rho[0][0] + rho[1][1] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((rho[0][1] - rho[1][0].conj()).norm() < 1e-12);
    }

    #[test]
    fn expectation_examples() {
        let env = env_with_phases(4);
        let st = evolve(&build_initial(&half(), &env).unwrap(), &env, 0.8).unwrap();
        assert!((oracle_expectation(&st, &ObservableSpec::identity()) - c(1.0, 0.0)).norm() < 1e-12);

        let up = SystemCoefficients::new(c(0.0, 1.0), c(0.0, 0.0)).unwrap();
        let obs = ObservableSpec::hermitian(0.25, c(0.3, -0.2), 4.0);
        let st = evolve(&build_initial(&up, &env).unwrap(), &env, 2.0).unwrap();
        assert!((oracle_expectation(&st, &obs) - c(0.25, 0.0)).norm() < 1e-12);
        assert!((trace_product(&reduced_system_matrix(&st), &obs) - c(0.25, 0.0)).norm() < 1e-12);
    }
}
