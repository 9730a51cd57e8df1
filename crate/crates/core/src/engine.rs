//! Decoherence factor `r(t) = ∏ᵢ (|αᵢ|² e^{−igᵢt} + |βᵢ|² e^{igᵢt})` and its
//! squared modulus `|r(t)|² = ∏ᵢ fᵢ(t)`.
//!
//! Every time point is evaluated from scratch with direct trigonometric calls,
//! so error does not accumulate along the grid and points can be evaluated in
//! any order (or concurrently) with bit-identical results.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{EnvironmentParticle, EnvironmentRealization, ObservableSpec, SystemCoefficients, TimeGrid, TimeSeries};

/// How a series is evaluated over its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Grid points in parallel. Falls back to sequential without the `parallel` feature.
    #[default]
    Parallel,
}

/// A single evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceSample {
    pub t: f64,
    pub r: Complex64,
    pub abs_r2: f64,
    /// `ln |r|²`, only when the direct product underflowed.
    pub log_abs_r2: Option<f64>,
}

fn check_alpha(alpha_sq: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha_sq) {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha_sq))
    }
}

// f(t) = |α|⁴ + |β|⁴ + 2|α|²|β|² cos 2gt, written as 1 − 4|α|²|β|² sin² gt
// so the result never exceeds 1.
#[inline]
fn f_unchecked(alpha_sq: f64, g: f64, t: f64) -> f64 {
    let s = (g * t).sin();
    let w = 4.0 * alpha_sq * (1.0 - alpha_sq);
    (1.0 - w * s * s).max(0.0)
}

// |α|² e^{−igt} + |β|² e^{igt} = cos gt + i (|β|² − |α|²) sin gt
#[inline]
fn r_unchecked(alpha_sq: f64, g: f64, t: f64) -> Complex64 {
    let (s, c) = (g * t).sin_cos();
    Complex64::new(c, (1.0 - 2.0 * alpha_sq) * s)
}

/// Single-particle factor `fᵢ(t)` of `|r(t)|²`.
pub fn factor_f(alpha_sq: f64, g: f64, t: f64) -> Result<f64> {
    check_alpha(alpha_sq)?;
    Ok(f_unchecked(alpha_sq, g, t))
}

/// Single-particle factor of the complex `r(t)`.
pub fn factor_r(alpha_sq: f64, g: f64, t: f64) -> Result<Complex64> {
    check_alpha(alpha_sq)?;
    Ok(r_unchecked(alpha_sq, g, t))
}

/// `r(t)` for a realization.
pub fn decoherence_factor(env: &EnvironmentRealization, t: f64) -> Complex64 {
    env.particles()
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, p| acc * r_unchecked(p.alpha_sq(), p.g(), t))
}

fn product_f(particles: &[EnvironmentParticle], t: f64) -> f64 {
    particles
        .iter()
        .fold(1.0, |acc, p| acc * f_unchecked(p.alpha_sq(), p.g(), t))
}

fn log_sum_f(particles: &[EnvironmentParticle], t: f64) -> f64 {
    particles
        .iter()
        .map(|p| f_unchecked(p.alpha_sq(), p.g(), t).ln())
        .sum()
}

/// `|r(t)|²` as the flat product over all particles.
pub fn abs_r2(env: &EnvironmentRealization, t: f64) -> f64 {
    product_f(env.particles(), t)
}

/// `|r(t)|²` as a product of per-kind partial products.
pub fn abs_r2_grouped(env: &EnvironmentRealization, t: f64) -> f64 {
    env.group_slices()
        .into_iter()
        .map(|slice| product_f(slice, t))
        .product()
}

/// Evaluate one point, switching to a log-sum when the direct product underflows.
pub fn sample(env: &EnvironmentRealization, t: f64) -> DecoherenceSample {
    let particles = env.particles();
    let mut prod = 1.0f64;
    let mut underflow = false;
    for p in particles {
        let f = f_unchecked(p.alpha_sq(), p.g(), t);
        if f == 0.0 {
            prod = 0.0;
            underflow = false;
            break;
        }
        prod *= f;
        if prod < f64::MIN_POSITIVE {
            underflow = true;
        }
    }
    let r = decoherence_factor(env, t);
    if underflow {
        let log = log_sum_f(particles, t);
        DecoherenceSample {
            t,
            r,
            abs_r2: log.exp(),
            log_abs_r2: Some(log),
        }
    } else {
        DecoherenceSample {
            t,
            r,
            abs_r2: prod,
            log_abs_r2: None,
        }
    }
}

/// `r(t)` and `|r(t)|²` over a grid, using the default execution mode.
pub fn abs_r2_series(env: &EnvironmentRealization, grid: &TimeGrid) -> TimeSeries {
    abs_r2_series_with(env, grid, Execution::default())
}

pub fn abs_r2_series_with(env: &EnvironmentRealization, grid: &TimeGrid, exec: Execution) -> TimeSeries {
    let samples = match exec {
        Execution::Sequential => sample_sequential(env, grid),
        Execution::Parallel => sample_parallel(env, grid),
    };
    let mut r_values = Vec::with_capacity(samples.len());
    let mut abs = Vec::with_capacity(samples.len());
    let mut underflow_log = Vec::new();
    for (k, s) in samples.into_iter().enumerate() {
        r_values.push(s.r);
        abs.push(s.abs_r2);
        if let Some(l) = s.log_abs_r2 {
            underflow_log.push((k, l));
        }
    }
    TimeSeries {
        grid: *grid,
        r_values,
        abs_r2: abs,
        underflow_log,
    }
}

fn sample_sequential(env: &EnvironmentRealization, grid: &TimeGrid) -> Vec<DecoherenceSample> {
    (0..grid.samples()).map(|k| sample(env, grid.time(k))).collect()
}

#[cfg(feature = "parallel")]
fn sample_parallel(env: &EnvironmentRealization, grid: &TimeGrid) -> Vec<DecoherenceSample> {
    use rayon::prelude::*;
    (0..grid.samples())
        .into_par_iter()
        .map(|k| sample(env, grid.time(k)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn sample_parallel(env: &EnvironmentRealization, grid: &TimeGrid) -> Vec<DecoherenceSample> {
    sample_sequential(env, grid)
}

/// `⟨O_R⟩ = Tr(ρ_S O_S)` for `O_R = O_S ⊗ I_E`, given `r(t)`.
///
/// For Hermitian observables this is the real value
/// `|a|² s_uu + |b|² s_dd + 2 Re[a b* s_du r]`. Otherwise the general
/// complex form `… + a b* r s_du + conj(a b* r) s_ud` is returned.
pub fn expectation_relevant(sys: &SystemCoefficients, obs: &ObservableSpec, r: Complex64) -> Complex64 {
    let (a, b) = (sys.a(), sys.b());
    let coherence = a * b.conj() * r;
    let populations = obs.s_uu * a.norm_sqr() + obs.s_dd * b.norm_sqr();
    if obs.is_hermitian() {
        let value = a.norm_sqr() * obs.s_uu.re + b.norm_sqr() * obs.s_dd.re + 2.0 * (coherence * obs.s_du).re;
        Complex64::new(value, 0.0)
    } else {
        populations + coherence * obs.s_du + coherence.conj() * obs.s_ud
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EnvironmentParticle;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn factor_f_examples() {
        for &(g, t) in &[(0.3, 1.7), (2.0, -4.0), (10.0, 123.0)] {
            assert_eq!(factor_f(1.0, g, t).unwrap(), 1.0);
        }
        assert_eq!(factor_f(0.5, 0.7, 0.0).unwrap(), 1.0);
        assert!(factor_f(0.5, 0.5, PI).unwrap().abs() < 1e-15);
        assert_eq!(factor_f(1.5, 1.0, 0.0), Err(Error::AlphaOutOfRange(1.5)));
    }

    #[test]
    fn factor_r_examples() {
        let (g, t) = (0.8, 2.3);
        let z = factor_r(1.0, g, t).unwrap();
        let expected = Complex64::from_polar(1.0, -g * t);
        assert!((z - expected).norm() < 1e-15);
        assert_eq!(factor_r(0.37, 1.3, 0.0).unwrap(), c(1.0, 0.0));
        assert!(factor_r(0.5, 1.0, PI / 2.0).unwrap().norm() < 1e-15);
        assert!(factor_r(-0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn factor_r_matches_exponential_form() {
        for &(a, g, t) in &[(0.2, 0.3, 1.1), (0.9, 2.4, -3.0), (0.5, 1.0, 7.7)] {
            let direct = c(0.0, -g * t).exp() * a + c(0.0, g * t).exp() * (1.0 - a);
            assert!((factor_r(a, g, t).unwrap() - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn all_up_environment_is_pure_phase() {
        let gs = [0.3, 0.5, 1.25];
        let env = EnvironmentRealization::from_pairs(&gs.map(|g| (1.0, g))).unwrap();
        let t = 1.9;
        let expected = Complex64::from_polar(1.0, -gs.iter().sum::<f64>() * t);
        assert!((decoherence_factor(&env, t) - expected).norm() < 1e-14);
        assert_eq!(decoherence_factor(&env, 0.0), c(1.0, 0.0));
    }

    #[test]
    fn single_half_particle_kills_product() {
        let g = 0.8;
        let env = EnvironmentRealization::from_pairs(&[(1.0, 0.3), (0.5, g), (1.0, 1.1)]).unwrap();
        let t_zero = PI / (2.0 * g);
        let grid = TimeGrid::new(0.0, 2.0 * t_zero, 3).unwrap();
        let series = abs_r2_series(&env, &grid);
        assert_eq!(series.abs_r2[0], 1.0);
        assert!(series.abs_r2[1] < 1e-30);
    }

    #[test]
    fn homogeneous_recurs_at_pi_over_g() {
        let alphas: Vec<f64> = (0..100).map(|i| (i as f64 * 0.618_033_988_7) % 1.0).collect();
        let env = EnvironmentRealization::homogeneous(&alphas, 0.5).unwrap();
        let grid = TimeGrid::new(0.0, 4.0 * PI, 1201).unwrap();
        let series = abs_r2_series(&env, &grid);
        let k = grid.nearest_index(2.0 * PI);
        assert_eq!(k, 600);
        assert!((series.abs_r2[k] - 1.0).abs() < 1e-9);
        assert!(series.abs_r2[300] < 1e-6);
    }

    #[test]
    fn underflow_switches_to_log_sum() {
        let env = EnvironmentRealization::homogeneous(&vec![0.5; 3000], 1.0).unwrap();
        let s = sample(&env, 0.7);
        let expected = 3000.0 * factor_f(0.5, 1.0, 0.7).unwrap().ln();
        assert_eq!(s.abs_r2, 0.0);
        let log = s.log_abs_r2.expect("log retained");
        assert!((log - expected).abs() < 1e-9 * expected.abs());

        let series = abs_r2_series(&env, &TimeGrid::new(0.0, 1.0, 5).unwrap());
        assert_eq!(series.abs_r2[0], 1.0);
        assert!(series.underflow_log.iter().all(|&(k, _)| k > 0));
        assert!(!series.underflow_log.is_empty());
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let pairs: Vec<(f64, f64)> = (0..40).map(|i| ((i as f64 * 0.37) % 1.0, 0.2 + 0.05 * i as f64)).collect();
        let env = EnvironmentRealization::from_pairs(&pairs).unwrap();
        let grid = TimeGrid::new(0.0, 50.0, 777).unwrap();
        let a = abs_r2_series_with(&env, &grid, Execution::Sequential);
        let b = abs_r2_series_with(&env, &grid, Execution::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn expectation_limits() {
        let obs = ObservableSpec::hermitian(0.7, c(0.2, 0.4), -0.3);
        let up = SystemCoefficients::new(c(0.0, 1.0), c(0.0, 0.0)).unwrap();
        let v = expectation_relevant(&up, &obs, c(0.3, 0.1));
        assert!((v - c(0.7, 0.0)).norm() < 1e-15);

        let half = SystemCoefficients::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)).unwrap();
        let v = expectation_relevant(&half, &obs, c(0.0, 0.0));
        assert!((v - c(0.2, 0.0)).norm() < 1e-15);

        // σ_x with r = 1 gives ⟨σ_x⟩ = 2 Re(a b*) = 1
        let v = expectation_relevant(&half, &ObservableSpec::sigma_x(), c(1.0, 0.0));
        assert!((v.re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_uses_general_form() {
        let sys = SystemCoefficients::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let obs = ObservableSpec::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let r = c(0.5, 0.5);
        // only ρ_{↓↑} s_ud survives: conj(a b* r) = conj(0.6 * -0.8i * r)
        let expected = (c(0.6, 0.0) * c(0.0, -0.8) * r).conj();
        assert!((expectation_relevant(&sys, &obs, r) - expected).norm() < 1e-15);
    }

    fn env_strategy() -> impl Strategy<Value = EnvironmentRealization> {
        proptest::collection::vec((0.0f64..=1.0, 0.01f64..5.0, 0.0f64..6.3, 0.0f64..6.3), 1..40).prop_map(|v| {
            let ps = v
                .into_iter()
                .map(|(a, g, pa, pb)| EnvironmentParticle::with_phases(a, g, pa, pb).unwrap())
                .collect();
            EnvironmentRealization::new(ps).unwrap()
        })
    }

    proptest! {
        #[test]
        fn complex_and_real_products_agree(env in env_strategy(), t in -50.0f64..50.0) {
            let r = decoherence_factor(&env, t);
            let f = abs_r2(&env, t);
            prop_assert!((r.norm_sqr() - f).abs() < 1e-10);
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn time_reversal_symmetry(env in env_strategy(), t in 0.0f64..50.0) {
            prop_assert!((abs_r2(&env, t) - abs_r2(&env, -t)).abs() < 1e-12);
        }

        #[test]
        fn factor_periodicity(a in 0.0f64..=1.0, g in 0.05f64..5.0, t in 0.0f64..20.0) {
            let f0 = factor_f(a, g, t).unwrap();
            let f1 = factor_f(a, g, t + PI / g).unwrap();
            prop_assert!((f0 - f1).abs() < 1e-12);
            let lo = (2.0 * a - 1.0).powi(2);
            prop_assert!(f0 >= lo - 1e-12 && f0 <= 1.0);
            let r = factor_r(a, g, t).unwrap();
            prop_assert!((r.norm_sqr() - f0).abs() < 1e-12);
        }

        #[test]
        fn grouped_matches_flat(counts in proptest::collection::vec(1usize..30, 1..5), t in 0.0f64..30.0) {
            use crate::model::GroupBoundary;
            let n: usize = counts.iter().sum();
            let ps: Vec<_> = (0..n)
                .map(|i| EnvironmentParticle::new((i as f64 * 0.713) % 1.0, 0.3 + (i % 7) as f64 * 0.4).unwrap())
                .collect();
            let groups = counts.iter().enumerate().map(|(i, &c)| GroupBoundary { label: format!("g{i}"), count: c }).collect();
            let env = EnvironmentRealization::with_groups(ps, groups).unwrap();
            prop_assert!((abs_r2(&env, t) - abs_r2_grouped(&env, t)).abs() < 1e-12);
        }

        #[test]
        fn phases_do_not_matter(env in env_strategy(), t in 0.0f64..30.0) {
            let zeroed = env.with_particle_phases(&vec![(0.0, 0.0); env.len()]).unwrap();
            prop_assert_eq!(abs_r2(&env, t), abs_r2(&zeroed, t));
        }

        #[test]
        fn hermitian_expectation_is_real_part_of_general(
            theta in 0.0f64..1.5, phi in 0.0f64..6.3, re in -1.0f64..1.0, im in -1.0f64..1.0,
            uu in -2.0f64..2.0, dd in -2.0f64..2.0, ore in -2.0f64..2.0, oim in -2.0f64..2.0,
        ) {
            let sys = SystemCoefficients::new(c(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), phi)).unwrap();
            let obs = ObservableSpec::hermitian(uu, c(ore, oim), dd);
            let r = c(re, im);
            let v = expectation_relevant(&sys, &obs, r);
            let (a, b) = (sys.a(), sys.b());
            let coherence = a * b.conj() * r;
            let general = obs.s_uu * a.norm_sqr() + obs.s_dd * b.norm_sqr() + coherence * obs.s_du + coherence.conj() * obs.s_ud;
            prop_assert!((v - general).norm() < 1e-12);
        }
    }
}
