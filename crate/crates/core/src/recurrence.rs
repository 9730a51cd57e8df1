//! Exact recurrence-time analysis of `|r(t)|²` for rational couplings.
//!
//! Factor `i` returns to its initial value whenever `gᵢ t ∈ πℤ`, so with
//! `gᵢ = pᵢ/qᵢ` in lowest terms the first common recurrence is
//! `t_P = π · lcm(qᵢ) / gcd(pᵢ)`. The product `Q = ∏ qᵢ` is reported next to
//! it: `πQ` is always a recurrence time but is generally far from the first.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default denominator ceiling used when rationalizing floating-point couplings.
pub const DEFAULT_MAX_DENOMINATOR: u64 = 1_000_000;

/// A positive coupling `g = p/q` held in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalCoupling {
    p: BigUint,
    q: BigUint,
}

impl RationalCoupling {
    pub fn new(p: BigUint, q: BigUint) -> Result<Self> {
        if p.is_zero() || q.is_zero() {
            return Err(Error::InvalidArgument(format!("coupling {p}/{q} must have p, q >= 1")));
        }
        let d = p.gcd(&q);
        Ok(Self { p: p / &d, q: q / &d })
    }

    pub fn from_u64(p: u64, q: u64) -> Result<Self> {
        Self::new(BigUint::from(p), BigUint::from(q))
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn as_ratio(&self) -> Ratio<BigUint> {
        Ratio::new_raw(self.p.clone(), self.q.clone())
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.as_ratio())
    }
}

impl fmt::Display for RationalCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

/// Which of the three coupling regimes a set falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseLabel {
    /// All couplings equal.
    EqualCouplings,
    /// Every coupling is an integer multiple of the smallest one.
    IntegerMultiples,
    GenericRational,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseLabel::EqualCouplings => "equal-couplings",
            CaseLabel::IntegerMultiples => "integer-multiples",
            CaseLabel::GenericRational => "generic-rational",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceReport {
    pub case_label: CaseLabel,
    /// First recurrence time divided by π.
    pub exact_time_over_pi: Ratio<BigUint>,
    /// `Q = ∏ qᵢ`.
    pub product_bound_over_pi: BigUint,
    /// `t_Pi / π = qᵢ / pᵢ`.
    pub per_particle_times: Vec<Ratio<BigUint>>,
}

impl RecurrenceReport {
    pub fn exact_time(&self) -> f64 {
        std::f64::consts::PI * ratio_to_f64(&self.exact_time_over_pi)
    }

    pub fn log10_exact_time_over_pi(&self) -> f64 {
        log10_biguint(self.exact_time_over_pi.numer()) - log10_biguint(self.exact_time_over_pi.denom())
    }

    pub fn log10_product_bound(&self) -> f64 {
        log10_biguint(&self.product_bound_over_pi)
    }

    /// `nᵢ = t_P / t_Pi`; `None` if some quotient is not an integer.
    pub fn witnesses(&self) -> Option<Vec<BigUint>> {
        self.per_particle_times
            .iter()
            .map(|tp| {
                let n = &self.exact_time_over_pi / tp;
                n.is_integer().then(|| n.to_integer())
            })
            .collect()
    }
}

/// `t_Pi / π = q / p`.
pub fn per_particle_recurrence(g: &RationalCoupling) -> Ratio<BigUint> {
    Ratio::new_raw(g.q.clone(), g.p.clone())
}

pub fn classify_case(couplings: &[RationalCoupling]) -> Result<CaseLabel> {
    let first = couplings.first().ok_or(Error::EmptyCouplings)?;
    if couplings.iter().all(|g| g == first) {
        return Ok(CaseLabel::EqualCouplings);
    }
    // g_i / g_min = (p_i q_min) / (q_i p_min)
    let min = couplings
        .iter()
        .min_by(|x, y| (&x.p * &y.q).cmp(&(&y.p * &x.q)))
        .expect("non-empty");
    let all_multiples = couplings
        .iter()
        .all(|g| (&g.p * &min.q).is_multiple_of(&(&g.q * &min.p)));
    Ok(if all_multiples {
        CaseLabel::IntegerMultiples
    } else {
        CaseLabel::GenericRational
    })
}

pub fn exact_recurrence(couplings: &[RationalCoupling]) -> Result<RecurrenceReport> {
    let case_label = classify_case(couplings)?;
    let mut lcm_q = BigUint::one();
    let mut gcd_p = BigUint::zero();
    let mut bound = BigUint::one();
    for g in couplings {
        lcm_q = lcm_q.lcm(&g.q);
        gcd_p = gcd_p.gcd(&g.p);
        bound *= &g.q;
    }
    Ok(RecurrenceReport {
        case_label,
        exact_time_over_pi: Ratio::new(lcm_q, gcd_p),
        product_bound_over_pi: bound,
        per_particle_times: couplings.iter().map(per_particle_recurrence).collect(),
    })
}

/// Best rational approximation `p/q` of `g` with `q ≤ max_denominator`.
///
/// Works on the exact binary value of `g`, walking continued-fraction
/// convergents and picking the closer of the last convergent and the best
/// semiconvergent.
pub fn rationalize(g: f64, max_denominator: u64) -> Result<RationalCoupling> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::NonPositiveCoupling(g));
    }
    if max_denominator == 0 {
        return Err(Error::InvalidArgument("max_denominator must be >= 1".into()));
    }
    let exact = Ratio::<BigInt>::from_float(g).expect("finite");
    let target = Ratio::new(
        exact.numer().to_biguint().expect("positive"),
        exact.denom().to_biguint().expect("positive"),
    );
    let max_q = BigUint::from(max_denominator);
    if target.denom() <= &max_q {
        return RationalCoupling::new(target.numer().clone(), target.denom().clone());
    }

    let (mut p0, mut q0, mut p1, mut q1) = (BigUint::zero(), BigUint::one(), BigUint::one(), BigUint::zero());
    let (mut n, mut d) = (target.numer().clone(), target.denom().clone());
    loop {
        let a = &n / &d;
        let q2 = &q0 + &a * &q1;
        if q2 > max_q {
            break;
        }
        let p2 = &p0 + &a * &p1;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        let rem = &n - &a * &d;
        n = std::mem::replace(&mut d, rem);
    }
    let k = (&max_q - &q0) / &q1;
    let semi = Ratio::new(&p0 + &k * &p1, &q0 + &k * &q1);
    let conv = Ratio::new(p1, q1);
    let dist = |x: &Ratio<BigUint>| -> Ratio<BigInt> {
        let xi = Ratio::new(BigInt::from(x.numer().clone()), BigInt::from(x.denom().clone()));
        (xi - &exact).abs()
    };
    let best = if dist(&conv) <= dist(&semi) { conv } else { semi };
    if best.numer().is_zero() {
        return Err(Error::InvalidArgument(format!(
            "g = {g} rounds to zero with denominators <= {max_denominator}"
        )));
    }
    RationalCoupling::new(best.numer().clone(), best.denom().clone())
}

/// Rationalize every coupling of a realization.
pub fn rationalize_all(couplings: impl IntoIterator<Item = f64>, max_denominator: u64) -> Result<Vec<RationalCoupling>> {
    couplings
        .into_iter()
        .map(|g| rationalize(g, max_denominator))
        .collect()
}

/// Number of draws averaged by [`bound_growth_estimate`].
pub const GROWTH_DRAWS: usize = 100;

/// `ln ∏ qᵢ` for `draws` independent sets of `n_particles` couplings.
pub fn bound_growth_samples_with<F>(n_particles: usize, draws: usize, seed: u64, mut draw: F) -> Result<Vec<f64>>
where
    F: FnMut(&mut ChaCha20Rng) -> RationalCoupling,
{
    if n_particles == 0 || draws == 0 {
        return Err(Error::InvalidArgument("n_particles and draws must be >= 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok((0..draws)
        .map(|_| {
            let set: Vec<RationalCoupling> = (0..n_particles).map(|_| draw(&mut rng)).collect();
            let report = exact_recurrence(&set).expect("non-empty");
            log10_biguint(&report.product_bound_over_pi) * std::f64::consts::LN_10
        })
        .collect())
}

/// Couplings `p/q` with `p, q` uniform on `1..=ceiling`, reduced.
pub fn uniform_rational(rng: &mut ChaCha20Rng, ceiling: u64) -> RationalCoupling {
    let p = rng.random_range(1..=ceiling);
    let q = rng.random_range(1..=ceiling);
    RationalCoupling::from_u64(p, q).expect("p, q >= 1")
}

/// Mean of `ln Q` over [`GROWTH_DRAWS`] seeded random coupling sets.
pub fn bound_growth_estimate(denominator_ceiling: u64, n_particles: usize, seed: u64) -> Result<f64> {
    if denominator_ceiling < 2 {
        return Err(Error::InvalidArgument("denominator ceiling must be >= 2".into()));
    }
    let samples = bound_growth_samples_with(n_particles, GROWTH_DRAWS, seed, |rng| {
        uniform_rational(rng, denominator_ceiling)
    })?;
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

pub fn log10_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().expect("fits").log10();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().expect("fits");
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

fn ratio_to_f64(r: &Ratio<BigUint>) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => 10f64.powf(log10_biguint(r.numer()) - log10_biguint(r.denom())),
    }
}
