//! Domain types for the spin-bath model.
//!
//! A central spin-1/2 with amplitudes `a`, `b` couples to `N` environmental
//! spins, each with populations `|α|²`, `|β|² = 1 − |α|²` and a coupling `g`.
//! Every type validates its invariants on construction and is immutable
//! afterwards.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for every normalization check.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Amplitudes `a`, `b` of the central spin in the `{⇑, ⇓}` basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemCoefficients {
    a: Complex64,
    b: Complex64,
}

impl SystemCoefficients {
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Normalization(norm));
        }
        Ok(Self { a, b })
    }

    /// The equal superposition `(|⇑⟩ + |⇓⟩)/√2`.
    pub fn equal_superposition() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            a: Complex64::new(h, 0.0),
            b: Complex64::new(h, 0.0),
        }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }
}

impl Default for SystemCoefficients {
    fn default() -> Self {
        Self::equal_superposition()
    }
}

/// One environmental spin: `|α|²`, coupling `g`, and the phases of `α` and `β`.
///
/// Only `|α|²` is stored; `|β|²` is always derived. Phases never enter
/// `|r(t)|²` and exist so the full-state oracle can exercise them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentParticle {
    alpha_sq: f64,
    g: f64,
    phase_alpha: f64,
    phase_beta: f64,
}

impl EnvironmentParticle {
    pub fn new(alpha_sq: f64, g: f64) -> Result<Self> {
        Self::with_phases(alpha_sq, g, 0.0, 0.0)
    }

    pub fn with_phases(alpha_sq: f64, g: f64, phase_alpha: f64, phase_beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha_sq) {
            return Err(Error::AlphaOutOfRange(alpha_sq));
        }
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::NonPositiveCoupling(g));
        }
        if !(phase_alpha.is_finite() && phase_beta.is_finite()) {
            return Err(Error::InvalidArgument("particle phases must be finite".into()));
        }
        Ok(Self {
            alpha_sq,
            g,
            phase_alpha,
            phase_beta,
        })
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha_sq
    }

    pub fn beta_sq(&self) -> f64 {
        derive_beta_sq(self)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn phase_alpha(&self) -> f64 {
        self.phase_alpha
    }

    pub fn phase_beta(&self) -> f64 {
        self.phase_beta
    }

    /// Complex amplitude `α = √|α|² · e^{iφ_α}`.
    pub fn alpha(&self) -> Complex64 {
        Complex64::from_polar(self.alpha_sq.sqrt(), self.phase_alpha)
    }

    /// Complex amplitude `β = √(1 − |α|²) · e^{iφ_β}`.
    pub fn beta(&self) -> Complex64 {
        Complex64::from_polar(self.beta_sq().sqrt(), self.phase_beta)
    }
}

/// `|β|² = 1 − |α|²`.
pub fn derive_beta_sq(p: &EnvironmentParticle) -> f64 {
    1.0 - p.alpha_sq
}

/// A contiguous run of particles of one kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupBoundary {
    pub label: String,
    pub count: usize,
}

/// The concrete list of environmental spins, optionally partitioned into kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentRealization {
    particles: Vec<EnvironmentParticle>,
    groups: Option<Vec<GroupBoundary>>,
}

impl EnvironmentRealization {
    pub fn new(particles: Vec<EnvironmentParticle>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::EmptyEnvironment);
        }
        Ok(Self {
            particles,
            groups: None,
        })
    }

    pub fn with_groups(particles: Vec<EnvironmentParticle>, groups: Vec<GroupBoundary>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::EmptyEnvironment);
        }
        let total: usize = groups.iter().map(|g| g.count).sum();
        if total != particles.len() || groups.iter().any(|g| g.count == 0) {
            return Err(Error::GroupPartition {
                groups: total,
                particles: particles.len(),
            });
        }
        Ok(Self {
            particles,
            groups: Some(groups),
        })
    }

    /// Homogeneous environment: the same `g` for every `|α|²` given.
    pub fn homogeneous(alpha_sq: &[f64], g: f64) -> Result<Self> {
        let particles = alpha_sq
            .iter()
            .map(|&a| EnvironmentParticle::new(a, g))
            .collect::<Result<Vec<_>>>()?;
        Self::new(particles)
    }

    /// Pairs `(|α|², g)` without group structure.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let particles = pairs
            .iter()
            .map(|&(a, g)| EnvironmentParticle::new(a, g))
            .collect::<Result<Vec<_>>>()?;
        Self::new(particles)
    }

    pub fn particles(&self) -> &[EnvironmentParticle] {
        &self.particles
    }

    pub fn groups(&self) -> Option<&[GroupBoundary]> {
        self.groups.as_deref()
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn couplings(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|p| p.g)
    }

    /// Particle slices per group, in order. Ungrouped environments form one slice.
    pub fn group_slices(&self) -> Vec<&[EnvironmentParticle]> {
        match &self.groups {
            None => vec![&self.particles[..]],
            Some(groups) => {
                let mut out = Vec::with_capacity(groups.len());
                let mut start = 0;
                for g in groups {
                    out.push(&self.particles[start..start + g.count]);
                    start += g.count;
                }
                out
            }
        }
    }

    /// Same particles with phases replaced.
    pub fn with_particle_phases(&self, phases: &[(f64, f64)]) -> Result<Self> {
        if phases.len() != self.particles.len() {
            return Err(Error::DimensionMismatch {
                state: phases.len(),
                env: self.particles.len(),
            });
        }
        let particles = self
            .particles
            .iter()
            .zip(phases)
            .map(|(p, &(pa, pb))| EnvironmentParticle::with_phases(p.alpha_sq, p.g, pa, pb))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            particles,
            groups: self.groups.clone(),
        })
    }
}

/// Coefficients `s_{ss'}` of a system observable `O_S = Σ s_{ss'} |s⟩⟨s'|`.
///
/// The environment part of a relevant observable is always the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub s_uu: Complex64,
    pub s_ud: Complex64,
    pub s_du: Complex64,
    pub s_dd: Complex64,
}

impl ObservableSpec {
    pub fn new(s_uu: Complex64, s_ud: Complex64, s_du: Complex64, s_dd: Complex64) -> Self {
        Self { s_uu, s_ud, s_du, s_dd }
    }

    /// Real symmetric observable `[[uu, off], [off, dd]]`.
    pub fn hermitian(uu: f64, off: Complex64, dd: f64) -> Self {
        Self {
            s_uu: Complex64::new(uu, 0.0),
            s_ud: off.conj(),
            s_du: off,
            s_dd: Complex64::new(dd, 0.0),
        }
    }

    pub fn identity() -> Self {
        Self::hermitian(1.0, Complex64::new(0.0, 0.0), 1.0)
    }

    /// `σ_x`: unit off-diagonal coupling between `⇑` and `⇓`.
    pub fn sigma_x() -> Self {
        Self::hermitian(0.0, Complex64::new(1.0, 0.0), 0.0)
    }

    pub fn is_hermitian(&self) -> bool {
        let tol = NORM_TOLERANCE;
        self.s_uu.im.abs() <= tol
            && self.s_dd.im.abs() <= tol
            && (self.s_ud - self.s_du.conj()).norm() <= tol
    }

    /// Row-major 2×2 matrix `[[uu, ud], [du, dd]]`.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.s_uu, self.s_ud], [self.s_du, self.s_dd]]
    }
}

impl Default for ObservableSpec {
    fn default() -> Self {
        Self::sigma_x()
    }
}

/// Uniform sampling grid on `[t_start, t_end]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, samples: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if t_start < 0.0 {
            return Err(Error::InvalidGrid(format!("t_start = {t_start} must be >= 0")));
        }
        if t_end <= t_start {
            return Err(Error::InvalidGrid(format!(
                "t_end = {t_end} must exceed t_start = {t_start}"
            )));
        }
        if samples < 2 {
            return Err(Error::InvalidGrid(format!("samples = {samples} must be >= 2")));
        }
        Ok(Self {
            t_start,
            t_end,
            samples,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn spacing(&self) -> f64 {
        (self.t_end - self.t_start) / (self.samples - 1) as f64
    }

    /// Time of sample `k`; the last sample is exactly `t_end`.
    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.samples {
            self.t_end
        } else {
            self.t_start + k as f64 * self.spacing()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples).map(move |k| self.time(k))
    }

    /// Index of the sample closest to `t` (clamped to the grid).
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = ((t - self.t_start) / self.spacing()).round();
        k.clamp(0.0, (self.samples - 1) as f64) as usize
    }
}

/// Sampled `r(t)` and `|r(t)|²` over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub grid: TimeGrid,
    pub r_values: Vec<Complex64>,
    pub abs_r2: Vec<f64>,
    /// `(index, ln |r|²)` for samples whose direct product underflowed.
    pub underflow_log: Vec<(usize, f64)>,
}

impl TimeSeries {
    /// A series built from precomputed `|r|²` values only (`r` set to `√|r|²`).
    pub fn from_abs_r2(grid: TimeGrid, abs_r2: Vec<f64>) -> Result<Self> {
        if abs_r2.len() != grid.samples() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} samples",
                abs_r2.len(),
                grid.samples()
            )));
        }
        let r_values = abs_r2.iter().map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0)).collect();
        Ok(Self {
            grid,
            r_values,
            abs_r2,
            underflow_log: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.abs_r2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abs_r2.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.times()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.times().zip(self.abs_r2.iter().copied())
    }
}
