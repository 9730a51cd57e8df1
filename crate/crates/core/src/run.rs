//! Run pipeline behind the command-line subcommands: simulation, recurrence
//! reports, parameter sweeps and oracle comparison, each writing its
//! artifacts into the configured output directory.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::{to_document, ConfigDocument, ConfigError, RunConfig};
use crate::engine::{self, Execution};
use crate::metrics::{self, MetricsReport};
use crate::model::{EnvironmentRealization, ObservableSpec, TimeSeries};
use crate::oracle;
use crate::recurrence::{self, CaseLabel, RecurrenceReport};
use crate::sampling::{self, CouplingDistribution, CouplingKind, EnvironmentSpec, ALPHA_DISTRIBUTION, GENERATOR};

/// Oracle comparisons fail above this deviation.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Model(#[from] crate::Error),

    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("oracle deviation {deviation:e} exceeds {tolerance:e}")]
    OracleDeviation { deviation: f64, tolerance: f64 },
}

impl RunError {
    /// Process exit status: 1 validation, 2 I/O, 3 oracle deviation.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Model(_) => 1,
            RunError::Io { .. } => 2,
            RunError::OracleDeviation { .. } => 3,
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

fn write_file(path: &Path, contents: &str) -> RunResult<()> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> RunResult<()> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("report types always serialize")
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with header `t,re_r,im_r,abs_r2`, one row per grid sample.
pub fn series_csv(series: &TimeSeries) -> String {
    let mut out = String::with_capacity(series.len() * 96);
    out.push_str("t,re_r,im_r,abs_r2\n");
    for ((t, r), v) in series.times().zip(&series.r_values).zip(&series.abs_r2) {
        let _ = writeln!(out, "{},{},{},{}", fmt_f64(t), fmt_f64(r.re), fmt_f64(r.im), fmt_f64(*v));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct Metadata<'a> {
    command: &'a str,
    library_version: &'a str,
    generator: &'a str,
    alpha_distribution: &'a str,
    seed: String,
    preset: String,
    overrides: &'a [String],
    config: ConfigDocument,
}

fn metadata_toml(command: &str, config: &RunConfig, overrides: &[String]) -> String {
    to_toml(&Metadata {
        command,
        library_version: env!("CARGO_PKG_VERSION"),
        generator: GENERATOR,
        alpha_distribution: ALPHA_DISTRIBUTION,
        seed: config.spec.seed.to_string(),
        preset: config.preset.clone().unwrap_or_else(|| "none".into()),
        overrides,
        config: to_document(config),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatedPeak {
    pub t: f64,
    pub value: f64,
    /// Within one grid step of a multiple of the exact recurrence time.
    pub is_recurrence: bool,
}

/// Everything written to `metrics.toml`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoherence_time: Option<f64>,
    pub epsilon: f64,
    pub sustain: f64,
    pub peak_floor: f64,
    pub tail_start: f64,
    pub long_time_mean: f64,
    pub long_time_max: f64,
    pub grid_spacing: f64,
    pub recurrence_case: String,
    pub recurrence_time_over_pi: String,
    pub recurrence_time: f64,
    pub peaks: Vec<AnnotatedPeak>,
}

impl MetricsSummary {
    pub fn recurrence_peaks(&self) -> impl Iterator<Item = &AnnotatedPeak> {
        self.peaks.iter().filter(|p| p.is_recurrence)
    }

    pub fn other_peaks(&self) -> impl Iterator<Item = &AnnotatedPeak> {
        self.peaks.iter().filter(|p| !p.is_recurrence)
    }
}

fn summarize(series: &TimeSeries, report: &MetricsReport, recurrence: &RecurrenceReport) -> MetricsSummary {
    let dt = series.grid.spacing();
    let tp = recurrence.exact_time();
    let peaks = report
        .peaks
        .iter()
        .map(|p| {
            let k = (p.t / tp).round();
            AnnotatedPeak {
                t: p.t,
                value: p.value,
                is_recurrence: tp.is_finite() && k >= 1.0 && (p.t - k * tp).abs() <= dt,
            }
        })
        .collect();
    MetricsSummary {
        decoherence_time: report.decoherence_time,
        epsilon: report.threshold,
        sustain: report.sustain_window,
        peak_floor: report.peak_floor,
        tail_start: report.tail_start,
        long_time_mean: report.long_time_mean,
        long_time_max: report.long_time_max,
        grid_spacing: dt,
        recurrence_case: recurrence.case_label.to_string(),
        recurrence_time_over_pi: recurrence.exact_time_over_pi.to_string(),
        recurrence_time: tp,
        peaks,
    }
}

pub fn recurrence_for(env: &EnvironmentRealization, max_denominator: u64) -> RunResult<RecurrenceReport> {
    let couplings = recurrence::rationalize_all(env.couplings(), max_denominator)?;
    Ok(recurrence::exact_recurrence(&couplings)?)
}

/// Result of a simulation run, also written to disk by [`run_simulate`].
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub environment: EnvironmentRealization,
    pub series: TimeSeries,
    pub metrics: MetricsSummary,
    pub expectation: Option<Vec<Complex64>>,
}

/// Simulate without touching the filesystem.
pub fn simulate(config: &RunConfig) -> RunResult<SimulationOutcome> {
    let environment = sampling::sample_environment(&config.spec)?;
    let series = engine::abs_r2_series_with(&environment, &config.grid, Execution::Parallel);
    let m = &config.metrics;
    let report = metrics::metrics_report(&series, m.epsilon, m.sustain, m.peak_floor, m.tail_start)?;
    let recurrence = recurrence_for(&environment, config.max_denominator)?;
    let summary = summarize(&series, &report, &recurrence);
    let expectation = config.observable.map(|obs| {
        series
            .r_values
            .iter()
            .map(|&r| engine::expectation_relevant(&config.system, &obs, r))
            .collect()
    });
    Ok(SimulationOutcome {
        environment,
        series,
        metrics: summary,
        expectation,
    })
}

/// Simulate and write `series.csv`, `metrics.toml`, `metadata.toml`
/// (and `expectation.csv` when an observable is configured).
pub fn run_simulate(config: &RunConfig, overrides: &[String]) -> RunResult<SimulationOutcome> {
    let outcome = simulate(config)?;
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    write_file(&dir.join("series.csv"), &series_csv(&outcome.series))?;
    write_file(&dir.join("metrics.toml"), &to_toml(&outcome.metrics))?;
    write_file(&dir.join("metadata.toml"), &metadata_toml("simulate", config, overrides))?;
    if let Some(values) = &outcome.expectation {
        let mut csv = String::from("t,re_expectation,im_expectation\n");
        for (t, v) in outcome.series.times().zip(values) {
            let _ = writeln!(csv, "{},{},{}", fmt_f64(t), fmt_f64(v.re), fmt_f64(v.im));
        }
        write_file(&dir.join("expectation.csv"), &csv)?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
struct RecurrenceDoc {
    case: String,
    max_denominator: u64,
    exact_time_over_pi: String,
    exact_time: f64,
    log10_exact_time_over_pi: f64,
    product_bound_over_pi: String,
    log10_product_bound: f64,
    min_denominator: String,
    couplings: Vec<String>,
    per_particle_times_over_pi: Vec<String>,
}

pub fn recurrence_toml(report: &RecurrenceReport, couplings: &[recurrence::RationalCoupling], max_denominator: u64) -> String {
    let min_q = couplings.iter().map(|c| c.q()).min().map(|q| q.to_string()).unwrap_or_default();
    to_toml(&RecurrenceDoc {
        case: report.case_label.to_string(),
        max_denominator,
        exact_time_over_pi: report.exact_time_over_pi.to_string(),
        exact_time: report.exact_time(),
        log10_exact_time_over_pi: report.log10_exact_time_over_pi(),
        product_bound_over_pi: report.product_bound_over_pi.to_string(),
        log10_product_bound: report.log10_product_bound(),
        min_denominator: min_q,
        couplings: couplings.iter().map(|c| c.to_string()).collect(),
        per_particle_times_over_pi: report.per_particle_times.iter().map(|t| t.to_string()).collect(),
    })
}

/// Rationalize the sampled couplings and write `recurrence.toml`.
pub fn run_poincare(config: &RunConfig, max_denominator: u64, overrides: &[String]) -> RunResult<RecurrenceReport> {
    let env = sampling::sample_environment(&config.spec)?;
    let couplings = recurrence::rationalize_all(env.couplings(), max_denominator)?;
    let report = recurrence::exact_recurrence(&couplings)?;
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    write_file(&dir.join("recurrence.toml"), &recurrence_toml(&report, &couplings, max_denominator))?;
    write_file(&dir.join("metadata.toml"), &metadata_toml("poincare", config, overrides))?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    N,
    HalfWidth,
    Seed,
}

impl std::str::FromStr for SweepKey {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N" | "n" => Ok(SweepKey::N),
            "half_width" | "half-width" => Ok(SweepKey::HalfWidth),
            "seed" => Ok(SweepKey::Seed),
            other => Err(ConfigError::Validation(format!(
                "invalid sweep key `{other}` (expected N, half_width or seed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub decoherence_time: Option<f64>,
    pub tail_max: f64,
    pub peak_count: usize,
    pub recurrence_peak: bool,
    pub case: CaseLabel,
    /// Exact `t_P/π` when it is short enough to print.
    pub exact_time_over_pi: Option<String>,
    pub log10_exact_time_over_pi: f64,
    pub log10_product_bound: f64,
}

fn apply_sweep(base: &EnvironmentSpec, key: SweepKey, value: &str) -> RunResult<EnvironmentSpec> {
    let bad = |what: &str| ConfigError::Validation(format!("sweep value `{value}` is not a valid {what}"));
    let mut spec = base.clone();
    match key {
        SweepKey::N => {
            if spec.groups.len() != 1 {
                return Err(ConfigError::Validation("an N sweep needs a single-group environment".into()).into());
            }
            spec.groups[0].count = value.parse().map_err(|_| bad("particle count"))?;
        }
        SweepKey::HalfWidth => {
            let hw: f64 = value.parse().map_err(|_| bad("half width"))?;
            for g in &mut spec.groups {
                g.coupling = if hw == 0.0 {
                    CouplingDistribution::fixed(g.coupling.mean)
                } else {
                    CouplingDistribution {
                        kind: CouplingKind::UniformInterval,
                        mean: g.coupling.mean,
                        half_width: hw,
                    }
                };
            }
        }
        SweepKey::Seed => spec.seed = value.parse().map_err(|_| bad("seed"))?,
    }
    spec.validate()?;
    Ok(spec)
}

/// One summary row per value; does not write anything.
pub fn sweep(config: &RunConfig, key: SweepKey, values: &[String]) -> RunResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(ConfigError::Validation("sweep needs at least one value".into()).into());
    }
    values
        .iter()
        .map(|value| {
            let spec = apply_sweep(&config.spec, key, value)?;
            let outcome = simulate(&RunConfig {
                spec,
                ..config.clone()
            })?;
            let recurrence = recurrence_for(&outcome.environment, config.max_denominator)?;
            let exact = recurrence.exact_time_over_pi.to_string();
            let recurrence_peak = outcome.metrics.recurrence_peaks().next().is_some();
            Ok(SweepRow {
                value: value.clone(),
                decoherence_time: outcome.metrics.decoherence_time,
                tail_max: outcome.metrics.long_time_max,
                peak_count: outcome.metrics.peaks.len(),
                recurrence_peak,
                case: recurrence.case_label,
                exact_time_over_pi: (exact.len() <= 40).then_some(exact),
                log10_exact_time_over_pi: recurrence.log10_exact_time_over_pi(),
                log10_product_bound: recurrence.log10_product_bound(),
            })
        })
        .collect()
}

pub fn sweep_csv(key: SweepKey, rows: &[SweepRow]) -> String {
    let name = match key {
        SweepKey::N => "n",
        SweepKey::HalfWidth => "half_width",
        SweepKey::Seed => "seed",
    };
    let mut out = format!(
        "{name},decoherence_time,tail_max,peak_count,recurrence_peak,case,exact_time_over_pi,log10_exact_time_over_pi,log10_product_bound\n"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.value,
            r.decoherence_time.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.tail_max),
            r.peak_count,
            r.recurrence_peak,
            r.case,
            r.exact_time_over_pi.clone().unwrap_or_default(),
            fmt_f64(r.log10_exact_time_over_pi),
            fmt_f64(r.log10_product_bound),
        );
    }
    out
}

/// Sweep and write `sweep.csv` plus `metadata.toml`.
pub fn run_sweep(config: &RunConfig, key: SweepKey, values: &[String], overrides: &[String]) -> RunResult<Vec<SweepRow>> {
    let rows = sweep(config, key, values)?;
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    write_file(&dir.join("sweep.csv"), &sweep_csv(key, &rows))?;
    write_file(&dir.join("metadata.toml"), &metadata_toml("sweep", config, overrides))?;
    Ok(rows)
}

/// Maximum deviations between the product formulas and the full-state oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub n_env: usize,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_dev_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_dev_abs_r2: Option<f64>,
    pub max_dev_expectation: f64,
    pub max_norm_drift: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl OracleComparison {
    pub fn max_deviation(&self) -> f64 {
        [self.max_dev_r, self.max_dev_abs_r2, Some(self.max_dev_expectation)]
            .into_iter()
            .flatten()
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= self.tolerance
    }
}

/// Compare engine and oracle at the given times.
pub fn compare_with_oracle(
    env: &EnvironmentRealization,
    system: &crate::SystemCoefficients,
    observable: &ObservableSpec,
    times: impl IntoIterator<Item = f64>,
) -> RunResult<OracleComparison> {
    let initial = oracle::build_initial(system, env)?;
    let energies = oracle::basis_energies(env);
    let degenerate = system.a().norm() == 0.0 || system.b().norm() == 0.0;
    let (mut dev_r, mut dev_abs, mut dev_exp, mut drift) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut samples = 0;
    for t in times {
        samples += 1;
        let state = oracle::evolve_with_energies(&initial, &energies, t)?;
        drift = drift.max((state.norm_sqr() - 1.0).abs());
        let r_engine = engine::decoherence_factor(env, t);
        if !degenerate {
            let r_oracle = oracle::branch_overlap(&state)?;
            dev_r = dev_r.max((r_oracle - r_engine).norm());
            dev_abs = dev_abs.max((r_oracle.norm_sqr() - engine::abs_r2(env, t)).abs());
        }
        let e_oracle = oracle::oracle_expectation(&state, observable);
        let e_engine = engine::expectation_relevant(system, observable, r_engine);
        dev_exp = dev_exp.max((e_oracle - e_engine).norm());
    }
    Ok(OracleComparison {
        n_env: env.len(),
        samples,
        max_dev_r: (!degenerate).then_some(dev_r),
        max_dev_abs_r2: (!degenerate).then_some(dev_abs),
        max_dev_expectation: dev_exp,
        max_norm_drift: drift,
        tolerance: ORACLE_TOLERANCE,
        note: degenerate.then(|| {
            "system amplitude a or b is zero: branch overlap r(t) is undefined, r and |r|^2 comparisons skipped".to_string()
        }),
    })
}

/// Compare over the configured grid and write `oracle.toml`; errors with
/// [`RunError::OracleDeviation`] after writing when the tolerance is exceeded.
pub fn run_oracle(config: &RunConfig, overrides: &[String]) -> RunResult<OracleComparison> {
    let env = sampling::sample_environment(&config.spec)?;
    let observable = config.observable.unwrap_or_default();
    let comparison = compare_with_oracle(&env, &config.system, &observable, config.grid.times())?;
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    write_file(&dir.join("oracle.toml"), &to_toml(&comparison))?;
    write_file(&dir.join("metadata.toml"), &metadata_toml("oracle", config, overrides))?;
    if !comparison.passed() {
        return Err(RunError::OracleDeviation {
            deviation: comparison.max_deviation(),
            tolerance: comparison.tolerance,
        });
    }
    Ok(comparison)
}

/// Human-readable listing of the built-in presets.
pub fn presets_listing() -> String {
    let mut out = String::new();
    for name in sampling::PRESET_NAMES {
        let p = sampling::preset(name).expect("built-in preset");
        let _ = writeln!(out, "{name}: {} (N = {}, seed = {})", p.caption, p.spec.total_particles(), p.spec.seed);
    }
    out
}
