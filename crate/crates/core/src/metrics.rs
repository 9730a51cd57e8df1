//! Post-processing of `|r(t)|²` series: decoherence time, peaks, tail statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TimeSeries;

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_SUSTAIN: f64 = 1.0;
pub const DEFAULT_PEAK_FLOOR: f64 = 0.5;
pub const DEFAULT_TAIL_START: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub decoherence_time: Option<f64>,
    pub threshold: f64,
    pub sustain_window: f64,
    pub peak_floor: f64,
    pub peaks: Vec<Peak>,
    pub tail_start: f64,
    pub long_time_mean: f64,
    pub long_time_max: f64,
}

/// Earliest grid time `t*` with `|r|² ≤ ε` on every sample of `[t*, t* + sustain]`.
///
/// The whole window must lie inside the grid.
pub fn estimate_decoherence_time(series: &TimeSeries, epsilon: f64, sustain: f64) -> Result<Option<f64>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let dt = series.grid.spacing();
    if !(sustain.is_finite() && sustain >= dt * (1.0 - 1e-9)) {
        return Err(Error::InvalidArgument(format!(
            "sustain = {sustain} must be at least the grid spacing {dt}"
        )));
    }
    // half a step of slack so a window spanning exactly `sustain` is accepted
    let slack = 0.5 * dt;
    let mut run_start: Option<f64> = None;
    for (t, v) in series.points() {
        if v <= epsilon {
            let start = *run_start.get_or_insert(t);
            if t - start >= sustain - slack {
                return Ok(Some(start));
            }
        } else {
            run_start = None;
        }
    }
    Ok(None)
}

/// Interior 3-point local maxima (`v[k−1] < v[k] ≥ v[k+1]`) with value ≥ `floor`.
pub fn detect_peaks(series: &TimeSeries, floor: f64) -> Result<Vec<Peak>> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::InvalidArgument(format!("peak floor = {floor} must lie in (0, 1)")));
    }
    let v = &series.abs_r2;
    Ok((1..v.len().saturating_sub(1))
        .filter(|&k| v[k] >= floor && v[k - 1] < v[k] && v[k] >= v[k + 1])
        .map(|k| Peak {
            t: series.grid.time(k),
            value: v[k],
        })
        .collect())
}

/// Mean and maximum of `|r|²` over samples with `t ≥ tail_start`.
pub fn tail_statistics(series: &TimeSeries, tail_start: f64) -> Result<(f64, f64)> {
    let (sum, max, count) = series
        .points()
        .filter(|&(t, _)| t >= tail_start)
        .fold((0.0, f64::NEG_INFINITY, 0usize), |(s, m, c), (_, v)| (s + v, m.max(v), c + 1));
    if count == 0 {
        return Err(Error::InvalidArgument(format!(
            "tail window starting at {tail_start} holds no samples"
        )));
    }
    Ok((sum / count as f64, max))
}

pub fn metrics_report(
    series: &TimeSeries,
    epsilon: f64,
    sustain: f64,
    peak_floor: f64,
    tail_start: f64,
) -> Result<MetricsReport> {
    let (long_time_mean, long_time_max) = tail_statistics(series, tail_start)?;
    Ok(MetricsReport {
        decoherence_time: estimate_decoherence_time(series, epsilon, sustain)?,
        threshold: epsilon,
        sustain_window: sustain,
        peak_floor,
        peaks: detect_peaks(series, peak_floor)?,
        tail_start,
        long_time_mean,
        long_time_max,
    })
}
