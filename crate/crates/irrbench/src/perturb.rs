//! Sampling-irregularity perturbations applied to a continuous test series
//! before windowing: timestamp jitter, random dropout, and decimation.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::series::SampledSeries;

/// One irregularity operator with its magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Displace each timestamp by `U(-epsilon * dt, +epsilon * dt)` and
    /// re-sample values at the displaced times; `epsilon` is a fraction of
    /// the nominal interval.
    Jitter { epsilon: f64 },
    /// Remove `floor(alpha * n)` samples chosen uniformly without
    /// replacement.
    Dropout { alpha: f64 },
    /// Keep every `factor`-th sample, starting at the first. No anti-alias
    /// filtering.
    Downsample { factor: usize },
}

impl Perturbation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Perturbation::Jitter { epsilon } => {
                if !(epsilon >= 0.0 && epsilon.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "jitter magnitude must be non-negative and finite, got {epsilon}"
                    )));
                }
            }
            Perturbation::Dropout { alpha } => {
                if !(0.0..1.0).contains(&alpha) {
                    return Err(Error::InvalidArgument(format!(
                        "dropout fraction must lie in [0, 1), got {alpha}"
                    )));
                }
            }
            Perturbation::Downsample { factor } => {
                if factor == 0 {
                    return Err(Error::InvalidArgument(
                        "downsample factor must be at least 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, series: &SampledSeries, seed: u64) -> Result<SampledSeries> {
        match *self {
            Perturbation::Jitter { epsilon } => jitter_timestamps(series, epsilon, seed),
            Perturbation::Dropout { alpha } => random_dropout(series, alpha, seed),
            Perturbation::Downsample { factor } => downsample(series, factor),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Perturbation::Jitter { .. } => "jitter",
            Perturbation::Dropout { .. } => "dropout",
            Perturbation::Downsample { .. } => "downsample",
        }
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            Perturbation::Jitter { epsilon } => epsilon,
            Perturbation::Dropout { alpha } => alpha,
            Perturbation::Downsample { factor } => factor as f64,
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind_name(), self.magnitude())
    }
}

/// A perturbation plus the seed that makes it reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(flatten)]
    pub op: Perturbation,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn apply(&self, series: &SampledSeries) -> Result<SampledSeries> {
        self.op.apply(series, self.seed)
    }
}

/// Piecewise linear interpolation of every channel at the query times.
///
/// Queries must lie within `[start_time, end_time]`. A query that hits a knot
/// returns that sample row exactly; between knots the value is
/// `x_i + (x_{i+1} - x_i) * (t - t_i) / (t_{i+1} - t_i)`.
pub fn interpolate_at(series: &SampledSeries, query_times: &[f64]) -> Result<Array2<f64>> {
    let ts = series.timestamps();
    let values = series.values();
    let (lo, hi) = (series.start_time(), series.end_time());
    let mut out = Array2::zeros((query_times.len(), series.num_channels()));
    for (row, &q) in query_times.iter().enumerate() {
        if !q.is_finite() {
            return Err(Error::NonFinite(format!("query time is {q}")));
        }
        if q < lo || q > hi {
            return Err(Error::OutOfRange { query: q, lo, hi });
        }
        // First index whose timestamp exceeds q; q >= lo guarantees i >= 1.
        let i = ts.partition_point(|&t| t <= q);
        if i == ts.len() {
            // Only reachable when q equals the last knot.
            out.row_mut(row).assign(&values.row(i - 1));
        } else if ts[i - 1] == q {
            out.row_mut(row).assign(&values.row(i - 1));
        } else {
            let w = (q - ts[i - 1]) / (ts[i] - ts[i - 1]);
            for ch in 0..series.num_channels() {
                let a = values[[i - 1, ch]];
                let b = values[[i, ch]];
                out[[row, ch]] = a + (b - a) * w;
            }
        }
    }
    Ok(out)
}

/// Jitters each timestamp by `U(-epsilon * dt, +epsilon * dt)` where `dt` is
/// the nominal interval, clamps into the original time range, restores order,
/// and re-samples values at the displaced times by linear interpolation.
/// Labels stay attached to their sample index. `epsilon == 0` returns the
/// series unchanged.
pub fn jitter_timestamps(series: &SampledSeries, epsilon: f64, seed: u64) -> Result<SampledSeries> {
    Perturbation::Jitter { epsilon }.validate()?;
    if epsilon == 0.0 {
        return Ok(series.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = epsilon * series.nominal_interval();
    let (lo, hi) = (series.start_time(), series.end_time());
    let mut jittered: Vec<f64> = series
        .timestamps()
        .iter()
        .map(|&t| (t + rng.random_range(-bound..bound)).clamp(lo, hi))
        .collect();
    jittered.sort_by(f64::total_cmp);
    // Continuous draws collide with probability ~0; restore strictness if
    // they ever do.
    for i in 1..jittered.len() {
        if jittered[i] <= jittered[i - 1] {
            jittered[i] = jittered[i - 1].next_up();
        }
    }
    let values = interpolate_at(series, &jittered)?;
    SampledSeries::new(
        jittered,
        values,
        series.labels().to_vec(),
        series.nominal_interval(),
    )
}

/// Number of samples dropout removes from a series of length `n`.
pub fn dropout_count(n: usize, alpha: f64) -> usize {
    (alpha * n as f64).floor() as usize
}

/// Removes `floor(alpha * n)` samples at indices chosen uniformly without
/// replacement; survivors keep their original timestamps, values, and labels.
pub fn random_dropout(series: &SampledSeries, alpha: f64, seed: u64) -> Result<SampledSeries> {
    Perturbation::Dropout { alpha }.validate()?;
    let n = series.num_samples();
    let n_drop = dropout_count(n, alpha);
    if n_drop == 0 {
        return Ok(series.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dropped = vec![false; n];
    for idx in rand::seq::index::sample(&mut rng, n, n_drop) {
        dropped[idx] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !dropped[i]).collect();
    select_rows(series, &keep)
}

/// Keeps every `factor`-th sample starting at index 0 and scales the nominal
/// interval accordingly. Plain decimation: no filtering before the rate drop.
pub fn downsample(series: &SampledSeries, factor: usize) -> Result<SampledSeries> {
    Perturbation::Downsample { factor }.validate()?;
    if factor == 1 {
        return Ok(series.clone());
    }
    let keep: Vec<usize> = (0..series.num_samples()).step_by(factor).collect();
    let decimated = select_rows(series, &keep)?;
    SampledSeries::new(
        decimated.timestamps().to_vec(),
        decimated.values().clone(),
        decimated.labels().to_vec(),
        series.nominal_interval() * factor as f64,
    )
}

fn select_rows(series: &SampledSeries, keep: &[usize]) -> Result<SampledSeries> {
    let d = series.num_channels();
    let mut values = Array2::zeros((keep.len(), d));
    let mut timestamps = Vec::with_capacity(keep.len());
    let mut labels = Vec::with_capacity(keep.len());
    for (row, &i) in keep.iter().enumerate() {
        values.row_mut(row).assign(&series.values().row(i));
        timestamps.push(series.timestamps()[i]);
        labels.push(series.labels()[i]);
    }
    SampledSeries::new(timestamps, values, labels, series.nominal_interval())
}
