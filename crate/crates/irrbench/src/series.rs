//! Canonical representations for multichannel sampled series and labeled
//! datasets.
//!
//! A [`SampledSeries`] couples a strictly increasing timestamp vector with an
//! `N x d` value matrix and one label per sample. The nominal interval is
//! carried separately so that perturbed series remember the grid they came
//! from.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Opaque subject identifier, kept as a string so arbitrary CSV ids survive
/// round-trips.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubjectId(pub String);

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<&str> for SubjectId {
    fn from(s: &str) -> Self {
        SubjectId(s.to_string())
    }
}

/// A class with its dense id and the original label text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub id: usize,
    pub name: String,
}

/// One subject's contiguous recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject: SubjectId,
    pub series: SampledSeries,
}

/// A multichannel series sampled at known (possibly irregular) times.
///
/// Invariants, checked at construction:
/// - at least one sample;
/// - timestamps strictly increasing and finite;
/// - `values` has one row per timestamp;
/// - one label per sample;
/// - `nominal_interval` positive and finite;
/// - all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    timestamps: Vec<f64>,
    values: Array2<f64>,
    labels: Vec<usize>,
    nominal_interval: f64,
}

impl SampledSeries {
    pub fn new(
        timestamps: Vec<f64>,
        values: Array2<f64>,
        labels: Vec<usize>,
        nominal_interval: f64,
    ) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::Empty("series must contain at least one sample".into()));
        }
        if values.nrows() != timestamps.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} timestamps but {} value rows",
                timestamps.len(),
                values.nrows()
            )));
        }
        if labels.len() != timestamps.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} timestamps but {} labels",
                timestamps.len(),
                labels.len()
            )));
        }
        if !(nominal_interval > 0.0 && nominal_interval.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "nominal interval must be positive and finite, got {nominal_interval}"
            )));
        }
        for (i, t) in timestamps.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::NonFinite(format!("timestamp {i} is {t}")));
            }
            if i > 0 && *t <= timestamps[i - 1] {
                return Err(Error::NonMonotone(format!(
                    "timestamp {t} at index {i} follows {}",
                    timestamps[i - 1]
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("series values must be finite".into()));
        }
        Ok(SampledSeries {
            timestamps,
            values,
            labels,
            nominal_interval,
        })
    }

    /// Builds a series on the grid `t1 + i * delta_t`.
    ///
    /// Each timestamp is computed directly from the index, not by cumulative
    /// summation, so rounding error does not accumulate with `i`.
    pub fn from_regular_grid(
        t1: f64,
        delta_t: f64,
        values: Array2<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if !t1.is_finite() {
            return Err(Error::NonFinite(format!("grid origin is {t1}")));
        }
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid interval must be positive and finite, got {delta_t}"
            )));
        }
        let timestamps = (0..values.nrows()).map(|i| t1 + i as f64 * delta_t).collect();
        SampledSeries::new(timestamps, values, labels, delta_t)
    }

    /// True when every consecutive gap matches the nominal interval within
    /// `tolerance`. A single-sample series is regular by definition.
    pub fn is_regular(&self, tolerance: f64) -> bool {
        self.timestamps
            .windows(2)
            .all(|w| ((w[1] - w[0]) - self.nominal_interval).abs() <= tolerance)
    }

    pub fn num_samples(&self) -> usize {
        self.timestamps.len()
    }

    pub fn num_channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn nominal_interval(&self) -> f64 {
        self.nominal_interval
    }

    pub fn start_time(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.timestamps.last().expect("series is never empty")
    }
}

/// A labeled multi-subject dataset with a shared class and channel inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    recordings: Vec<Recording>,
    classes: Vec<ClassLabel>,
    channel_names: Vec<String>,
}

impl Dataset {
    /// Validates that all recordings share the channel count, and that every
    /// sample label indexes into `class_names`.
    pub fn new(
        recordings: Vec<Recording>,
        class_names: Vec<String>,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if recordings.is_empty() {
            return Err(Error::Empty("dataset has no recordings".into()));
        }
        if class_names.is_empty() {
            return Err(Error::Empty("dataset has no classes".into()));
        }
        let d = channel_names.len();
        for rec in &recordings {
            if rec.series.num_channels() != d {
                return Err(Error::ShapeMismatch(format!(
                    "recording for subject {} has {} channels, dataset declares {}",
                    rec.subject,
                    rec.series.num_channels(),
                    d
                )));
            }
            if let Some(&bad) = rec.series.labels().iter().find(|&&l| l >= class_names.len()) {
                return Err(Error::InvalidArgument(format!(
                    "subject {} has label id {} but only {} classes are declared",
                    rec.subject,
                    bad,
                    class_names.len()
                )));
            }
        }
        let classes = class_names
            .into_iter()
            .enumerate()
            .map(|(id, name)| ClassLabel { id, name })
            .collect();
        Ok(Dataset {
            recordings,
            classes,
            channel_names,
        })
    }

    pub fn recordings(&self) -> &[Recording] {
        &self.recordings
    }

    /// Distinct subjects in order of first appearance.
    pub fn subjects(&self) -> Vec<&SubjectId> {
        let mut seen = Vec::new();
        for rec in &self.recordings {
            if !seen.contains(&&rec.subject) {
                seen.push(&rec.subject);
            }
        }
        seen
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }
}
