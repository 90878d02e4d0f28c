//! Dataset ingestion: CSV loading, timestamp synthesis, and a synthetic
//! activity-style generator for self-contained experiments.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::{Dataset, Recording, SampledSeries, SubjectId};

/// Column layout of a dataset CSV.
///
/// When `timestamp_column` is `None`, timestamps are synthesized on the
/// nominal grid `i / sample_rate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub subject_column: String,
    #[serde(default)]
    pub timestamp_column: Option<String>,
    pub label_column: String,
    pub channel_columns: Vec<String>,
}

impl CsvSchema {
    /// Derives a schema from a header row: `subject` and `label` are required,
    /// `timestamp` is picked up when present, every other column is a channel.
    pub fn from_header(header: &[String]) -> Result<CsvSchema> {
        for required in ["subject", "label"] {
            if !header.iter().any(|h| h == required) {
                return Err(Error::MissingColumn(required.into()));
            }
        }
        let timestamp_column = header
            .iter()
            .find(|h| h.as_str() == "timestamp")
            .map(|h| h.clone());
        let channel_columns: Vec<String> = header
            .iter()
            .filter(|h| !matches!(h.as_str(), "subject" | "timestamp" | "label"))
            .cloned()
            .collect();
        let schema = CsvSchema {
            subject_column: "subject".into(),
            timestamp_column,
            label_column: "label".into(),
            channel_columns,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_columns.is_empty() {
            return Err(Error::Empty("schema declares no channel columns".into()));
        }
        let mut names: Vec<&String> = self.channel_columns.iter().collect();
        names.push(&self.subject_column);
        names.push(&self.label_column);
        if let Some(ts) = &self.timestamp_column {
            names.push(ts);
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::InvalidArgument(
                "schema column names must be distinct".into(),
            ));
        }
        Ok(())
    }
}

/// Nominal grid `i / rate` for `n` samples starting at zero.
pub fn generate_timestamps(n: usize, rate: f64) -> Result<Vec<f64>> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample rate must be positive and finite, got {rate}"
        )));
    }
    Ok((0..n).map(|i| i as f64 / rate).collect())
}

/// Orders raw label strings for id assignment: numerically when every label
/// parses as an unsigned integer, lexicographically otherwise.
fn order_labels(mut labels: Vec<String>) -> Vec<String> {
    let numeric: Option<Vec<u64>> = labels.iter().map(|l| l.parse::<u64>().ok()).collect();
    match numeric {
        Some(mut keyed) => {
            let mut pairs: Vec<(u64, String)> = keyed.drain(..).zip(labels).collect();
            pairs.sort();
            pairs.into_iter().map(|(_, l)| l).collect()
        }
        None => {
            labels.sort();
            labels
        }
    }
}

/// Loads a labeled dataset from CSV.
///
/// Rows are grouped into recordings by consecutive runs of the subject
/// column. Explicit timestamps must be strictly increasing within each
/// recording; without a timestamp column the nominal grid is synthesized.
/// Class ids are assigned by sorting the distinct label strings (numeric
/// order when all labels are unsigned integers).
pub fn load_csv(path: &Path, schema: &CsvSchema, sample_rate: f64) -> Result<Dataset> {
    schema.validate()?;
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample rate must be positive and finite, got {sample_rate}"
        )));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let column = |name: &String| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))
    };
    let subject_idx = column(&schema.subject_column)?;
    let label_idx = column(&schema.label_column)?;
    let timestamp_idx = match &schema.timestamp_column {
        Some(name) => Some(column(name)?),
        None => None,
    };
    let channel_idx: Vec<usize> = schema
        .channel_columns
        .iter()
        .map(column)
        .collect::<Result<_>>()?;

    struct RawRecording {
        subject: String,
        timestamps: Vec<f64>,
        values: Vec<f64>,
        labels: Vec<String>,
    }
    let mut raw: Vec<RawRecording> = Vec::new();
    for (row_num, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or_else(|| {
                Error::Format(format!("row {} is missing column {}", row_num + 2, idx))
            })
        };
        let parse_f64 = |idx: usize| -> Result<f64> {
            let s = cell(idx)?;
            s.trim().parse::<f64>().map_err(|_| {
                Error::Format(format!(
                    "row {}: expected a number in column {}, got {s:?}",
                    row_num + 2,
                    header.get(idx).unwrap_or("?")
                ))
            })
        };
        let subject = cell(subject_idx)?.to_string();
        if raw.last().map(|r| r.subject.as_str()) != Some(subject.as_str()) {
            raw.push(RawRecording {
                subject: subject.clone(),
                timestamps: Vec::new(),
                values: Vec::new(),
                labels: Vec::new(),
            });
        }
        let current = raw.last_mut().expect("just pushed");
        if let Some(idx) = timestamp_idx {
            current.timestamps.push(parse_f64(idx)?);
        }
        let label = cell(label_idx)?.trim();
        if label.is_empty() {
            return Err(Error::Format(format!("row {}: empty label", row_num + 2)));
        }
        current.labels.push(label.to_string());
        for &idx in &channel_idx {
            current.values.push(parse_f64(idx)?);
        }
    }
    if raw.is_empty() {
        return Err(Error::Empty(format!("no data rows in {}", path.display())));
    }

    let mut distinct: Vec<String> = raw
        .iter()
        .flat_map(|r| r.labels.iter().cloned())
        .collect();
    distinct.sort();
    distinct.dedup();
    let class_names = order_labels(distinct);
    let class_id = |name: &str| -> usize {
        class_names
            .iter()
            .position(|c| c == name)
            .expect("label came from the same rows")
    };

    let d = schema.channel_columns.len();
    let mut recordings = Vec::with_capacity(raw.len());
    for r in raw {
        let n = r.labels.len();
        let values = Array2::from_shape_vec((n, d), r.values)
            .expect("one row of values pushed per label");
        let labels: Vec<usize> = r.labels.iter().map(|l| class_id(l)).collect();
        let series = if timestamp_idx.is_some() {
            SampledSeries::new(r.timestamps, values, labels, 1.0 / sample_rate)
        } else {
            SampledSeries::new(
                generate_timestamps(n, sample_rate)?,
                values,
                labels,
                1.0 / sample_rate,
            )
        }
        .map_err(|e| match e {
            Error::NonMonotone(msg) => {
                Error::NonMonotone(format!("subject {}: {msg}", r.subject))
            }
            other => other,
        })?;
        recordings.push(Recording {
            subject: SubjectId(r.subject),
            series,
        });
    }
    Dataset::new(recordings, class_names, schema.channel_columns.clone())
}

/// Writes a dataset in the same layout `load_csv` reads: `subject`,
/// `timestamp`, `label`, then one column per channel. Floats use the shortest
/// representation that round-trips.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "subject,timestamp,label")?;
    for name in dataset.channel_names() {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for rec in dataset.recordings() {
        let series = &rec.series;
        for i in 0..series.num_samples() {
            write!(
                out,
                "{},{},{}",
                rec.subject,
                series.timestamps()[i],
                dataset.classes()[series.labels()[i]].name
            )?;
            for ch in 0..series.num_channels() {
                write!(out, ",{}", series.values()[[i, ch]])?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parameters for the synthetic multi-subject generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_subjects: usize,
    pub num_classes: usize,
    pub num_channels: usize,
    pub sample_rate: f64,
    pub segment_seconds: f64,
    pub segments_per_subject: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_subjects: 5,
            num_classes: 4,
            num_channels: 3,
            sample_rate: 50.0,
            segment_seconds: 10.0,
            segments_per_subject: 4,
            noise_std: 0.05,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_subjects == 0 || self.num_classes == 0 || self.num_channels == 0 {
            return Err(Error::InvalidArgument(
                "subjects, classes, and channels must all be at least 1".into(),
            ));
        }
        if self.segments_per_subject < self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "{} segments per subject cannot cover {} classes",
                self.segments_per_subject, self.num_classes
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive and finite, got {}",
                self.sample_rate
            )));
        }
        if !(self.segment_seconds > 0.0 && self.segment_seconds.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "segment length must be positive and finite, got {}",
                self.segment_seconds
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be non-negative and finite, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }

    /// Samples per segment on the nominal grid.
    pub fn segment_samples(&self) -> usize {
        (self.segment_seconds * self.sample_rate).round().max(1.0) as usize
    }
}

/// Class `c` oscillates at `1 + c` Hz; frequencies stay distinct per class.
fn class_frequency(c: usize) -> f64 {
    1.0 + c as f64
}

/// Class `c` has base amplitude `1 + 0.5 c`; subject modulation stays inside
/// +-10% so amplitude ranges of neighboring classes never overlap.
fn class_amplitude(c: usize) -> f64 {
    1.0 + 0.5 * c as f64
}

/// Channel gain decays geometrically so channels are correlated but not
/// identical.
fn channel_gain(ch: usize) -> f64 {
    0.8_f64.powi(ch as i32)
}

/// Generates a deterministic labeled dataset of per-subject recordings.
///
/// Each recording is a sequence of fixed-length activity segments. A segment
/// of class `c` puts a sinusoid at the class frequency on every channel, plus
/// a small linear drift and Gaussian noise. Every class appears at least once
/// per subject. Identical configs produce byte-identical datasets.
pub fn synth_generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_std)
        .map_err(|_| Error::InvalidArgument("noise level must be finite".into()))?;
    let per_segment = config.segment_samples();
    let n = per_segment * config.segments_per_subject;
    let d = config.num_channels;
    let delta_t = 1.0 / config.sample_rate;

    let mut recordings = Vec::with_capacity(config.num_subjects);
    for s in 0..config.num_subjects {
        let modulation: f64 = rng.random_range(0.9..1.1);
        let mut class_seq: Vec<usize> = (0..config.num_classes)
            .cycle()
            .take(config.segments_per_subject)
            .collect();
        class_seq.shuffle(&mut rng);

        let mut values = Array2::zeros((n, d));
        let mut labels = vec![0usize; n];
        for (seg, &class) in class_seq.iter().enumerate() {
            let phases: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..TAU)).collect();
            let drifts: Vec<f64> = (0..d).map(|_| rng.random_range(-0.05..0.05)).collect();
            let seg_start_idx = seg * per_segment;
            let seg_start_t = seg_start_idx as f64 * delta_t;
            for i in 0..per_segment {
                let idx = seg_start_idx + i;
                let t = idx as f64 * delta_t;
                labels[idx] = class;
                for ch in 0..d {
                    let tone = class_amplitude(class)
                        * modulation
                        * channel_gain(ch)
                        * (TAU * class_frequency(class) * t + phases[ch]).sin();
                    let drift = drifts[ch] * (t - seg_start_t);
                    values[[idx, ch]] = tone + drift + noise.sample(&mut rng);
                }
            }
        }
        recordings.push(Recording {
            subject: SubjectId(format!("s{s}")),
            series: SampledSeries::from_regular_grid(0.0, delta_t, values, labels)?,
        });
    }
    let class_names = (0..config.num_classes).map(|c| format!("class{c}")).collect();
    let channel_names = (0..d).map(|ch| format!("ch{ch}")).collect();
    Dataset::new(recordings, class_names, channel_names)
}
