//! Leave-one-subject-out evaluation: fold construction, the training loop,
//! the (train rate x architecture x perturbation) sweep, and aggregation of
//! per-fold scores into summary statistics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ingest::{load_csv, synth_generate, CsvSchema, SynthConfig};
use crate::metrics::{macro_f1, performance_loss, ConfusionMatrix};
use crate::models::{Architecture, Model, ModelConfig};
use crate::perturb::{downsample, Perturbation};
use crate::series::{Dataset, SubjectId};
use crate::windowing::{pad_to_length, sliding_windows, Window};

/// One cross-validation fold: the held-out subject and index lists into the
/// dataset's recordings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub test_subject: SubjectId,
    pub train_recordings: Vec<usize>,
    pub test_recordings: Vec<usize>,
}

/// One fold per distinct subject, in order of first appearance. Every
/// recording of the held-out subject goes to the test side.
pub fn loso_folds(dataset: &Dataset) -> Result<Vec<Fold>> {
    let subjects: Vec<SubjectId> = dataset.subjects().into_iter().cloned().collect();
    if subjects.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    Ok(subjects
        .into_iter()
        .map(|subject| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..dataset.recordings().len())
                .partition(|&i| dataset.recordings()[i].subject == subject);
            Fold {
                test_subject: subject,
                train_recordings: train,
                test_recordings: test,
            }
        })
        .collect())
}

/// Splits off a seeded random fraction of windows for validation. Both sides
/// keep their original relative order.
pub fn split_validation(
    windows: Vec<Window>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Window>, Vec<Window>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let n = windows.len();
    let n_val = (fraction * n as f64).floor() as usize;
    if n_val == 0 {
        return Ok((windows, Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let mut is_val = vec![false; n];
    for &i in &indices[..n_val] {
        is_val[i] = true;
    }
    let mut train = Vec::with_capacity(n - n_val);
    let mut val = Vec::with_capacity(n_val);
    for (i, w) in windows.into_iter().enumerate() {
        if is_val[i] {
            val.push(w);
        } else {
            train.push(w);
        }
    }
    Ok((train, val))
}

/// Training-loop hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.05,
            momentum: 0.9,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Pads a window to the model's fixed length when the architecture needs it.
fn prepared<'w>(model: &Model, window: &'w Window) -> Result<std::borrow::Cow<'w, Window>> {
    if model.config().architecture.fixed_length() {
        Ok(std::borrow::Cow::Owned(pad_to_length(
            window,
            model.config().window_len,
        )?))
    } else {
        Ok(std::borrow::Cow::Borrowed(window))
    }
}

/// Scores every window and tallies a confusion matrix. Never mutates the
/// model.
pub fn evaluate(model: &Model, windows: &[Window]) -> Result<ConfusionMatrix> {
    if windows.is_empty() {
        return Err(Error::Empty("no windows to evaluate".into()));
    }
    let mut cm = ConfusionMatrix::new(model.config().num_classes)?;
    for w in windows {
        let input = prepared(model, w)?;
        cm.record(w.label(), model.predict(&input)?)?;
    }
    Ok(cm)
}

/// Mini-batch SGD with shuffled epochs. Keeps the parameter snapshot with
/// the best validation macro F1 (ties keep the earlier snapshot); with no
/// validation windows the final parameters win. `epochs == 0` returns the
/// model unchanged. Deterministic given the seed and window order.
pub fn train(
    mut model: Model,
    train_windows: &[Window],
    val_windows: &[Window],
    config: &TrainConfig,
    seed: u64,
) -> Result<Model> {
    config.validate()?;
    if train_windows.is_empty() {
        return Err(Error::Empty("no training windows".into()));
    }
    if config.epochs == 0 {
        return Ok(model);
    }
    let padded: Vec<Window> = train_windows
        .iter()
        .map(|w| prepared(&model, w).map(|c| c.into_owned()))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Model)> = None;
    for _ in 0..config.epochs {
        let mut order: Vec<usize> = (0..padded.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Window> = chunk.iter().map(|&i| &padded[i]).collect();
            model.batch_loss_backward(&batch)?;
            model
                .params_mut()
                .sgd_step(config.learning_rate, config.momentum)?;
        }
        if !val_windows.is_empty() {
            let score = macro_f1(&evaluate(&model, val_windows)?);
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, model.clone()));
            }
        }
    }
    Ok(match best {
        Some((_, snapshot)) => snapshot,
        None => model,
    })
}

/// Where the sweep's dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synth {
        #[serde(default)]
        config: SynthConfig,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: Option<CsvSchema>,
        sample_rate: f64,
    },
}

impl DataSource {
    /// Loads the dataset and reports its base sample rate.
    pub fn load(&self) -> Result<(Dataset, f64)> {
        match self {
            DataSource::Synth { config } => {
                Ok((synth_generate(config)?, config.sample_rate))
            }
            DataSource::Csv {
                path,
                schema,
                sample_rate,
            } => {
                let schema = match schema {
                    Some(s) => s.clone(),
                    None => {
                        let mut reader = csv::Reader::from_path(path)?;
                        let header: Vec<String> =
                            reader.headers()?.iter().map(|h| h.to_string()).collect();
                        CsvSchema::from_header(&header)?
                    }
                };
                Ok((load_csv(path, &schema, *sample_rate)?, *sample_rate))
            }
        }
    }
}

fn default_jitter_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn default_dropout_grid() -> Vec<f64> {
    vec![0.1, 0.2, 0.4, 0.6, 0.8]
}

fn default_rates() -> Vec<f64> {
    vec![50.0]
}

fn default_rep_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_window_seconds() -> f64 {
    2.0
}

fn default_step_seconds() -> f64 {
    1.0
}

fn default_hidden_size() -> usize {
    32
}

/// Full description of one sweep: data, model grid, perturbation grids, and
/// training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub data: DataSource,
    pub architectures: Vec<Architecture>,
    #[serde(default = "default_rates")]
    pub train_rates_hz: Vec<f64>,
    #[serde(default = "default_jitter_grid")]
    pub jitter_epsilons: Vec<f64>,
    #[serde(default = "default_dropout_grid")]
    pub dropout_alphas: Vec<f64>,
    #[serde(default = "default_window_seconds")]
    pub window_seconds: f64,
    #[serde(default = "default_step_seconds")]
    pub step_seconds: f64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_hidden_size")]
    pub hidden_size: usize,
    #[serde(default = "default_rep_seeds")]
    pub rep_seeds: Vec<u64>,
    #[serde(default)]
    pub base_seed: u64,
}

impl ExperimentSpec {
    /// Test-side perturbation cells, jitter grid first.
    pub fn cells(&self) -> Vec<Perturbation> {
        let mut cells = Vec::new();
        for &epsilon in &self.jitter_epsilons {
            cells.push(Perturbation::Jitter { epsilon });
        }
        for &alpha in &self.dropout_alphas {
            cells.push(Perturbation::Dropout { alpha });
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.architectures.is_empty() {
            return Err(Error::Empty("no architectures in spec".into()));
        }
        if self.train_rates_hz.is_empty() {
            return Err(Error::Empty("no training sample rates in spec".into()));
        }
        if self.rep_seeds.is_empty() {
            return Err(Error::Empty("no repetition seeds in spec".into()));
        }
        if self.cells().is_empty() {
            return Err(Error::Empty("no perturbation cells in spec".into()));
        }
        for cell in self.cells() {
            cell.validate()?;
        }
        for &rate in &self.train_rates_hz {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "training sample rate must be positive and finite, got {rate}"
                )));
            }
        }
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "window length must be positive and finite, got {}",
                self.window_seconds
            )));
        }
        if !(self.step_seconds > 0.0 && self.step_seconds.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step must be positive and finite, got {}",
                self.step_seconds
            )));
        }
        if self.hidden_size == 0 {
            return Err(Error::InvalidArgument("hidden size must be at least 1".into()));
        }
        self.train.validate()
    }
}

/// One scored cell of the sweep. Baseline rows carry `perturbation =
/// "regular"`, magnitude 0, and a loss of exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rep_seed: u64,
    pub train_rate_hz: f64,
    pub architecture: Architecture,
    pub fold: String,
    pub perturbation: String,
    pub magnitude: f64,
    pub p_regular: f64,
    pub p_irregular: f64,
    pub p_loss: f64,
}

/// Stable seed derivation: chains every component through a SplitMix64
/// finalizer so distinct (base, parts) tuples land on unrelated streams.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mut h = splitmix64(base);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

struct JobKey {
    rep_idx: usize,
    rate_idx: usize,
    fold_idx: usize,
    arch_idx: usize,
}

fn job_error(fold: &SubjectId, cell: &str, source: Error) -> Error {
    Error::Sweep {
        fold: fold.to_string(),
        cell: cell.to_string(),
        source: Box::new(source),
    }
}

/// Integral decimation factor taking `base_rate` down to `rate`.
fn decimation_factor(base_rate: f64, rate: f64) -> Result<usize> {
    if rate > base_rate + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "training rate {rate} Hz exceeds the dataset rate {base_rate} Hz"
        )));
    }
    let ratio = base_rate / rate;
    let factor = ratio.round();
    if (ratio - factor).abs() > 1e-9 * factor {
        return Err(Error::InvalidArgument(format!(
            "training rate {rate} Hz does not evenly divide the dataset rate {base_rate} Hz"
        )));
    }
    Ok(factor as usize)
}

fn downsample_dataset(dataset: &Dataset, factor: usize) -> Result<Dataset> {
    if factor == 1 {
        return Ok(dataset.clone());
    }
    let recordings = dataset
        .recordings()
        .iter()
        .map(|rec| {
            Ok(crate::series::Recording {
                subject: rec.subject.clone(),
                series: downsample(&rec.series, factor)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        recordings,
        dataset.classes().iter().map(|c| c.name.clone()).collect(),
        dataset.channel_names().to_vec(),
    )
}

/// Runs the full grid: for every repetition seed, training rate, LOSO fold,
/// and architecture, trains on regular windows, scores the regular baseline,
/// then scores every perturbation cell on the perturbed test series. Jobs
/// run in parallel with seeds derived per job, so the row order and every
/// score are independent of scheduling.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let (dataset, base_rate) = spec.data.load()?;
    run_sweep_on(&dataset, base_rate, spec)
}

/// Sweep over an already loaded dataset; `base_rate` is its native rate.
pub fn run_sweep_on(
    dataset: &Dataset,
    base_rate: f64,
    spec: &ExperimentSpec,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let folds = loso_folds(dataset)?;
    let mut by_rate = Vec::with_capacity(spec.train_rates_hz.len());
    for &rate in &spec.train_rates_hz {
        let factor = decimation_factor(base_rate, rate)?;
        by_rate.push(downsample_dataset(dataset, factor)?);
    }
    let cells = spec.cells();

    let mut jobs = Vec::new();
    for rep_idx in 0..spec.rep_seeds.len() {
        for rate_idx in 0..spec.train_rates_hz.len() {
            for fold_idx in 0..folds.len() {
                for arch_idx in 0..spec.architectures.len() {
                    jobs.push(JobKey {
                        rep_idx,
                        rate_idx,
                        fold_idx,
                        arch_idx,
                    });
                }
            }
        }
    }

    let results: Vec<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|key| run_job(spec, &by_rate[key.rate_idx], &folds[key.fold_idx], &cells, key))
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

fn run_job(
    spec: &ExperimentSpec,
    dataset: &Dataset,
    fold: &Fold,
    cells: &[Perturbation],
    key: &JobKey,
) -> Result<Vec<SweepRow>> {
    let rep_seed = spec.rep_seeds[key.rep_idx];
    let rate = spec.train_rates_hz[key.rate_idx];
    let arch = spec.architectures[key.arch_idx];
    let subject = &fold.test_subject;
    let job_seed = derive_seed(
        spec.base_seed,
        &[
            rep_seed,
            key.rate_idx as u64,
            key.fold_idx as u64,
            key.arch_idx as u64,
        ],
    );

    let mut train_windows = Vec::new();
    for &i in &fold.train_recordings {
        let rec = &dataset.recordings()[i];
        train_windows.extend(
            sliding_windows(&rec.series, &rec.subject, spec.window_seconds, spec.step_seconds)
                .map_err(|e| job_error(subject, "regular", e))?,
        );
    }
    let (train_set, val_set) =
        split_validation(train_windows, spec.train.validation_fraction, derive_seed(job_seed, &[1]))
            .map_err(|e| job_error(subject, "regular", e))?;

    let window_len = (spec.window_seconds * rate).round() as usize;
    let config = ModelConfig {
        architecture: arch,
        input_channels: dataset.num_channels(),
        num_classes: dataset.num_classes(),
        window_len,
        hidden_size: spec.hidden_size,
        seed: derive_seed(job_seed, &[2]),
    };
    let model = Model::new(config).map_err(|e| job_error(subject, "regular", e))?;
    let model = train(model, &train_set, &val_set, &spec.train, derive_seed(job_seed, &[3]))
        .map_err(|e| job_error(subject, "regular", e))?;

    let mut regular_test = Vec::new();
    for &i in &fold.test_recordings {
        let rec = &dataset.recordings()[i];
        regular_test.extend(
            sliding_windows(&rec.series, &rec.subject, spec.window_seconds, spec.step_seconds)
                .map_err(|e| job_error(subject, "regular", e))?,
        );
    }
    let p_regular = macro_f1(&evaluate(&model, &regular_test).map_err(|e| job_error(subject, "regular", e))?);
    if p_regular <= 0.0 {
        return Err(job_error(
            subject,
            "regular",
            Error::InvalidArgument("baseline macro F1 is 0; relative loss undefined".into()),
        ));
    }

    let mut rows = Vec::with_capacity(cells.len() + 1);
    rows.push(SweepRow {
        rep_seed,
        train_rate_hz: rate,
        architecture: arch,
        fold: subject.to_string(),
        perturbation: "regular".into(),
        magnitude: 0.0,
        p_regular,
        p_irregular: p_regular,
        p_loss: 0.0,
    });
    for (cell_idx, cell) in cells.iter().enumerate() {
        let label = cell.to_string();
        let mut perturbed_windows = Vec::new();
        for (rec_pos, &i) in fold.test_recordings.iter().enumerate() {
            let rec = &dataset.recordings()[i];
            let perturbed = cell
                .apply(
                    &rec.series,
                    derive_seed(job_seed, &[4, cell_idx as u64, rec_pos as u64]),
                )
                .map_err(|e| job_error(subject, &label, e))?;
            perturbed_windows.extend(
                sliding_windows(&perturbed, &rec.subject, spec.window_seconds, spec.step_seconds)
                    .map_err(|e| job_error(subject, &label, e))?,
            );
        }
        let p_irregular =
            macro_f1(&evaluate(&model, &perturbed_windows).map_err(|e| job_error(subject, &label, e))?);
        let p_loss =
            performance_loss(p_regular, p_irregular).map_err(|e| job_error(subject, &label, e))?;
        rows.push(SweepRow {
            rep_seed,
            train_rate_hz: rate,
            architecture: arch,
            fold: subject.to_string(),
            perturbation: cell.kind_name().into(),
            magnitude: cell.magnitude(),
            p_regular,
            p_irregular,
            p_loss,
        });
    }
    Ok(rows)
}

/// Aggregated scores for one (architecture, rate, perturbation, magnitude)
/// group: fold scores are averaged within each repetition seed first, then
/// across seeds. `std_p_loss` is the population deviation of the per-seed
/// means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub architecture: Architecture,
    pub train_rate_hz: f64,
    pub perturbation: String,
    pub magnitude: f64,
    pub mean_p_loss: f64,
    pub std_p_loss: f64,
    pub mean_p_regular: f64,
    pub mean_p_irregular: f64,
    pub folds: usize,
    pub seeds: usize,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Groups rows and averages fold scores within each seed, then across seeds.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryEntry> {
    use std::collections::BTreeMap;
    // Keys are bit patterns; all magnitudes and rates are non-negative, so
    // bit order matches numeric order.
    type Key = (String, u64, String, u64);
    let mut groups: BTreeMap<Key, BTreeMap<u64, Vec<&SweepRow>>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((
                row.architecture.name().to_string(),
                row.train_rate_hz.to_bits(),
                row.perturbation.clone(),
                row.magnitude.to_bits(),
            ))
            .or_default()
            .entry(row.rep_seed)
            .or_default()
            .push(row);
    }
    groups
        .into_iter()
        .map(|((arch, rate_bits, perturbation, magnitude_bits), by_seed)| {
            let folds = by_seed.values().map(|rows| rows.len()).max().unwrap_or(0);
            let seed_loss: Vec<f64> = by_seed
                .values()
                .map(|rows| mean(&rows.iter().map(|r| r.p_loss).collect::<Vec<_>>()))
                .collect();
            let seed_reg: Vec<f64> = by_seed
                .values()
                .map(|rows| mean(&rows.iter().map(|r| r.p_regular).collect::<Vec<_>>()))
                .collect();
            let seed_irr: Vec<f64> = by_seed
                .values()
                .map(|rows| mean(&rows.iter().map(|r| r.p_irregular).collect::<Vec<_>>()))
                .collect();
            let mean_p_loss = mean(&seed_loss);
            let variance = mean(
                &seed_loss
                    .iter()
                    .map(|v| (v - mean_p_loss).powi(2))
                    .collect::<Vec<_>>(),
            );
            SummaryEntry {
                architecture: arch.parse().expect("name written by Architecture::name"),
                train_rate_hz: f64::from_bits(rate_bits),
                perturbation,
                magnitude: f64::from_bits(magnitude_bits),
                mean_p_loss,
                std_p_loss: variance.sqrt(),
                mean_p_regular: mean(&seed_reg),
                mean_p_irregular: mean(&seed_irr),
                folds,
                seeds: by_seed.len(),
            }
        })
        .collect()
}

const RESULTS_HEADER: &str =
    "rep_seed,train_rate_hz,architecture,fold,perturbation,magnitude,p_regular,p_irregular,p_loss";

/// Writes sweep rows with shortest round-trip float formatting, so reruns of
/// a deterministic sweep produce byte-identical files.
pub fn write_results_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.rep_seed,
            r.train_rate_hz,
            r.architecture,
            r.fold,
            r.perturbation,
            r.magnitude,
            r.p_regular,
            r.p_irregular,
            r.p_loss
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Empty(format!("{} is empty", path.display())))?;
    if header != RESULTS_HEADER {
        return Err(Error::Format(format!(
            "unexpected results header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Format(format!(
                "row {}: expected 9 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Format(format!("row {}: bad number {s:?}", i + 2)))
        };
        rows.push(SweepRow {
            rep_seed: fields[0]
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad seed {:?}", i + 2, fields[0])))?,
            train_rate_hz: num(fields[1])?,
            architecture: fields[2].parse()?,
            fold: fields[3].to_string(),
            perturbation: fields[4].to_string(),
            magnitude: num(fields[5])?,
            p_regular: num(fields[6])?,
            p_irregular: num(fields[7])?,
            p_loss: num(fields[8])?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!(
            "{} holds no result rows",
            path.display()
        )));
    }
    Ok(rows)
}

pub fn write_summary_json(entries: &[SummaryEntry], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, entries)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
