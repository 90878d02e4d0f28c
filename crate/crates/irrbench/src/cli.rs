//! Command-line interface: dataset synthesis, one-shot perturbation,
//! window extraction, standalone training, the full sweep, and report
//! generation. Every command is deterministic given its inputs, flags, and
//! seed, and no command mutates its input files.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{
    derive_seed, run_sweep, split_validation, summarize, write_results_csv, write_summary_json,
    DataSource, ExperimentSpec, TrainConfig,
};
use crate::ingest::{synth_generate, write_csv, CsvSchema, SynthConfig};
use crate::metrics::macro_f1;
use crate::models::{Architecture, Model, ModelConfig};
use crate::perturb::Perturbation;
use crate::series::Dataset;
use crate::windowing::dataset_windows;

#[derive(Parser, Debug)]
#[command(
    name = "irrbench",
    version,
    about = "Measures how sampling irregularity degrades time-series classifiers"
)]
pub struct Cli {
    /// Overrides the seed from any config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generates a synthetic labeled dataset and writes it as CSV.
    Synth {
        /// JSON generator settings; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Applies one perturbation to a dataset, per subject, and writes the
    /// result with its (possibly irregular) timestamps.
    Perturb {
        /// Input CSV.
        input: PathBuf,
        #[command(flatten)]
        op: PerturbArgs,
        /// Nominal sample rate of the input in Hz.
        #[arg(long)]
        rate: f64,
        /// JSON column mapping; derived from the header when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extracts sliding windows and writes one summary row per window.
    Windows {
        /// Input CSV.
        input: PathBuf,
        /// Nominal sample rate of the input in Hz.
        #[arg(long)]
        rate: f64,
        /// Window length in seconds.
        #[arg(long, default_value_t = 2.0)]
        window: f64,
        /// Step between window starts in seconds.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        /// JSON column mapping; derived from the header when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains one model on regular windows and saves a checkpoint.
    Train {
        /// JSON training run description.
        #[arg(long)]
        config: PathBuf,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the full (rate x architecture x perturbation) sweep.
    Sweep {
        /// JSON experiment description.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregates sweep results into loss tables and plot-ready series.
    Report {
        /// results.csv from a sweep run.
        input: PathBuf,
        /// Output directory for the report files.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exactly one perturbation per invocation.
#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct PerturbArgs {
    /// Timestamp jitter magnitude as a fraction of the sample interval.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Fraction of samples to drop, in [0, 1).
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Keep every k-th sample.
    #[arg(long)]
    pub downsample: Option<usize>,
}

impl PerturbArgs {
    fn perturbation(&self) -> Perturbation {
        match (self.jitter, self.dropout, self.downsample) {
            (Some(epsilon), _, _) => Perturbation::Jitter { epsilon },
            (_, Some(alpha), _) => Perturbation::Dropout { alpha },
            (_, _, Some(factor)) => Perturbation::Downsample { factor },
            _ => unreachable!("clap enforces exactly one operator"),
        }
    }
}

/// Standalone training run: where the data comes from and how to fit it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub data: DataSource,
    pub architecture: Architecture,
    #[serde(default = "default_window_seconds")]
    pub window_seconds: f64,
    #[serde(default = "default_step_seconds")]
    pub step_seconds: f64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_hidden_size")]
    pub hidden_size: usize,
    #[serde(default)]
    pub seed: u64,
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

/// Parses arguments and runs; the return value is the process exit code
/// (0 success, 1 user error, 2 internal error).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                1
            } else {
                2
            }
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out } => cmd_synth(config.as_deref(), cli.seed, &out),
        Command::Perturb {
            input,
            op,
            rate,
            schema,
            out,
        } => cmd_perturb(
            &input,
            &op.perturbation(),
            rate,
            schema.as_deref(),
            cli.seed.unwrap_or(0),
            &out,
        ),
        Command::Windows {
            input,
            rate,
            window,
            step,
            schema,
            out,
        } => cmd_windows(&input, rate, window, step, schema.as_deref(), &out),
        Command::Train { config, out } => cmd_train(&config, cli.seed, &out),
        Command::Sweep { config, out } => cmd_sweep(&config, cli.seed, &out),
        Command::Report { input, out } => cmd_report(&input, &out),
    }
}

/// Missing or unreadable user-supplied paths are user errors, not internal
/// ones.
fn open_input(path: &Path) -> Result<File> {
    File::open(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot open {}: {e}", path.display())))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = open_input(path)?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn load_dataset(input: &Path, schema: Option<&Path>, rate: f64) -> Result<Dataset> {
    open_input(input)?;
    let schema = match schema {
        Some(path) => load_json(path)?,
        None => {
            let mut reader = csv::Reader::from_path(input)?;
            let header: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
            CsvSchema::from_header(&header)?
        }
    };
    crate::ingest::load_csv(input, &schema, rate)
}

fn cmd_synth(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut config: SynthConfig = match config {
        Some(path) => load_json(path)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let dataset = synth_generate(&config)?;
    write_csv(&dataset, out)?;
    let rows: usize = dataset
        .recordings()
        .iter()
        .map(|r| r.series.num_samples())
        .sum();
    println!("wrote {} ({rows} rows, {} subjects)", out.display(), dataset.subjects().len());
    Ok(())
}

fn cmd_perturb(
    input: &Path,
    op: &Perturbation,
    rate: f64,
    schema: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    op.validate()?;
    let dataset = load_dataset(input, schema, rate)?;
    let recordings = dataset
        .recordings()
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            Ok(crate::series::Recording {
                subject: rec.subject.clone(),
                series: op.apply(&rec.series, derive_seed(seed, &[i as u64]))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let perturbed = Dataset::new(
        recordings,
        dataset.classes().iter().map(|c| c.name.clone()).collect(),
        dataset.channel_names().to_vec(),
    )?;
    write_csv(&perturbed, out)?;
    println!("wrote {} ({op})", out.display());
    Ok(())
}

fn cmd_windows(
    input: &Path,
    rate: f64,
    window: f64,
    step: f64,
    schema: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let dataset = load_dataset(input, schema, rate)?;
    let windows = dataset_windows(&dataset, window, step)?;
    let mut file = BufWriter::new(File::create(out)?);
    writeln!(file, "subject,start_time,num_samples,label")?;
    for w in &windows {
        writeln!(
            file,
            "{},{},{},{}",
            w.subject(),
            w.start_time(),
            w.num_samples(),
            dataset.classes()[w.label()].name
        )?;
    }
    file.flush()?;
    println!("wrote {} ({} windows)", out.display(), windows.len());
    Ok(())
}

fn cmd_train(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut run: TrainRunConfig = load_json(config)?;
    if let Some(seed) = seed {
        run.seed = seed;
    }
    let (dataset, rate) = run.data.load()?;
    let windows = dataset_windows(&dataset, run.window_seconds, run.step_seconds)?;
    let (train_set, val_set) = split_validation(
        windows,
        run.train.validation_fraction,
        derive_seed(run.seed, &[1]),
    )?;
    let model_config = ModelConfig {
        architecture: run.architecture,
        input_channels: dataset.num_channels(),
        num_classes: dataset.num_classes(),
        window_len: (run.window_seconds * rate).round() as usize,
        hidden_size: run.hidden_size,
        seed: derive_seed(run.seed, &[2]),
    };
    let model = Model::new(model_config)?;
    let model = crate::eval::train(model, &train_set, &val_set, &run.train, derive_seed(run.seed, &[3]))?;
    let train_f1 = macro_f1(&crate::eval::evaluate(&model, &train_set)?);
    model.save(out)?;
    match val_set.is_empty() {
        true => println!("wrote {} (train macro F1 {train_f1:.4})", out.display()),
        false => {
            let val_f1 = macro_f1(&crate::eval::evaluate(&model, &val_set)?);
            println!(
                "wrote {} (train macro F1 {train_f1:.4}, validation macro F1 {val_f1:.4})",
                out.display()
            );
        }
    }
    Ok(())
}

fn cmd_sweep(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut spec: ExperimentSpec = load_json(config)?;
    if let Some(seed) = seed {
        spec.base_seed = seed;
    }
    let rows = run_sweep(&spec)?;
    std::fs::create_dir_all(out)?;
    write_results_csv(&rows, &out.join("results.csv"))?;
    write_summary_json(&summarize(&rows), &out.join("summary.json"))?;
    println!(
        "wrote {} and {} ({} rows)",
        out.join("results.csv").display(),
        out.join("summary.json").display(),
        rows.len()
    );
    Ok(())
}

fn cmd_report(input: &Path, out: &Path) -> Result<()> {
    open_input(input)?;
    let rows = crate::eval::read_results_csv(input)?;
    let report = crate::report::build_report(&rows)?;
    crate::report::write_report(&report, out)?;
    println!(
        "wrote loss_table.csv, rate_series.csv, dropout_series.csv under {}",
        out.display()
    );
    Ok(())
}
