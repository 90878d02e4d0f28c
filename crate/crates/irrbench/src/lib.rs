//! Measures how sampling irregularity (timestamp jitter, random dropout,
//! decimation) degrades time-series classifiers under leave-one-subject-out
//! evaluation.
//!
//! The pipeline: ingest or synthesize a labeled multichannel dataset, train a
//! classifier per held-out subject on regularly sampled windows, perturb the
//! held-out series, and report the relative macro-F1 drop.

pub mod cli;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod perturb;
pub mod report;
pub mod series;
pub mod windowing;

pub use error::{Error, Result};
