//! Turns raw sweep rows into the three report tables: a jitter-loss matrix
//! (architecture x epsilon, one table per training rate), loss versus
//! training rate at the strongest jitter, and loss versus dropout rate.
//! Pure transformations of the rows; nothing here reruns any experiment.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{summarize, SummaryEntry, SweepRow};

/// One row of the jitter matrix: baseline score plus the mean loss at every
/// epsilon, for a fixed (training rate, architecture).
#[derive(Debug, Clone, PartialEq)]
pub struct LossTableRow {
    pub train_rate_hz: f64,
    pub architecture: String,
    pub mean_p_regular: f64,
    pub losses: Vec<(f64, f64)>,
}

/// Mean loss for one (architecture, training rate) at the strongest jitter
/// present in the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeriesPoint {
    pub architecture: String,
    pub train_rate_hz: f64,
    pub epsilon: f64,
    pub mean_p_loss: f64,
}

/// Mean loss for one (architecture, training rate, dropout rate).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutSeriesPoint {
    pub architecture: String,
    pub train_rate_hz: f64,
    pub alpha: f64,
    pub mean_p_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub loss_table: Vec<LossTableRow>,
    pub rate_series: Vec<RateSeriesPoint>,
    pub dropout_series: Vec<DropoutSeriesPoint>,
}

fn entries_of_kind<'e>(entries: &'e [SummaryEntry], kind: &str) -> Vec<&'e SummaryEntry> {
    entries.iter().filter(|e| e.perturbation == kind).collect()
}

/// Builds all three tables from raw rows. Errors on empty input.
pub fn build_report(rows: &[SweepRow]) -> Result<Report> {
    if rows.is_empty() {
        return Err(Error::Empty("no sweep rows to report on".into()));
    }
    let entries = summarize(rows);
    let jitter = entries_of_kind(&entries, "jitter");
    let dropout = entries_of_kind(&entries, "dropout");
    let regular = entries_of_kind(&entries, "regular");

    // Group keys in summary order: (architecture, rate) pairs stay sorted.
    let mut pairs: Vec<(String, f64)> = entries
        .iter()
        .map(|e| (e.architecture.name().to_string(), e.train_rate_hz))
        .collect();
    pairs.dedup();

    let mut loss_table = Vec::new();
    for (arch, rate) in &pairs {
        let losses: Vec<(f64, f64)> = jitter
            .iter()
            .filter(|e| e.architecture.name() == arch && e.train_rate_hz == *rate)
            .map(|e| (e.magnitude, e.mean_p_loss))
            .collect();
        if losses.is_empty() {
            continue;
        }
        let mean_p_regular = regular
            .iter()
            .find(|e| e.architecture.name() == arch && e.train_rate_hz == *rate)
            .map(|e| e.mean_p_regular)
            .ok_or_else(|| {
                Error::Format(format!(
                    "no regular baseline rows for {arch} at {rate} Hz"
                ))
            })?;
        loss_table.push(LossTableRow {
            train_rate_hz: *rate,
            architecture: arch.clone(),
            mean_p_regular,
            losses,
        });
    }

    let max_epsilon = jitter
        .iter()
        .map(|e| e.magnitude)
        .fold(f64::NEG_INFINITY, f64::max);
    let rate_series: Vec<RateSeriesPoint> = jitter
        .iter()
        .filter(|e| e.magnitude == max_epsilon)
        .map(|e| RateSeriesPoint {
            architecture: e.architecture.name().to_string(),
            train_rate_hz: e.train_rate_hz,
            epsilon: e.magnitude,
            mean_p_loss: e.mean_p_loss,
        })
        .collect();

    let dropout_series: Vec<DropoutSeriesPoint> = dropout
        .iter()
        .map(|e| DropoutSeriesPoint {
            architecture: e.architecture.name().to_string(),
            train_rate_hz: e.train_rate_hz,
            alpha: e.magnitude,
            mean_p_loss: e.mean_p_loss,
        })
        .collect();

    Ok(Report {
        loss_table,
        rate_series,
        dropout_series,
    })
}

/// Writes `loss_table.csv`, `rate_series.csv`, and `dropout_series.csv`
/// under `out_dir`. A table with nothing to say is still written with just
/// its header, so downstream globs stay simple.
pub fn write_report(report: &Report, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;

    let mut epsilons: Vec<f64> = report
        .loss_table
        .iter()
        .flat_map(|r| r.losses.iter().map(|&(e, _)| e))
        .collect();
    epsilons.sort_by(f64::total_cmp);
    epsilons.dedup();

    let mut out = BufWriter::new(File::create(out_dir.join("loss_table.csv"))?);
    write!(out, "train_rate_hz,architecture,p_regular")?;
    for e in &epsilons {
        write!(out, ",loss_eps_{e}")?;
    }
    writeln!(out)?;
    for row in &report.loss_table {
        write!(
            out,
            "{},{},{}",
            row.train_rate_hz, row.architecture, row.mean_p_regular
        )?;
        for e in &epsilons {
            match row.losses.iter().find(|(eps, _)| eps == e) {
                Some((_, loss)) => write!(out, ",{loss}")?,
                None => write!(out, ",")?,
            }
        }
        writeln!(out)?;
    }
    out.flush()?;

    let mut out = BufWriter::new(File::create(out_dir.join("rate_series.csv"))?);
    writeln!(out, "architecture,train_rate_hz,epsilon,mean_p_loss")?;
    for p in &report.rate_series {
        writeln!(
            out,
            "{},{},{},{}",
            p.architecture, p.train_rate_hz, p.epsilon, p.mean_p_loss
        )?;
    }
    out.flush()?;

    let mut out = BufWriter::new(File::create(out_dir.join("dropout_series.csv"))?);
    writeln!(out, "architecture,train_rate_hz,alpha,mean_p_loss")?;
    for p in &report.dropout_series {
        writeln!(
            out,
            "{},{},{},{}",
            p.architecture, p.train_rate_hz, p.alpha, p.mean_p_loss
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Architecture;

    fn row(
        rep_seed: u64,
        rate: f64,
        arch: Architecture,
        fold: &str,
        kind: &str,
        magnitude: f64,
        p_regular: f64,
        p_irregular: f64,
    ) -> SweepRow {
        SweepRow {
            rep_seed,
            train_rate_hz: rate,
            architecture: arch,
            fold: fold.into(),
            perturbation: kind.into(),
            magnitude,
            p_regular,
            p_irregular,
            p_loss: (p_regular - p_irregular) / p_regular,
        }
    }

    fn sample_rows() -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for (seed, shift) in [(1u64, 0.00), (2u64, 0.02)] {
            for (fold, base) in [("s0", 0.90), ("s1", 0.80)] {
                let reg = base + shift;
                rows.push(row(seed, 50.0, Architecture::ConvDense, fold, "regular", 0.0, reg, reg));
                rows.push(row(seed, 50.0, Architecture::ConvDense, fold, "jitter", 0.1, reg, reg - 0.05));
                rows.push(row(seed, 50.0, Architecture::ConvDense, fold, "jitter", 0.9, reg, reg - 0.20));
                rows.push(row(seed, 50.0, Architecture::ConvDense, fold, "dropout", 0.2, reg, reg - 0.10));
            }
        }
        rows
    }

    // Independent of summarize(): plain mean over every matching row. Valid
    // here because each seed covers the same folds.
    fn oracle_mean(rows: &[SweepRow], kind: &str, magnitude: f64, value: fn(&SweepRow) -> f64) -> f64 {
        let picked: Vec<f64> = rows
            .iter()
            .filter(|r| r.perturbation == kind && r.magnitude == magnitude)
            .map(value)
            .collect();
        picked.iter().sum::<f64>() / picked.len() as f64
    }

    #[test]
    fn report_means_match_flat_mean_oracle() {
        let rows = sample_rows();
        let report = build_report(&rows).unwrap();
        assert_eq!(report.loss_table.len(), 1);
        let table = &report.loss_table[0];
        assert_eq!(table.architecture, "conv_dense");
        assert!(
            (table.mean_p_regular - oracle_mean(&rows, "regular", 0.0, |r| r.p_regular)).abs()
                <= 1e-9
        );
        for &(eps, loss) in &table.losses {
            assert!((loss - oracle_mean(&rows, "jitter", eps, |r| r.p_loss)).abs() <= 1e-9);
        }
        assert_eq!(report.rate_series.len(), 1);
        assert_eq!(report.rate_series[0].epsilon, 0.9);
        assert!(
            (report.rate_series[0].mean_p_loss
                - oracle_mean(&rows, "jitter", 0.9, |r| r.p_loss))
            .abs()
                <= 1e-9
        );
        assert_eq!(report.dropout_series.len(), 1);
        assert_eq!(report.dropout_series[0].alpha, 0.2);
        assert!(
            (report.dropout_series[0].mean_p_loss
                - oracle_mean(&rows, "dropout", 0.2, |r| r.p_loss))
            .abs()
                <= 1e-9
        );
    }

    #[test]
    fn single_cell_input_yields_single_cell_table() {
        let rows = vec![
            row(1, 50.0, Architecture::CfcNet, "s0", "regular", 0.0, 0.9, 0.9),
            row(1, 50.0, Architecture::CfcNet, "s0", "jitter", 0.5, 0.9, 0.81),
        ];
        let report = build_report(&rows).unwrap();
        assert_eq!(report.loss_table.len(), 1);
        assert_eq!(report.loss_table[0].losses, vec![(0.5, rows[1].p_loss)]);
        assert_eq!(report.rate_series.len(), 1);
        assert!(report.dropout_series.is_empty());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(build_report(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn dropout_only_rows_skip_the_jitter_table() {
        let rows = vec![
            row(1, 50.0, Architecture::CfcNet, "s0", "regular", 0.0, 0.9, 0.9),
            row(1, 50.0, Architecture::CfcNet, "s0", "dropout", 0.4, 0.9, 0.6),
        ];
        let report = build_report(&rows).unwrap();
        assert!(report.loss_table.is_empty());
        assert!(report.rate_series.is_empty());
        assert_eq!(report.dropout_series.len(), 1);
    }

    #[test]
    fn written_files_have_expected_shape() {
        let rows = sample_rows();
        let report = build_report(&rows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_report(&report, dir.path()).unwrap();
        let table = std::fs::read_to_string(dir.path().join("loss_table.csv")).unwrap();
        let mut lines = table.lines();
        assert_eq!(
            lines.next().unwrap(),
            "train_rate_hz,architecture,p_regular,loss_eps_0.1,loss_eps_0.9"
        );
        assert_eq!(lines.count(), 1);
        let rates = std::fs::read_to_string(dir.path().join("rate_series.csv")).unwrap();
        assert!(rates.starts_with("architecture,train_rate_hz,epsilon,mean_p_loss\n"));
        let drops = std::fs::read_to_string(dir.path().join("dropout_series.csv")).unwrap();
        assert_eq!(drops.lines().count(), 2);
    }
}
