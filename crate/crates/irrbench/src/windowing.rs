//! Sliding-window extraction over sampled series.
//!
//! Windows are cut on the time axis, not the index axis, so the same
//! window/step settings apply to regular and irregular series alike. Each
//! window carries elapsed times between its samples for models that consume
//! them; the first entry is the nominal interval, since the gap before a
//! window's first sample is unknowable.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::series::{Dataset, SampledSeries, SubjectId};

/// A fixed span of samples cut from one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    values: Array2<f64>,
    elapsed: Vec<f64>,
    label: usize,
    start_time: f64,
    subject: SubjectId,
}

impl Window {
    pub fn new(
        values: Array2<f64>,
        elapsed: Vec<f64>,
        label: usize,
        start_time: f64,
        subject: SubjectId,
    ) -> Result<Window> {
        if values.nrows() == 0 {
            return Err(Error::Empty("window must contain at least one sample".into()));
        }
        if elapsed.len() != values.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} value rows but {} elapsed entries",
                values.nrows(),
                elapsed.len()
            )));
        }
        if let Some(bad) = elapsed.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "elapsed times must be positive and finite, got {bad}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("window values must be finite".into()));
        }
        if !start_time.is_finite() {
            return Err(Error::NonFinite(format!("window start time is {start_time}")));
        }
        Ok(Window {
            values,
            elapsed,
            label,
            start_time,
            subject,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn elapsed(&self) -> &[f64] {
        &self.elapsed
    }

    /// Replaces the elapsed vector, e.g. to probe timing sensitivity without
    /// touching the values.
    pub fn with_elapsed(&self, elapsed: Vec<f64>) -> Result<Window> {
        Window::new(
            self.values.clone(),
            elapsed,
            self.label,
            self.start_time,
            self.subject.clone(),
        )
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn subject(&self) -> &SubjectId {
        &self.subject
    }

    pub fn num_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_channels(&self) -> usize {
        self.values.ncols()
    }
}

/// Most frequent label; ties go to the smallest class id. `None` on empty
/// input.
pub fn majority_label(labels: &[usize]) -> Option<usize> {
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(label, _)| label)
}

/// Cuts windows of `window_seconds` every `step_seconds`, starting at the
/// first timestamp.
///
/// Window `k` spans `[t1 + k*step, t1 + k*step + window)`, half-open, and is
/// emitted while the span's closed end does not pass the last timestamp.
/// Start times come directly from `k`, so step rounding does not accumulate.
/// Spans left empty by dropout are skipped. Each window is labeled by
/// majority vote over its samples.
pub fn sliding_windows(
    series: &SampledSeries,
    subject: &SubjectId,
    window_seconds: f64,
    step_seconds: f64,
) -> Result<Vec<Window>> {
    if !(window_seconds > 0.0 && window_seconds.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "window length must be positive and finite, got {window_seconds}"
        )));
    }
    if !(step_seconds > 0.0 && step_seconds.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive and finite, got {step_seconds}"
        )));
    }
    let ts = series.timestamps();
    let t1 = series.start_time();
    let end = series.end_time();
    let mut windows = Vec::new();
    let mut k = 0usize;
    loop {
        let start = t1 + k as f64 * step_seconds;
        if start + window_seconds > end {
            break;
        }
        let lo = ts.partition_point(|&t| t < start);
        let hi = ts.partition_point(|&t| t < start + window_seconds);
        if hi > lo {
            let m = hi - lo;
            let mut values = Array2::zeros((m, series.num_channels()));
            let mut elapsed = Vec::with_capacity(m);
            for (row, i) in (lo..hi).enumerate() {
                values.row_mut(row).assign(&series.values().row(i));
                elapsed.push(if i == lo {
                    series.nominal_interval()
                } else {
                    ts[i] - ts[i - 1]
                });
            }
            let label = majority_label(&series.labels()[lo..hi]).expect("hi > lo");
            windows.push(Window::new(values, elapsed, label, start, subject.clone())?);
        }
        k += 1;
    }
    Ok(windows)
}

/// Windows every recording in the dataset, tagged with its subject.
pub fn dataset_windows(
    dataset: &Dataset,
    window_seconds: f64,
    step_seconds: f64,
) -> Result<Vec<Window>> {
    let mut all = Vec::new();
    for rec in dataset.recordings() {
        all.extend(sliding_windows(
            &rec.series,
            &rec.subject,
            window_seconds,
            step_seconds,
        )?);
    }
    Ok(all)
}

/// Forces a window to exactly `target` samples: longer windows are truncated,
/// shorter ones repeat their last sample with the nominal elapsed gap.
pub fn pad_to_length(window: &Window, target: usize) -> Result<Window> {
    if target == 0 {
        return Err(Error::InvalidArgument(
            "target length must be at least 1".into(),
        ));
    }
    let m = window.num_samples();
    let d = window.num_channels();
    let mut values = Array2::zeros((target, d));
    let mut elapsed = Vec::with_capacity(target);
    for row in 0..target {
        let src = row.min(m - 1);
        values.row_mut(row).assign(&window.values().row(src));
        elapsed.push(if row < m {
            window.elapsed()[row]
        } else {
            window.elapsed()[0]
        });
    }
    Window::new(
        values,
        elapsed,
        window.label(),
        window.start_time(),
        window.subject().clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::{jitter_timestamps, random_dropout};
    use ndarray::Array2;

    fn series_10s_50hz() -> SampledSeries {
        // 501 samples: t runs 0.00, 0.02, ..., 10.00.
        let n = 501;
        let values = Array2::from_shape_fn((n, 2), |(i, j)| (i + j) as f64);
        let labels = (0..n).map(|i| if i < 250 { 0 } else { 1 }).collect();
        SampledSeries::from_regular_grid(0.0, 0.02, values, labels).unwrap()
    }

    #[test]
    fn two_second_windows_with_one_second_step() {
        let series = series_10s_50hz();
        let windows = sliding_windows(&series, &"a".into(), 2.0, 1.0).unwrap();
        assert_eq!(windows.len(), 9);
        for (k, w) in windows.iter().enumerate() {
            assert_eq!(w.num_samples(), 100);
            assert_eq!(w.start_time(), k as f64);
            assert_eq!(w.elapsed()[0], 0.02);
            for &e in &w.elapsed()[1..] {
                assert!((e - 0.02).abs() < 1e-12);
            }
        }
        // First window holds samples at t in [0, 2).
        assert_eq!(windows[0].values()[[0, 0]], 0.0);
        assert_eq!(windows[0].values()[[99, 0]], 99.0);
    }

    #[test]
    fn membership_is_half_open() {
        let series = series_10s_50hz();
        let windows = sliding_windows(&series, &"a".into(), 2.0, 2.0).unwrap();
        // Starts 0, 2, 4, 6, 8; sample at exactly start+window belongs to the
        // next window.
        assert_eq!(windows.len(), 5);
        let first = &windows[0];
        let last_t_in_first = 0.02 * 99.0;
        assert!((first.values()[[99, 0]] - 99.0).abs() < 1e-12);
        assert!(last_t_in_first < 2.0);
        assert_eq!(windows[1].values()[[0, 0]], 100.0);
    }

    #[test]
    fn majority_vote_breaks_ties_toward_smaller_id() {
        assert_eq!(majority_label(&[1, 1, 2, 2]), Some(1));
        assert_eq!(majority_label(&[2, 2, 1]), Some(2));
        assert_eq!(majority_label(&[3]), Some(3));
        assert_eq!(majority_label(&[]), None);
        assert_eq!(majority_label(&[5, 0, 5, 0, 7]), Some(0));
    }

    #[test]
    fn window_labels_use_majority_vote() {
        let series = series_10s_50hz();
        let windows = sliding_windows(&series, &"a".into(), 2.0, 1.0).unwrap();
        // Label flips at t = 5.0; the window starting at 4.0 holds 50 samples
        // of each class, so the tie resolves to class 0.
        assert_eq!(windows[3].label(), 0);
        assert_eq!(windows[4].label(), 0);
        assert_eq!(windows[5].label(), 1);
    }

    #[test]
    fn jittered_series_windows_keep_positive_elapsed() {
        let series = series_10s_50hz();
        let jittered = jitter_timestamps(&series, 0.9, 5).unwrap();
        let windows = sliding_windows(&jittered, &"a".into(), 2.0, 1.0).unwrap();
        assert!(!windows.is_empty());
        for w in &windows {
            assert_eq!(w.elapsed()[0], jittered.nominal_interval());
            for &e in w.elapsed() {
                assert!(e > 0.0);
            }
        }
    }

    #[test]
    fn dropout_series_yields_shorter_windows() {
        let series = series_10s_50hz();
        let dropped = random_dropout(&series, 0.8, 3).unwrap();
        let windows = sliding_windows(&dropped, &"a".into(), 2.0, 1.0).unwrap();
        for w in &windows {
            assert!(w.num_samples() <= 100);
            assert!(w.num_samples() >= 1);
        }
    }

    #[test]
    fn step_larger_than_window_leaves_gaps() {
        let series = series_10s_50hz();
        let windows = sliding_windows(&series, &"a".into(), 1.0, 3.0).unwrap();
        assert_eq!(windows.len(), 4);
        let starts: Vec<f64> = windows.iter().map(|w| w.start_time()).collect();
        assert_eq!(starts, vec![0.0, 3.0, 6.0, 9.0]);
    }

    #[test]
    fn rejects_bad_window_params() {
        let series = series_10s_50hz();
        assert!(sliding_windows(&series, &"a".into(), 0.0, 1.0).is_err());
        assert!(sliding_windows(&series, &"a".into(), 2.0, 0.0).is_err());
        assert!(sliding_windows(&series, &"a".into(), -2.0, 1.0).is_err());
    }

    #[test]
    fn series_shorter_than_window_yields_nothing() {
        let values = Array2::zeros((10, 1));
        let series =
            SampledSeries::from_regular_grid(0.0, 0.02, values, vec![0; 10]).unwrap();
        let windows = sliding_windows(&series, &"a".into(), 2.0, 1.0).unwrap();
        assert!(windows.is_empty());
    }

    #[test]
    fn padding_repeats_last_sample() {
        let series = series_10s_50hz();
        let dropped = random_dropout(&series, 0.6, 3).unwrap();
        let windows = sliding_windows(&dropped, &"a".into(), 2.0, 1.0).unwrap();
        let short = windows.iter().find(|w| w.num_samples() < 100).unwrap();
        let padded = pad_to_length(short, 100).unwrap();
        assert_eq!(padded.num_samples(), 100);
        assert_eq!(padded.label(), short.label());
        let m = short.num_samples();
        for row in 0..100 {
            let src = row.min(m - 1);
            for ch in 0..short.num_channels() {
                assert_eq!(padded.values()[[row, ch]], short.values()[[src, ch]]);
            }
            if row >= m {
                assert_eq!(padded.elapsed()[row], short.elapsed()[0]);
            } else {
                assert_eq!(padded.elapsed()[row], short.elapsed()[row]);
            }
        }
    }

    #[test]
    fn padding_truncates_long_windows() {
        let series = series_10s_50hz();
        let windows = sliding_windows(&series, &"a".into(), 2.0, 1.0).unwrap();
        let cut = pad_to_length(&windows[0], 60).unwrap();
        assert_eq!(cut.num_samples(), 60);
        for row in 0..60 {
            assert_eq!(cut.values()[[row, 0]], windows[0].values()[[row, 0]]);
        }
        let same = pad_to_length(&windows[0], 100).unwrap();
        assert_eq!(&same, &windows[0]);
    }

    #[test]
    fn padding_rejects_zero_target() {
        let series = series_10s_50hz();
        let windows = sliding_windows(&series, &"a".into(), 2.0, 1.0).unwrap();
        assert!(pad_to_length(&windows[0], 0).is_err());
    }

    #[test]
    fn window_construction_validates() {
        let subject: SubjectId = "a".into();
        let ok = Window::new(
            Array2::zeros((2, 1)),
            vec![0.02, 0.03],
            0,
            0.0,
            subject.clone(),
        );
        assert!(ok.is_ok());
        assert!(Window::new(Array2::zeros((0, 1)), vec![], 0, 0.0, subject.clone()).is_err());
        assert!(
            Window::new(Array2::zeros((2, 1)), vec![0.02], 0, 0.0, subject.clone()).is_err()
        );
        assert!(Window::new(
            Array2::zeros((2, 1)),
            vec![0.02, 0.0],
            0,
            0.0,
            subject.clone()
        )
        .is_err());
        assert!(Window::new(
            Array2::zeros((2, 1)),
            vec![0.02, -0.01],
            0,
            0.0,
            subject
        )
        .is_err());
    }
}
