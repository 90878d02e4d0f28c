//! Cross-module pipeline checks: fold isolation, the training regression
//! baseline, and end-to-end aggregation consistency.

use irrbench::eval::{
    evaluate, loso_folds, run_sweep, summarize, train, DataSource, ExperimentSpec, TrainConfig,
};
use irrbench::ingest::{synth_generate, SynthConfig};
use irrbench::metrics::macro_f1;
use irrbench::models::{Architecture, Model, ModelConfig};
use irrbench::windowing::{dataset_windows, sliding_windows};

#[test]
fn no_test_subject_leaks_into_training_windows() {
    let dataset = synth_generate(&SynthConfig::default()).unwrap();
    let folds = loso_folds(&dataset).unwrap();
    assert_eq!(folds.len(), 5);
    for fold in &folds {
        for &i in &fold.train_recordings {
            let rec = &dataset.recordings()[i];
            let windows = sliding_windows(&rec.series, &rec.subject, 2.0, 1.0).unwrap();
            for w in &windows {
                assert_ne!(w.subject(), &fold.test_subject);
            }
        }
        assert!(!fold.test_recordings.is_empty());
    }
}

// Separable three-class task fitted by ConvDense with the default training
// settings. The exact score is frozen; training is fully deterministic, so
// any drift means the numerics changed.
#[test]
fn training_regression_baseline() {
    let config = SynthConfig {
        num_subjects: 3,
        num_classes: 3,
        num_channels: 2,
        sample_rate: 50.0,
        segment_seconds: 5.0,
        segments_per_subject: 6,
        noise_std: 0.01,
        seed: 21,
    };
    let dataset = synth_generate(&config).unwrap();
    let windows = dataset_windows(&dataset, 2.0, 1.0).unwrap();
    let model = Model::new(ModelConfig {
        architecture: Architecture::ConvDense,
        input_channels: 2,
        num_classes: 3,
        window_len: 100,
        hidden_size: 32,
        seed: 5,
    })
    .unwrap();
    let trained = train(model, &windows, &[], &TrainConfig::default(), 17).unwrap();
    let f1 = macro_f1(&evaluate(&trained, &windows).unwrap());
    assert!(f1 > 0.95, "train macro F1 {f1}");
    let recorded = 1.0;
    assert!(
        (f1 - recorded).abs() <= 1e-12,
        "train macro F1 drifted: got {f1}, recorded {recorded}"
    );
}

#[test]
fn summary_means_recompute_from_raw_rows() {
    let spec = ExperimentSpec {
        data: DataSource::Synth {
            config: SynthConfig {
                num_subjects: 3,
                num_classes: 2,
                num_channels: 2,
                sample_rate: 25.0,
                segment_seconds: 2.0,
                segments_per_subject: 2,
                noise_std: 0.02,
                seed: 9,
            },
        },
        architectures: vec![Architecture::CfcNet],
        train_rates_hz: vec![25.0],
        jitter_epsilons: vec![0.4, 0.8],
        dropout_alphas: vec![0.2],
        window_seconds: 1.0,
        step_seconds: 0.5,
        train: TrainConfig {
            epochs: 2,
            batch_size: 8,
            ..TrainConfig::default()
        },
        hidden_size: 4,
        rep_seeds: vec![1, 2],
        base_seed: 3,
    };
    let rows = run_sweep(&spec).unwrap();
    // 2 seeds x 3 folds x (1 baseline + 3 cells).
    assert_eq!(rows.len(), 2 * 3 * 4);
    for entry in summarize(&rows) {
        let per_seed: Vec<f64> = spec
            .rep_seeds
            .iter()
            .map(|&s| {
                let fold_losses: Vec<f64> = rows
                    .iter()
                    .filter(|r| {
                        r.rep_seed == s
                            && r.perturbation == entry.perturbation
                            && r.magnitude == entry.magnitude
                    })
                    .map(|r| r.p_loss)
                    .collect();
                fold_losses.iter().sum::<f64>() / fold_losses.len() as f64
            })
            .collect();
        let expected = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        assert!(
            (entry.mean_p_loss - expected).abs() <= 1e-12,
            "{} {}: {} vs {}",
            entry.perturbation,
            entry.magnitude,
            entry.mean_p_loss,
            expected
        );
    }
}
