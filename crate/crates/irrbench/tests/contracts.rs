//! Property contracts over the library's core invariants: perturbation
//! bounds, interpolation exactness, metric symmetries, and aggregation
//! order-independence.

use ndarray::Array2;
use proptest::prelude::*;

use irrbench::eval::{summarize, SweepRow};
use irrbench::metrics::{macro_f1, ConfusionMatrix};
use irrbench::models::Architecture;
use irrbench::perturb::{dropout_count, interpolate_at, random_dropout, Perturbation};
use irrbench::series::SampledSeries;

fn regular_series(n: usize, delta_t: f64, channels: usize, seed: u64) -> SampledSeries {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let values = Array2::from_shape_fn((n, channels), |_| rng.random_range(-2.0..2.0));
    let labels = (0..n).map(|i| i % 3).collect();
    SampledSeries::from_regular_grid(0.0, delta_t, values, labels).unwrap()
}

proptest! {
    #[test]
    fn jitter_keeps_order_and_bound(
        n in 2usize..60,
        epsilon in 0.0f64..0.95,
        seed in any::<u64>(),
    ) {
        let delta_t = 0.02;
        let series = regular_series(n, delta_t, 2, seed);
        let op = Perturbation::Jitter { epsilon };
        let out = op.apply(&series, seed).unwrap();
        prop_assert_eq!(out.num_samples(), n);
        let bound = epsilon * delta_t;
        for i in 0..n {
            prop_assert!((out.timestamps()[i] - series.timestamps()[i]).abs() <= bound + 1e-15);
            if i > 0 {
                prop_assert!(out.timestamps()[i] > out.timestamps()[i - 1]);
            }
        }
        prop_assert_eq!(out.labels(), series.labels());
    }

    #[test]
    fn dropout_cardinality_is_exact(
        n in 1usize..200,
        alpha in 0.0f64..0.999,
        seed in any::<u64>(),
    ) {
        let series = regular_series(n, 0.02, 1, seed);
        let out = random_dropout(&series, alpha, seed).unwrap();
        prop_assert_eq!(out.num_samples(), n - dropout_count(n, alpha));
        prop_assert_eq!(dropout_count(n, alpha), (alpha * n as f64).floor() as usize);
        // Survivors keep their original timestamps in order.
        let mut last = f64::NEG_INFINITY;
        for &t in out.timestamps() {
            prop_assert!(t > last);
            prop_assert!(series.timestamps().contains(&t));
            last = t;
        }
    }

    #[test]
    fn interpolation_reproduces_affine_signals(
        n in 2usize..50,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        frac in 0.0f64..1.0,
    ) {
        let delta_t = 0.05;
        let values = Array2::from_shape_fn((n, 1), |(i, _)| a * (i as f64 * delta_t) + b);
        let labels = vec![0; n];
        let series = SampledSeries::from_regular_grid(0.0, delta_t, values, labels).unwrap();
        let span = series.end_time() - series.start_time();
        let query = series.start_time() + frac * span;
        let out = interpolate_at(&series, &[query]).unwrap();
        prop_assert!((out[[0, 0]] - (a * query + b)).abs() <= 1e-12);
    }

    #[test]
    fn macro_f1_is_invariant_under_class_relabeling(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..120),
        swap in 0usize..5,
    ) {
        let truths: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let preds: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let base = macro_f1(&ConfusionMatrix::from_pairs(&truths, &preds, 5).unwrap());
        // Swap class ids `swap` and 0 everywhere; the unweighted mean of
        // per-class scores cannot change.
        let relabel = |c: usize| if c == swap { 0 } else if c == 0 { swap } else { c };
        let truths2: Vec<usize> = truths.iter().map(|&c| relabel(c)).collect();
        let preds2: Vec<usize> = preds.iter().map(|&c| relabel(c)).collect();
        let swapped = macro_f1(&ConfusionMatrix::from_pairs(&truths2, &preds2, 5).unwrap());
        prop_assert!((base - swapped).abs() <= 1e-12);
    }

    #[test]
    fn summaries_ignore_row_order(
        seeds in prop::collection::vec(1u64..4, 1..3),
        losses in prop::collection::vec(-0.5f64..0.9, 6..18),
    ) {
        let mut rows = Vec::new();
        for (i, &loss) in losses.iter().enumerate() {
            rows.push(SweepRow {
                rep_seed: seeds[i % seeds.len()],
                train_rate_hz: 50.0,
                architecture: Architecture::CfcNet,
                fold: format!("s{}", i % 3),
                perturbation: "jitter".into(),
                magnitude: if i % 2 == 0 { 0.3 } else { 0.7 },
                p_regular: 1.0,
                p_irregular: 1.0 - loss,
                p_loss: loss,
            });
        }
        let forward = summarize(&rows);
        rows.reverse();
        let reversed = summarize(&rows);
        prop_assert_eq!(forward.len(), reversed.len());
        for (a, b) in forward.iter().zip(&reversed) {
            prop_assert_eq!(&a.perturbation, &b.perturbation);
            prop_assert_eq!(a.magnitude, b.magnitude);
            prop_assert!((a.mean_p_loss - b.mean_p_loss).abs() <= 1e-12);
        }
    }

    #[test]
    fn downsampling_keeps_every_kth_sample(
        n in 1usize..80,
        factor in 1usize..6,
        seed in any::<u64>(),
    ) {
        let series = regular_series(n, 0.02, 2, seed);
        let out = Perturbation::Downsample { factor }.apply(&series, seed).unwrap();
        prop_assert_eq!(out.num_samples(), n.div_ceil(factor));
        for (j, &t) in out.timestamps().iter().enumerate() {
            prop_assert_eq!(t, series.timestamps()[j * factor]);
        }
        prop_assert!((out.nominal_interval() - 0.02 * factor as f64).abs() < 1e-15);
    }
}
