use irrbench::eval::{evaluate, loso_folds, split_validation, train, TrainConfig};
use irrbench::ingest::{synth_generate, SynthConfig};
use irrbench::metrics::macro_f1;
use irrbench::models::{Architecture, Model, ModelConfig};
use irrbench::windowing::sliding_windows;

fn fold_f1(arch: Architecture, step: f64, epochs: usize, seed: u64) -> (f64, f64) {
    let dataset = synth_generate(&SynthConfig::default()).unwrap();
    let folds = loso_folds(&dataset).unwrap();
    let fold = &folds[0];
    let mut train_windows = Vec::new();
    for &i in &fold.train_recordings {
        let rec = &dataset.recordings()[i];
        train_windows.extend(sliding_windows(&rec.series, &rec.subject, 2.0, step).unwrap());
    }
    let (tr, va) = split_validation(train_windows, 0.1, seed).unwrap();
    let model = Model::new(ModelConfig {
        architecture: arch,
        input_channels: 3,
        num_classes: 4,
        window_len: 100,
        hidden_size: 32,
        seed,
    })
    .unwrap();
    let tc = TrainConfig { epochs, ..TrainConfig::default() };
    let model = train(model, &tr, &va, &tc, seed + 1).unwrap();
    let train_f1 = macro_f1(&evaluate(&model, &tr).unwrap());
    let mut test_windows = Vec::new();
    for &i in &fold.test_recordings {
        let rec = &dataset.recordings()[i];
        test_windows.extend(sliding_windows(&rec.series, &rec.subject, 2.0, step).unwrap());
    }
    let test_f1 = macro_f1(&evaluate(&model, &test_windows).unwrap());
    (train_f1, test_f1)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arch: Architecture = args[1].parse().unwrap();
    let step: f64 = args[2].parse().unwrap();
    let epochs: usize = args[3].parse().unwrap();
    let seed: u64 = args[4].parse().unwrap();
    let t0 = std::time::Instant::now();
    let (tr, te) = fold_f1(arch, step, epochs, seed);
    println!(
        "{} step={} epochs={} seed={}: train F1 {tr:.4}, LOSO test F1 {te:.4} ({:?})",
        args[1], step, epochs, seed, t0.elapsed()
    );
}
