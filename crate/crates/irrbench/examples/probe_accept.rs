use irrbench::eval::{run_sweep, summarize, DataSource, ExperimentSpec, TrainConfig};
use irrbench::ingest::SynthConfig;
use irrbench::models::Architecture;

fn main() {
    let spec = ExperimentSpec {
        data: DataSource::Synth { config: SynthConfig::default() },
        architectures: vec![Architecture::ConvDense, Architecture::CfcNet],
        train_rates_hz: vec![50.0, 10.0],
        jitter_epsilons: (1..=9).map(|i| i as f64 / 10.0).collect(),
        dropout_alphas: vec![0.1, 0.2, 0.4, 0.6, 0.8],
        window_seconds: 2.0,
        step_seconds: 1.0,
        train: TrainConfig::default(),
        hidden_size: 32,
        rep_seeds: vec![1, 2, 3],
        base_seed: 2024,
    };
    let t0 = std::time::Instant::now();
    let rows = run_sweep(&spec).unwrap();
    println!("sweep took {:?} ({} rows)", t0.elapsed(), rows.len());
    for e in summarize(&rows) {
        println!(
            "{:>14} @{:>2}Hz {:>8} m={:.1}  mean_loss={:+.4} std={:.4} p_reg={:.4}",
            e.architecture.name(), e.train_rate_hz, e.perturbation, e.magnitude,
            e.mean_p_loss, e.std_p_loss, e.mean_p_regular
        );
    }
}
