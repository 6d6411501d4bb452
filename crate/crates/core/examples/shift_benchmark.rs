//! Runs the synthetic shift benchmark once and prints the headline numbers.
//!
//! Usage: `cargo run --release --example shift_benchmark -- [delta] [seed]`

use std::time::Instant;

use stardr::experiment::{run_benchmark, BenchmarkConfig};
use stardr::model::ModelConfig;

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let delta: f64 = args.get(1).map_or(Ok(6.0), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(42), |s| s.parse())?;
    let mut cfg = BenchmarkConfig::default().with_seed(seed);
    cfg.synth.shift_delta = delta;
    cfg.synth.pair_fraction = env_or("PAIR_FRACTION", cfg.synth.pair_fraction);
    cfg.synth.noise_sigma = env_or("NOISE", cfg.synth.noise_sigma);
    cfg.synth.latent_dim_true = env_or("LATENT_TRUE", cfg.synth.latent_dim_true);
    cfg.synth.drug_weight_ratio = env_or("RATIO", cfg.synth.drug_weight_ratio);
    cfg.arch = ModelConfig {
        cell_latent: env_or("CELL_LATENT", 32),
        drug_latent: env_or("DRUG_LATENT", 16),
        head_hidden: env_or("HEAD_HIDDEN", 32),
        encoder_hidden: Vec::new(),
    };
    cfg.train.epochs = env_or("EPOCHS", 25);
    cfg.adapt.epochs = env_or("ADAPT_EPOCHS", 25);
    cfg.adapt.learning_rate = env_or("ADAPT_LR", 1e-3);
    cfg.jobs = env_or("JOBS", 1);
    let t = Instant::now();
    let out = run_benchmark::<f64>(&cfg)?;
    for m in [&out.staged, &out.baseline] {
        let curve: Vec<String> = m
            .curve
            .shot_counts
            .iter()
            .map(|&k| {
                let s = m.curve.stat(k, |r| r.roc_auc);
                format!("{k}:{:.3}±{:.3}", s.mean, s.sd)
            })
            .collect();
        println!(
            "{:8} val_auc={:.3} curve=[{}] knn={:.4} cv={:.4}",
            m.method.as_str(),
            m.source_val.roc_auc,
            curve.join(" "),
            m.embedding.mean_knn_radius,
            m.embedding.coefficient_of_variation
        );
    }
    println!("elapsed {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
