//! Runs all four models on synthetic corpora and prints held-out accuracy per seed.
//!
//! `cargo run --release -p botprof-core --example ordering -- [delta] [accounts] [seeds]`

use std::time::Instant;

use botprof::corpus::SplitSpec;
use botprof::ensemble::TrainConfig;
use botprof::lm_embed::LmConfig;
use botprof::pipeline::{run_experiment, ExperimentConfig, ModelVariant};
use botprof::syngen::{generate, write_vectors, GenConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delta: f64 = arg(1, 0.6);
    let n: usize = arg(2, 1000);
    let seeds: u64 = arg(3, 3);
    let dir = tempfile::tempdir()?;
    for seed in 0..seeds {
        let t = Instant::now();
        let g = GenConfig {
            n_accounts: n,
            separability: delta,
            band_conditioning: 1.0,
            seed,
            ..GenConfig::default()
        };
        let corpus = generate(&g)?;
        let vectors = dir.path().join("vectors.txt");
        write_vectors(&g, 48, &vectors)?;
        let cfg = ExperimentConfig {
            lm: LmConfig {
                embedding_dim: 16,
                hidden: 16,
                epochs: 1,
                seed,
                ..LmConfig::default()
            },
            static_vectors: Some(vectors),
            split: SplitSpec::random(0.7, seed),
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let res = run_experiment(&corpus, &ModelVariant::ALL, &cfg)?;
        let cells: Vec<String> = res
            .iter()
            .map(|(v, e)| format!("{v} {:.4}/{:.4}", e.tweet.accuracy, e.account.accuracy))
            .collect();
        println!("seed {seed}: {}  ({:.1}s)", cells.join("  "), t.elapsed().as_secs_f64());
    }
    Ok(())
}
