//! A miniature of the entropy ablation: fixed coefficients 0.01 and 0.001
//! versus the success-scaled adaptive bonus, compared by final training
//! return on one seed.
//!
//! The full-size version runs through `inverse-ppo ablate --mode entropy`.
//!
//! ```bash
//! cargo run --example ablation_entropy
//! ```

use inverse_ppo::harness::{cmd_ablate, AblationMode, ExperimentConfig};
use inverse_ppo::mdp::TrackMode;
use inverse_ppo::trainer::AdvantageMode;
use std::path::PathBuf;

fn main() {
    let scenario: PathBuf =
        concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/open_field.txt").into();
    let out = std::env::temp_dir().join("inverse-ppo-example-ablate-entropy");

    let mut cfg = ExperimentConfig::new(vec![scenario], out);
    cfg.trainer.seed = 1;
    cfg.trainer.max_episodes = 200;
    cfg.trainer.batch_size = 64;
    cfg.trainer.minibatch_size = 16;
    cfg.trainer.learning_rate = 1e-3;
    cfg.trainer.advantage_mode = AdvantageMode::Gae { lambda: 0.9 };
    cfg.env.track_mode = TrackMode::Heading;
    cfg.eval_episodes = 30;

    let summary = cmd_ablate(&cfg, AblationMode::Entropy).expect("ablation");
    println!("variant          final-100 mean return   eval success");
    for (i, name) in summary.variants.iter().enumerate() {
        println!(
            "{name:16} {:>18.2} {:>14.2}",
            summary.final_returns[i], summary.eval_success[i]
        );
    }
    println!("\ncomparison CSV: {}", summary.comparison_path.display());
}
