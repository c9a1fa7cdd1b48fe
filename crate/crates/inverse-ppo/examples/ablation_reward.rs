//! A miniature of the reward ablation: distance-only versus the full
//! four-term reward on one seed, compared by evaluated smoothness.
//!
//! The full-size version runs through `inverse-ppo ablate --mode reward`.
//!
//! ```bash
//! cargo run --example ablation_reward
//! ```

use inverse_ppo::harness::{cmd_ablate, AblationMode, ExperimentConfig};
use inverse_ppo::mdp::TrackMode;
use inverse_ppo::trainer::AdvantageMode;
use std::path::PathBuf;

fn main() {
    let scenario: PathBuf =
        concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/corridor5.txt").into();
    let out = std::env::temp_dir().join("inverse-ppo-example-ablate-reward");

    let mut cfg = ExperimentConfig::new(vec![scenario], out);
    cfg.trainer.seed = 0;
    cfg.trainer.max_episodes = 300;
    cfg.trainer.batch_size = 128;
    cfg.trainer.minibatch_size = 32;
    cfg.trainer.learning_rate = 1e-3;
    cfg.trainer.advantage_mode = AdvantageMode::Gae { lambda: 0.9 };
    cfg.env.track_mode = TrackMode::Heading;
    cfg.eval_episodes = 40;

    let summary = cmd_ablate(&cfg, AblationMode::Reward).expect("ablation");
    println!("variant            eval smoothness   eval success   final-100 return");
    for (i, name) in summary.variants.iter().enumerate() {
        println!(
            "{name:18} {:>12.4} {:>14.2} {:>18.2}",
            summary.eval_smoothness[i], summary.eval_success[i], summary.final_returns[i]
        );
    }
    println!("\ncomparison CSV: {}", summary.comparison_path.display());
    println!("lower smoothness = fewer abrupt heading changes per decision");
}
