//! Train briefly on the obstacle-free scenario, then evaluate the saved
//! checkpoint with greedy action selection and write trajectory plots.
//!
//! ```bash
//! cargo run --example evaluate_policy
//! ```

use inverse_ppo::harness::{cmd_eval, cmd_train, ExperimentConfig};
use inverse_ppo::mdp::TrackMode;
use inverse_ppo::trainer::AdvantageMode;
use std::path::PathBuf;

fn main() {
    let scenario: PathBuf =
        concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/open_field.txt").into();
    let out = std::env::temp_dir().join("inverse-ppo-example-eval");

    let mut cfg = ExperimentConfig::new(vec![scenario], out.clone());
    cfg.trainer.seed = 3;
    cfg.trainer.max_episodes = 200;
    cfg.trainer.batch_size = 64;
    cfg.trainer.minibatch_size = 16;
    cfg.trainer.learning_rate = 1e-3;
    cfg.trainer.advantage_mode = AdvantageMode::Gae { lambda: 0.9 };
    cfg.env.track_mode = TrackMode::Heading;
    cfg.eval_episodes = 50;

    let train = cmd_train(&cfg).expect("training run");
    println!(
        "trained {} episodes; final-20 success {:.2}",
        train.rows.len(),
        train.tail_success_rate(20)
    );

    let eval = cmd_eval(&cfg, &train.checkpoint_path).expect("evaluation");
    println!(
        "greedy evaluation over {} episodes: success rate {:.2}, mean smoothness {:.4} rad",
        eval.rows.len(),
        eval.success_rate,
        eval.mean_smoothness
    );
    println!("trajectory plot: {}", eval.svg_path.display());
    println!("per-episode CSV: {}", eval.csv_path.display());
}
