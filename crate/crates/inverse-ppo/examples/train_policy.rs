//! Train the policy on the obstacle-free scenario with the smoke budget
//! and report the learning curve. Writes `training.csv` and checkpoints
//! under a temporary directory.
//!
//! ```bash
//! cargo run --example train_policy
//! ```

use inverse_ppo::harness::{cmd_train, ExperimentConfig};
use inverse_ppo::mdp::TrackMode;
use inverse_ppo::trainer::AdvantageMode;
use std::path::PathBuf;

fn main() {
    let scenario: PathBuf =
        concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/open_field.txt").into();
    let out = std::env::temp_dir().join("inverse-ppo-example-train");

    let mut cfg = ExperimentConfig::new(vec![scenario], out.clone());
    cfg.trainer.seed = 3;
    cfg.trainer.max_episodes = 200;
    cfg.trainer.batch_size = 64;
    cfg.trainer.minibatch_size = 16;
    cfg.trainer.learning_rate = 1e-3;
    cfg.trainer.advantage_mode = AdvantageMode::Gae { lambda: 0.9 };
    cfg.env.track_mode = TrackMode::Heading;

    let summary = cmd_train(&cfg).expect("training run");
    println!("trained {} episodes", summary.rows.len());
    for window in (0..summary.rows.len()).step_by(25) {
        let end = (window + 25).min(summary.rows.len());
        let rows = &summary.rows[window..end];
        let succ = rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64;
        let ret = rows.iter().map(|r| r.ret).sum::<f64>() / rows.len() as f64;
        let bar = "#".repeat((succ * 40.0) as usize);
        println!("episodes {window:4}-{end:4}  success {succ:.2}  mean return {ret:7.2}  {bar}");
    }
    println!(
        "final-20 success rate: {:.2}",
        summary.tail_success_rate(20)
    );
    println!("artifacts in {}", out.display());
}
