//! A depth-blind scripted controller that steers by the bearing feature
//! alone. Useful as a sanity baseline for what the learned policy must
//! beat on obstacle scenarios (the script cannot see obstacles at all).
//!
//! ```bash
//! cargo run --example scripted_baseline -- [scenario.txt]
//! ```

use inverse_ppo::mdp::target_features;
use inverse_ppo::rollout::{episode_rng, Env, EnvConfig};
use inverse_ppo::world::load_scenario;
use std::fs;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/open_field.txt").into());
    let spec = load_scenario(&fs::read_to_string(&path).expect("read scenario"))
        .expect("valid scenario");
    let cfg = EnvConfig::default();

    let episodes = 200;
    let mut successes = 0;
    let mut collisions = 0;
    for i in 0..episodes {
        let mut env = Env::new(&spec, &cfg);
        let mut rng = episode_rng(777, i);
        env.reset(&mut rng);
        loop {
            let tf = target_features(env.state().position, spec.target, spec.d_max);
            // Bang-bang homing on the bearing feature.
            let action = if tf.alpha > 0.08 {
                4
            } else if tf.alpha > 0.02 {
                2
            } else if tf.alpha < -0.08 {
                5
            } else if tf.alpha < -0.02 {
                3
            } else {
                1
            };
            let out = env.step(action).expect("step");
            if out.done {
                successes += out.success as usize;
                collisions += out.events.collided as usize;
                break;
            }
        }
    }
    println!(
        "scripted bearing-homing on {}: success {}/{episodes} ({:.2}), collisions {}",
        path.rsplit('/').next().unwrap_or(&path),
        successes,
        successes as f64 / episodes as f64,
        collisions
    );
}
