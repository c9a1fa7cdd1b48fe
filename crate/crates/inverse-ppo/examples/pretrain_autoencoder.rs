//! Pretrain the depth autoencoder on maps gathered from random flights and
//! print the reconstruction loss curve.
//!
//! ```bash
//! cargo run --example pretrain_autoencoder
//! ```

use inverse_ppo::mdp::ACTION_COUNT;
use inverse_ppo::nn::{autoencoder_train_step, Adam, ArchConfig, NetworkParameters};
use inverse_ppo::rollout::{episode_rng, Env, EnvConfig};
use inverse_ppo::world::{load_scenario, DepthMap};
use rand::Rng;
use std::fs;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/corridor5.txt");
    let spec = load_scenario(&fs::read_to_string(path).expect("read scenario"))
        .expect("valid scenario");
    let cfg = EnvConfig::default();

    // Random-policy rollouts provide the training corpus.
    let mut maps: Vec<DepthMap> = Vec::new();
    let mut episode = 0;
    while maps.len() < 256 {
        let mut rng = episode_rng(42, episode);
        let mut env = Env::new(&spec, &cfg);
        env.reset(&mut rng);
        loop {
            let (depth, _) = env.observe().expect("observe");
            maps.push(depth);
            if maps.len() >= 256 {
                break;
            }
            let action = rng.gen_range(0..ACTION_COUNT);
            if env.step(action).expect("step").done {
                break;
            }
        }
        episode += 1;
    }
    println!("collected {} depth maps from {} random episodes", maps.len(), episode);

    let arch = ArchConfig::for_depth(cfg.sensor.height, cfg.sensor.width);
    let mut params = NetworkParameters::init(arch, 7);
    let mut opt = Adam::for_selected(&params, 1e-3, |n| {
        n.starts_with("enc.") || n.starts_with("dec.")
    });
    let mut rng = episode_rng(42, u64::MAX);
    for step in 0..150 {
        let batch: Vec<&DepthMap> = (0..32).map(|_| &maps[rng.gen_range(0..maps.len())]).collect();
        let loss = autoencoder_train_step(&mut params, &mut opt, &batch).expect("train step");
        if step % 15 == 0 {
            let bar = "#".repeat((loss * 400.0).min(60.0) as usize);
            println!("step {step:4}  loss {loss:.5}  {bar}");
        }
    }
}
