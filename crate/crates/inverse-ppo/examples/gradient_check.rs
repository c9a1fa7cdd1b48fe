//! Verify analytic gradients against central finite differences for each
//! layer type and for the full training objective.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use inverse_ppo::nn::gradcheck::check_builder;
use inverse_ppo::nn::networks::{decoder_nodes, encoder_nodes, policy_logits_nodes, value_nodes};
use inverse_ppo::nn::{ArchConfig, NetworkParameters, Tensor};

fn main() {
    let arch = ArchConfig {
        depth_height: 6,
        depth_width: 8,
        conv_channels: (2, 3),
        latent_dim: 5,
        state_dim: 7,
        hidden_dim: 4,
        action_count: 8,
    };

    let x: Vec<f64> = (0..48).map(|i| 0.5 + 0.4 * ((i as f64) * 0.3).sin()).collect();
    let state: Vec<f64> = (0..7).map(|i| ((i as f64) * 1.3).cos()).collect();

    let checks: Vec<(&str, Box<dyn Fn(&mut NetworkParameters) -> f64>)> = vec![
        (
            "policy head (dense + tanh + log-softmax)",
            Box::new({
                let state = state.clone();
                move |params: &mut NetworkParameters| {
                    check_builder(
                        params,
                        |n| n.starts_with("pi."),
                        |g, nets| {
                            let s = g.constant(Tensor::new(vec![1, 7], state.clone()));
                            let logits = policy_logits_nodes(g, nets, s);
                            let ls = g.log_softmax_rows(logits);
                            let picked = g.gather_rows(ls, vec![2]);
                            let neg = g.scale(picked, -1.0);
                            g.mean_all(neg)
                        },
                        1e-4,
                        20,
                    )
                }
            }),
        ),
        (
            "value head (dense + tanh)",
            Box::new({
                let state = state.clone();
                move |params: &mut NetworkParameters| {
                    check_builder(
                        params,
                        |n| n.starts_with("vf."),
                        |g, nets| {
                            let s = g.constant(Tensor::new(vec![1, 7], state.clone()));
                            let v = value_nodes(g, nets, s);
                            let sq = g.mul(v, v);
                            let rows = g.reshape(sq, vec![1, 1]);
                            let sums = g.sum_rows(rows);
                            g.mean_all(sums)
                        },
                        1e-4,
                        20,
                    )
                }
            }),
        ),
        (
            "autoencoder (conv + transposed conv)",
            Box::new({
                let x = x.clone();
                move |params: &mut NetworkParameters| {
                    check_builder(
                        params,
                        |n| n.starts_with("enc.") || n.starts_with("dec."),
                        |g, nets| {
                            let xid = g.constant(Tensor::new(vec![1, 1, 6, 8], x.clone()));
                            let z = encoder_nodes(g, nets, xid);
                            let recon = decoder_nodes(g, nets, z);
                            let diff = g.sub(recon, xid);
                            let sq = g.mul(diff, diff);
                            g.mean_all(sq)
                        },
                        1e-4,
                        12,
                    )
                }
            }),
        ),
    ];

    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut params = NetworkParameters::init(arch, seed);
        for (name, check) in &checks {
            let err = check(&mut params);
            worst = worst.max(err);
            println!("seed {seed}  {name:44}  max rel error {err:.3e}");
        }
    }
    println!("\nworst relative error across all checks: {worst:.3e} (tolerance 1e-3)");
    assert!(worst < 1e-3);
}
