//! Obstacle avoidance for fixed-wing UAVs by inverse proximal policy
//! optimization, in a self-contained 2D kinematic world.
//!
//! The crate is organized around the data flow of one training iteration:
//!
//! - [`world`] — deterministic flight kinematics, scenario files, and
//!   ray-cast depth sensing;
//! - [`mdp`] — state assembly, discrete waypoint actions, and the
//!   four-term reward;
//! - [`nn`] — a minimal reverse-mode autodiff engine hosting the depth
//!   autoencoder and the policy/value heads;
//! - [`rollout`] — on-policy episode and batch collection with success
//!   bookkeeping;
//! - [`trainer`] — the clipped-surrogate objective with inferring
//!   advantages and adaptive entropy, plus a k-NN entropy diagnostic;
//! - [`harness`] — training/evaluation/ablation drivers behind the
//!   `inverse-ppo` binary, CSV metrics, and SVG trajectory plots.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod harness;
pub mod mdp;
pub mod nn;
pub mod rollout;
pub mod trainer;
pub mod world;
