//! The inverse-PPO trainer: inferring advantages, the importance ratio with
//! its optional state-marginal factor, adaptive entropy scaled by batch
//! success, the clipped composite objective, and the K-epoch minibatch
//! update loop.
//!
//! The scalar loss functions here are the reference route for every term;
//! the update loop rebuilds the same quantities on the autodiff graph and
//! the two are held together by tests.

pub mod knn;

pub use knn::knn_entropy_estimate;

use crate::mdp::StateVector;
use crate::nn::networks::{self, NetNodes};
use crate::nn::{backward_and_step, Adam, Graph, NetworkParameters, NodeId, Tensor};
use crate::rollout::{normalize_advantages, RolloutBuffer};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Bounds applied to the importance ratio for numerical safety.
pub const RATIO_CLAMP: (f64, f64) = (1e-8, 1e8);

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss in epoch {epoch}, minibatch {minibatch}; update aborted")]
    NonFiniteLoss {
        epoch: usize,
        minibatch: usize,
        report: LossReport,
    },
    #[error("state-ratio mode is `provided` but no estimator was passed")]
    MissingEstimator,
    #[error("buffer is missing returns/advantages; prepare it before update")]
    UnpreparedBuffer,
}

/// How advantages are estimated from returns and values.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum AdvantageMode {
    /// Empirical discounted return-to-go minus the critic value.
    ReturnsMinusValue,
    /// Generalized advantage estimation with the given lambda.
    Gae { lambda: f64 },
}

/// How the entropy bonus is weighted.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum EntropyMode {
    /// Scale the batch entropy by the success fraction `M_s / episodes`.
    Adaptive,
    /// Constant coefficient replacing the adaptive scale and `w2`.
    Fixed { coefficient: f64 },
}

/// How the state-marginal factor of the importance ratio is obtained.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum StateRatioMode {
    /// Assume the marginals cancel (factor 1).
    Unity,
    /// Query a caller-provided estimator per state.
    Provided,
}

/// Pluggable estimator for the state-marginal probability ratio.
pub trait StateRatioEstimator {
    fn state_ratio(&self, state: &StateVector) -> f64;
}

/// All trainer hyperparameters.
#[derive(Clone, Debug)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub clip_epsilon: f64,
    /// K: optimization epochs per collected batch.
    pub epochs: usize,
    pub batch_size: usize,
    pub minibatch_size: usize,
    /// w1: value-loss weight.
    pub value_loss_weight: f64,
    /// w2: entropy weight (adaptive mode).
    pub entropy_weight: f64,
    pub learning_rate: f64,
    pub max_episodes: u64,
    pub max_steps_per_episode: usize,
    pub advantage_mode: AdvantageMode,
    pub entropy_mode: EntropyMode,
    pub state_ratio_mode: StateRatioMode,
    pub normalize_advantages: bool,
    pub seed: u64,
}

impl TrainerConfig {
    /// Check the numeric invariants; returns the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err("gamma must lie in (0, 1]".into());
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err("clip epsilon must lie in (0, 1)".into());
        }
        if self.epochs == 0 || self.batch_size == 0 || self.minibatch_size == 0 {
            return Err("epochs, batch size, and minibatch size must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            return Err("learning rate must be positive".into());
        }
        if !(self.value_loss_weight >= 0.0 && self.entropy_weight >= 0.0) {
            return Err("loss weights must be non-negative".into());
        }
        if let AdvantageMode::Gae { lambda } = self.advantage_mode {
            if !(0.0..=1.0).contains(&lambda) {
                return Err("GAE lambda must lie in [0, 1]".into());
            }
        }
        if let EntropyMode::Fixed { coefficient } = self.entropy_mode {
            if !(coefficient >= 0.0) {
                return Err("fixed entropy coefficient must be non-negative".into());
            }
        }
        Ok(())
    }
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            gamma: 0.95,
            clip_epsilon: 0.3,
            epochs: 2,
            batch_size: 2048,
            minibatch_size: 256,
            value_loss_weight: 0.5,
            entropy_weight: 0.1,
            learning_rate: 3e-4,
            max_episodes: 3000,
            max_steps_per_episode: 60,
            advantage_mode: AdvantageMode::ReturnsMinusValue,
            entropy_mode: EntropyMode::Adaptive,
            state_ratio_mode: StateRatioMode::Unity,
            normalize_advantages: true,
            seed: 0,
        }
    }
}

/// Per-epoch summary of the composite objective.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct LossReport {
    pub l_clip: f64,
    pub l_vf: f64,
    /// The entropy term as it enters the objective (already carrying the
    /// adaptive scale in adaptive mode).
    pub l_ent: f64,
    pub l_inverse: f64,
    /// Multiplier applied to `l_ent` in the objective: `w2` in adaptive
    /// mode, the fixed coefficient otherwise.
    pub entropy_coeff: f64,
    /// Success fraction `M_s / episodes` of the batch.
    pub ms_ratio: f64,
    pub grad_norm: f64,
}

/// Discounted return-to-go per transition, segmented by episode bounds; no
/// bootstrapping across episode ends.
pub fn returns_to_go(rewards: &[f64], bounds: &[(usize, usize)], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    for &(start, end) in bounds {
        let mut acc = 0.0;
        for t in (start..end).rev() {
            acc = rewards[t] + gamma * acc;
            out[t] = acc;
        }
    }
    out
}

/// The inferring advantage: return-to-go minus the critic value, or GAE
/// when configured. Episode ends are not bootstrapped.
pub fn inferring_advantage(
    returns: &[f64],
    values_old: &[f64],
    bounds: &[(usize, usize)],
    mode: AdvantageMode,
    gamma: f64,
) -> Vec<f64> {
    assert_eq!(returns.len(), values_old.len(), "length mismatch");
    match mode {
        AdvantageMode::ReturnsMinusValue => returns
            .iter()
            .zip(values_old)
            .map(|(g, v)| g - v)
            .collect(),
        AdvantageMode::Gae { lambda } => {
            let mut out = vec![0.0; returns.len()];
            for &(start, end) in bounds {
                let mut acc = 0.0;
                for t in (start..end).rev() {
                    // Per-step reward and next value recovered from the
                    // return recurrence; terminal steps have no successor.
                    let (next_return, next_value) = if t + 1 < end {
                        (returns[t + 1], values_old[t + 1])
                    } else {
                        (0.0, 0.0)
                    };
                    let reward = returns[t] - gamma * next_return;
                    let delta = reward + gamma * next_value - values_old[t];
                    acc = delta + gamma * lambda * acc;
                    out[t] = acc;
                }
            }
            out
        }
    }
}

/// Eq. 18 ratio: `exp(log_prob_new - log_prob_old) * state_ratio`, clamped
/// for numerical safety.
pub fn importance_ratio(log_prob_new: f64, log_prob_old: f64, state_ratio: f64) -> f64 {
    ((log_prob_new - log_prob_old).exp() * state_ratio).clamp(RATIO_CLAMP.0, RATIO_CLAMP.1)
}

/// Batch entropy scaled by the success fraction. Returns
/// `(L_ent, M_s / episode_count)`.
pub fn adaptive_entropy(
    entropies: &[f64],
    m_s: usize,
    episode_count: usize,
) -> (f64, f64) {
    assert!(episode_count >= 1, "episode count must be at least 1");
    assert!(m_s <= episode_count, "more successes than episodes");
    let scale = m_s as f64 / episode_count as f64;
    if entropies.is_empty() {
        return (0.0, scale);
    }
    let mean = entropies.iter().sum::<f64>() / entropies.len() as f64;
    (scale * mean, scale)
}

/// Eq. 27: mean of `min(ratio * A, clip(ratio, 1-eps, 1+eps) * A)`.
pub fn clipped_surrogate(ratios: &[f64], advantages: &[f64], epsilon: f64) -> f64 {
    assert_eq!(ratios.len(), advantages.len(), "length mismatch");
    assert!(!ratios.is_empty(), "empty batch");
    ratios
        .iter()
        .zip(advantages)
        .map(|(&r, &a)| (r * a).min(r.clamp(1.0 - epsilon, 1.0 + epsilon) * a))
        .sum::<f64>()
        / ratios.len() as f64
}

/// Eq. 28: mean squared error between new values and targets.
pub fn value_loss(values_new: &[f64], value_targets: &[f64]) -> f64 {
    assert_eq!(values_new.len(), value_targets.len(), "length mismatch");
    assert!(!values_new.is_empty(), "empty batch");
    values_new
        .iter()
        .zip(value_targets)
        .map(|(v, t)| (v - t) * (v - t))
        .sum::<f64>()
        / values_new.len() as f64
}

/// Eq. 30: `L_clip - w1 * L_vf + w2 * L_ent`.
pub fn total_objective(l_clip: f64, l_vf: f64, l_ent: f64, w1: f64, w2: f64) -> f64 {
    l_clip - w1 * l_vf + w2 * l_ent
}

/// Populate returns-to-go and advantages on a collected buffer.
pub fn prepare_buffer(buffer: &mut RolloutBuffer, config: &TrainerConfig) {
    let rewards: Vec<f64> = buffer
        .transitions
        .iter()
        .map(|t| t.reward.r_total)
        .collect();
    buffer.returns_to_go = returns_to_go(&rewards, &buffer.episode_bounds, config.gamma);
    let values: Vec<f64> = buffer.transitions.iter().map(|t| t.value_old).collect();
    buffer.advantages = inferring_advantage(
        &buffer.returns_to_go,
        &values,
        &buffer.episode_bounds,
        config.advantage_mode,
        config.gamma,
    );
    if config.normalize_advantages {
        normalize_advantages(&mut buffer.advantages);
    }
}

/// One minibatch of objective inputs gathered from a prepared buffer.
pub struct ObjectiveBatch {
    pub states: Tensor,
    pub actions: Vec<usize>,
    pub log_probs_old: Vec<f64>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    pub state_ratios: Vec<f64>,
    /// Scale on the mean entropy: success fraction (adaptive) or 1 (fixed).
    pub entropy_scale: f64,
    /// Multiplier on the scaled entropy term in Eq. 30.
    pub entropy_coeff: f64,
    pub value_loss_weight: f64,
    pub clip_epsilon: f64,
}

/// Graph handles for each objective term.
pub struct ObjectiveNodes {
    pub ratios: NodeId,
    pub l_clip: NodeId,
    pub l_vf: NodeId,
    pub l_ent: NodeId,
    pub l_inverse: NodeId,
}

/// Build the composite objective for one minibatch on the graph.
pub fn objective_nodes(
    g: &mut Graph,
    nets: &NetNodes,
    data: &ObjectiveBatch,
) -> ObjectiveNodes {
    let states = g.constant(data.states.clone());
    let logits = networks::policy_logits_nodes(g, nets, states);
    let log_softmax = g.log_softmax_rows(logits);

    // Importance ratios (Eq. 18).
    let lp_new = g.gather_rows(log_softmax, data.actions.clone());
    let lp_old = g.constant(Tensor::from_vec(data.log_probs_old.clone()));
    let diff = g.sub(lp_new, lp_old);
    let raw_ratio = g.exp(diff);
    let marginal = g.constant(Tensor::from_vec(data.state_ratios.clone()));
    let weighted = g.mul(raw_ratio, marginal);
    let ratios = g.clamp(weighted, RATIO_CLAMP.0, RATIO_CLAMP.1);

    // Clipped surrogate (Eq. 27).
    let adv = g.constant(Tensor::from_vec(data.advantages.clone()));
    let surr_raw = g.mul(ratios, adv);
    let clipped = g.clamp(ratios, 1.0 - data.clip_epsilon, 1.0 + data.clip_epsilon);
    let surr_clip = g.mul(clipped, adv);
    let pessimistic = g.min_elem(surr_raw, surr_clip);
    let l_clip = g.mean_all(pessimistic);

    // Value loss (Eq. 28).
    let values = networks::value_nodes(g, nets, states);
    let targets = g.constant(Tensor::from_vec(data.value_targets.clone()));
    let vdiff = g.sub(values, targets);
    let vsq = g.mul(vdiff, vdiff);
    let l_vf = g.mean_all(vsq);

    // Entropy term (Eq. 29 with the Eq. 20 scale).
    let probs = g.exp(log_softmax);
    let plogp = g.mul(probs, log_softmax);
    let row_sums = g.sum_rows(plogp);
    let neg_ent = g.mean_all(row_sums);
    let mean_ent = g.scale(neg_ent, -1.0);
    let l_ent = g.scale(mean_ent, data.entropy_scale);

    // Eq. 30.
    let vterm = g.scale(l_vf, -data.value_loss_weight);
    let eterm = g.scale(l_ent, data.entropy_coeff);
    let partial = g.add(l_clip, vterm);
    let l_inverse = g.add(partial, eterm);

    ObjectiveNodes {
        ratios,
        l_clip,
        l_vf,
        l_ent,
        l_inverse,
    }
}

/// Gather objective inputs for the given transition indices.
pub fn gather_objective_batch(
    buffer: &RolloutBuffer,
    indices: &[usize],
    config: &TrainerConfig,
    estimator: Option<&dyn StateRatioEstimator>,
) -> ObjectiveBatch {
    let state_dim = buffer.transitions[indices[0]].state.len();
    let mut states = Vec::with_capacity(indices.len() * state_dim);
    let mut actions = Vec::with_capacity(indices.len());
    let mut log_probs_old = Vec::with_capacity(indices.len());
    let mut advantages = Vec::with_capacity(indices.len());
    let mut value_targets = Vec::with_capacity(indices.len());
    let mut state_ratios = Vec::with_capacity(indices.len());
    for &i in indices {
        let t = &buffer.transitions[i];
        states.extend_from_slice(t.state.values());
        actions.push(t.action);
        log_probs_old.push(t.log_prob_old);
        advantages.push(buffer.advantages[i]);
        value_targets.push(buffer.returns_to_go[i]);
        state_ratios.push(match estimator {
            Some(e) => e.state_ratio(&t.state),
            None => 1.0,
        });
    }
    let (entropy_scale, entropy_coeff) = match config.entropy_mode {
        EntropyMode::Adaptive => (buffer.success_fraction(), config.entropy_weight),
        EntropyMode::Fixed { coefficient } => (1.0, coefficient),
    };
    ObjectiveBatch {
        states: Tensor::new(vec![indices.len(), state_dim], states),
        actions,
        log_probs_old,
        advantages,
        value_targets,
        state_ratios,
        entropy_scale,
        entropy_coeff,
        value_loss_weight: config.value_loss_weight,
        clip_epsilon: config.clip_epsilon,
    }
}

/// Run K epochs of deterministic shuffled minibatches over the buffer,
/// maximizing Eq. 30 by stepping on its negation. Returns one report per
/// epoch; a non-finite loss aborts with the offending diagnostic.
pub fn update(
    buffer: &RolloutBuffer,
    params: &mut NetworkParameters,
    optimizer: &mut Adam,
    config: &TrainerConfig,
    estimator: Option<&dyn StateRatioEstimator>,
) -> Result<Vec<LossReport>, TrainError> {
    let n = buffer.len();
    if buffer.returns_to_go.len() != n || buffer.advantages.len() != n || n == 0 {
        return Err(TrainError::UnpreparedBuffer);
    }
    if config.state_ratio_mode == StateRatioMode::Provided && estimator.is_none() {
        return Err(TrainError::MissingEstimator);
    }
    let estimator = match config.state_ratio_mode {
        StateRatioMode::Unity => None,
        StateRatioMode::Provided => estimator,
    };

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(
        config.seed ^ optimizer.step_count().wrapping_mul(0x9e3779b97f4a7c15),
    );
    let ms_ratio = buffer.success_fraction();
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);

        let mut sums = LossReport::default();
        let mut seen = 0usize;
        for (mb_index, chunk) in order.chunks(config.minibatch_size.max(1)).enumerate() {
            let data = gather_objective_batch(buffer, chunk, config, estimator);
            let mut g = Graph::new();
            let bound = params.bind(&mut g, |n| n.starts_with("pi.") || n.starts_with("vf."));
            let nets = NetNodes::trainable(params, &bound);
            let nodes = objective_nodes(&mut g, &nets, &data);

            let report = LossReport {
                l_clip: g.value(nodes.l_clip).item(),
                l_vf: g.value(nodes.l_vf).item(),
                l_ent: g.value(nodes.l_ent).item(),
                l_inverse: g.value(nodes.l_inverse).item(),
                entropy_coeff: data.entropy_coeff,
                ms_ratio,
                grad_norm: 0.0,
            };
            if !report.l_inverse.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    minibatch: mb_index,
                    report,
                });
            }

            let loss = g.scale(nodes.l_inverse, -1.0);
            let grad_norm = backward_and_step(&mut g, loss, &bound, params, optimizer);

            let w = chunk.len() as f64;
            sums.l_clip += report.l_clip * w;
            sums.l_vf += report.l_vf * w;
            sums.l_ent += report.l_ent * w;
            sums.l_inverse += report.l_inverse * w;
            sums.grad_norm += grad_norm * w;
            seen += chunk.len();
        }

        let w = seen as f64;
        reports.push(LossReport {
            l_clip: sums.l_clip / w,
            l_vf: sums.l_vf / w,
            l_ent: sums.l_ent / w,
            l_inverse: sums.l_inverse / w,
            entropy_coeff: match config.entropy_mode {
                EntropyMode::Adaptive => config.entropy_weight,
                EntropyMode::Fixed { coefficient } => coefficient,
            },
            ms_ratio,
            grad_norm: sums.grad_norm / w,
        });
    }
    Ok(reports)
}
