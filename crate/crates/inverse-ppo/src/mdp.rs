//! The decision-process surface: state assembly from depth and target
//! features, the discrete action-to-waypoint mapping, and the four-term
//! reward.

use crate::nn::{encoder_forward, NetworkParameters, NnError};
use crate::world::{DepthMap, StepEvents, UavKinematicState, Vec2};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid action index {0}; actions are 0..{count}", count = ACTION_COUNT)]
    InvalidAction(usize),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Normalized target observation.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TargetFeatures {
    /// Relative distance scaled by the distance cap, clipped to [0, 1].
    pub d: f64,
    /// Bearing to the target over pi, in (-1, 1]; full-quadrant.
    pub alpha: f64,
}

/// Normalized relative distance and angle to the goal position.
///
/// Coincident points give `d = 0, alpha = 0` by convention.
pub fn target_features(p_ego: Vec2, p_target: Vec2, d_max: f64) -> TargetFeatures {
    assert!(d_max > 0.0, "d_max must be positive");
    let delta = p_target - p_ego;
    let d = (delta.norm() / d_max).clamp(0.0, 1.0);
    let alpha = if delta == Vec2::ZERO {
        0.0
    } else {
        delta.angle() / PI
    };
    TargetFeatures { d, alpha }
}

pub const ACTION_COUNT: usize = 8;

/// Desired yaw change for actions 1..=7; action 0 continues the last
/// waypoint.
pub const DELTA_YAW: [f64; 7] = [
    0.0,
    PI / 6.0,
    -PI / 6.0,
    PI / 4.0,
    -PI / 4.0,
    PI / 3.0,
    -PI / 3.0,
];

pub const DEFAULT_WAYPOINT_DISTANCE: f64 = 50.0;

/// Map a discrete action to a world-frame waypoint.
///
/// Action 0 repeats `last_waypoint`; at episode start (no prior waypoint)
/// it behaves as a zero yaw change. Actions 1..=7 place a body-frame point
/// at distance `lambda` and bearing `DELTA_YAW[action - 1]`, rotated and
/// translated into the world frame.
pub fn action_to_waypoint(
    action: usize,
    state: &UavKinematicState,
    last_waypoint: Option<Vec2>,
    lambda: f64,
) -> Result<Vec2, MdpError> {
    assert!(lambda > 0.0, "waypoint distance must be positive");
    if action >= ACTION_COUNT {
        return Err(MdpError::InvalidAction(action));
    }
    if action == 0 {
        if let Some(wp) = last_waypoint {
            return Ok(wp);
        }
    }
    let dyaw = if action == 0 { 0.0 } else { DELTA_YAW[action - 1] };
    let body = Vec2::new(lambda * dyaw.cos(), lambda * dyaw.sin());
    Ok(state.position + body.rotated(state.yaw))
}

/// Weights of the four reward terms.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RewardWeights {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            c1: 30.0,
            c2: -30.0,
            c3: 0.5,
            c4: 1.0,
        }
    }
}

impl RewardWeights {
    /// The distance-only ablation configuration.
    pub fn distance_only() -> Self {
        RewardWeights {
            c1: 0.0,
            c2: 0.0,
            c3: 1.0,
            c4: 0.0,
        }
    }
}

/// Which geometry the tracking term measures.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum TrackMode {
    /// Cosine between the take-off-anchored vectors to the target and to
    /// the aircraft.
    #[default]
    Literal,
    /// Cosine between the take-off-to-target direction and the step
    /// displacement direction.
    Heading,
}

/// One decision step's view of the episode geometry, anchored at the
/// take-off point.
#[derive(Copy, Clone, Debug)]
pub struct RewardContext {
    /// Normalized distance to the target at this step.
    pub d: f64,
    /// Aircraft position relative to the take-off point.
    pub ego_offset: Vec2,
    /// Target position relative to the take-off point (constant per
    /// episode).
    pub target_offset: Vec2,
}

/// The four reward terms and their sum.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct RewardBreakdown {
    pub r_target: f64,
    pub r_collision: f64,
    pub r_dis: f64,
    pub r_track: f64,
    pub r_total: f64,
}

/// Combine the four reward terms for one decision step.
///
/// Degenerate zero-norm vectors in the tracking cosine contribute 0.
pub fn compute_reward(
    prev: &RewardContext,
    curr: &RewardContext,
    events: &StepEvents,
    weights: &RewardWeights,
    track_mode: TrackMode,
) -> RewardBreakdown {
    let r_target = if events.reached_target { weights.c1 } else { 0.0 };
    let r_collision = if events.collided { weights.c2 } else { 0.0 };
    let r_dis = weights.c3 * (prev.d - curr.d);
    let delta = match track_mode {
        TrackMode::Literal => curr.target_offset.cosine(curr.ego_offset),
        TrackMode::Heading => curr
            .target_offset
            .cosine(curr.ego_offset - prev.ego_offset),
    };
    let r_track = weights.c4 * delta;
    RewardBreakdown {
        r_target,
        r_collision,
        r_dis,
        r_track,
        r_total: r_target + r_collision + r_dis + r_track,
    }
}

/// Latent depth features concatenated with the normalized target features.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(
            values.iter().all(|v| v.is_finite()),
            "state vector must be finite"
        );
        StateVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Assemble the full state: encoder latent, then `[d, alpha]`.
pub fn build_state(
    depth: &DepthMap,
    encoder: &NetworkParameters,
    tf: &TargetFeatures,
) -> Result<StateVector, MdpError> {
    let mut values = encoder_forward(encoder, depth)?;
    values.push(tf.d);
    values.push(tf.alpha);
    debug_assert_eq!(values.len(), encoder.arch().state_dim);
    Ok(StateVector::new(values))
}
