//! Deterministic 2D fixed-wing world: obstacle fields, turn-rate-limited
//! flight toward commanded waypoints, ray-cast depth sensing, and episode
//! termination logic.
//!
//! The aircraft flies at constant speed and constant altitude; the only
//! control authority is a bounded yaw rate. One decision step commands a
//! waypoint and integrates sub-steps of pure pursuit toward it until the
//! waypoint is captured, a terminal event fires, or the sub-step budget
//! runs out.

pub mod geom;
pub mod raycast;
pub mod scenario;

pub use geom::{ray_aabb, ray_circle, wrap_angle, Aabb, Circle, Vec2};
pub use raycast::{raycast_depth, DepthMap, SensorParams};
pub use scenario::{load_scenario, ScenarioSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("scenario parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scenario validation error: {0}")]
    Validation(String),
    #[error("non-finite input coordinates")]
    NonFinite,
    #[error("degenerate sensor parameters: {0}")]
    BadSensor(String),
}

/// Kinematic state of the aircraft.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct UavKinematicState {
    /// World position, meters.
    pub position: Vec2,
    /// Heading, radians, wrapped to (-pi, pi].
    pub yaw: f64,
    /// Airspeed, meters/second; constant within an episode.
    pub speed: f64,
}

impl UavKinematicState {
    pub fn new(position: Vec2, yaw: f64, speed: f64) -> Self {
        assert!(speed > 0.0, "speed must be strictly positive");
        UavKinematicState {
            position,
            yaw: wrap_angle(yaw),
            speed,
        }
    }
}

/// Static obstacles plus the world boundary rectangle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObstacleField {
    pub circles: Vec<Circle>,
    pub boxes: Vec<Aabb>,
}

impl ObstacleField {
    /// Strict-interior collision test against every obstacle.
    pub fn collides(&self, p: Vec2) -> bool {
        self.circles.iter().any(|c| c.contains(p)) || self.boxes.iter().any(|b| b.contains(p))
    }
}

/// Per-sub-step integration parameters for waypoint pursuit.
#[derive(Copy, Clone, Debug)]
pub struct KinematicParams {
    /// Sub-step length, seconds.
    pub dt: f64,
    /// Maximum yaw rate, radians/second.
    pub max_turn_rate: f64,
    /// Waypoint capture tolerance, meters.
    pub waypoint_tolerance: f64,
    /// Sub-step budget per decision step.
    pub max_substeps: usize,
}

impl Default for KinematicParams {
    fn default() -> Self {
        KinematicParams {
            dt: 0.1,
            // High enough that every discrete turn command keeps its waypoint
            // outside the minimum-turn circle (see docs/scenario notes); the
            // 45-degree-bank value 0.327 rad/s is available via config.
            max_turn_rate: 1.2,
            waypoint_tolerance: 10.0,
            max_substeps: 200,
        }
    }
}

/// Flags raised while flying one decision step, plus the flown polyline.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepEvents {
    pub collided: bool,
    pub reached_target: bool,
    pub exceeded_cap: bool,
    pub out_of_bounds: bool,
    /// Positions after each sub-step, in flight order.
    pub sub_path: Vec<Vec2>,
    /// Headings after each sub-step; parallel to `sub_path`.
    pub sub_yaw: Vec<f64>,
}

impl StepEvents {
    pub fn terminal(&self) -> bool {
        self.collided || self.reached_target || self.exceeded_cap || self.out_of_bounds
    }
}

/// Integrate constant-speed, turn-rate-limited pursuit of `waypoint`.
///
/// Sub-steps run until the aircraft is within `kin.waypoint_tolerance` of the
/// waypoint, a terminal event occurs, or `kin.max_substeps` is exhausted.
/// Each sub-step turns the nose by at most `max_turn_rate * dt` toward the
/// bearing to the waypoint and advances `speed * dt` along the chord of the
/// turn (the mean of old and new heading), so consecutive positions are
/// exactly `speed * dt` apart while the flown circle matches the ideal
/// constant-rate arc to second order. Collision is checked before target
/// capture within a sub-step.
pub fn step_to_waypoint(
    state: &UavKinematicState,
    waypoint: Vec2,
    spec: &ScenarioSpec,
    kin: &KinematicParams,
) -> Result<(UavKinematicState, StepEvents), WorldError> {
    if !waypoint.is_finite() || !state.position.is_finite() || !state.yaw.is_finite() {
        return Err(WorldError::NonFinite);
    }

    let mut pos = state.position;
    let mut yaw = state.yaw;
    let mut events = StepEvents::default();

    for _ in 0..kin.max_substeps {
        let bearing = (waypoint - pos).angle();
        let diff = wrap_angle(bearing - yaw);
        let max_turn = kin.max_turn_rate * kin.dt;
        let turn = diff.clamp(-max_turn, max_turn);
        pos += Vec2::from_angle(yaw + 0.5 * turn) * (state.speed * kin.dt);
        yaw = wrap_angle(yaw + turn);

        events.sub_path.push(pos);
        events.sub_yaw.push(yaw);

        if spec.field.collides(pos) {
            events.collided = true;
            break;
        }
        if pos.distance(spec.target) <= spec.capture_radius {
            events.reached_target = true;
            break;
        }
        if !spec.bounds.contains_closed(pos) {
            events.out_of_bounds = true;
            break;
        }
        if pos.distance(waypoint) <= kin.waypoint_tolerance {
            break;
        }
    }

    let final_state = UavKinematicState {
        position: pos,
        yaw,
        speed: state.speed,
    };
    Ok((final_state, events))
}

/// Evaluate the episode termination predicates for a state in isolation.
///
/// `decision_steps` counts completed decision steps and `distance_flown`
/// is the cumulative path length, both since take-off. The cap trips on
/// flown distance or distance-to-target beyond `d_max`, or on the decision
/// step budget.
pub fn check_termination(
    state: &UavKinematicState,
    spec: &ScenarioSpec,
    decision_steps: usize,
    distance_flown: f64,
) -> StepEvents {
    let p = state.position;
    let mut events = StepEvents::default();
    events.collided = spec.field.collides(p);
    events.reached_target = !events.collided && p.distance(spec.target) <= spec.capture_radius;
    events.exceeded_cap = distance_flown >= spec.d_max
        || p.distance(spec.target) > spec.d_max
        || decision_steps >= spec.max_steps;
    events.out_of_bounds = !spec.bounds.contains_closed(p);
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn open_spec() -> ScenarioSpec {
        ScenarioSpec {
            field: ObstacleField::default(),
            bounds: Aabb::new(Vec2::new(-5000.0, -5000.0), Vec2::new(5000.0, 5000.0)),
            start_position: Vec2::ZERO,
            start_yaw: 0.0,
            target: Vec2::new(4000.0, 0.0),
            capture_radius: 15.0,
            d_max: 100_000.0,
            max_steps: 60,
        }
    }

    #[test]
    fn straight_waypoint_advances_without_turning() {
        let spec = open_spec();
        let kin = KinematicParams::default();
        let state = UavKinematicState::new(Vec2::ZERO, 0.0, 30.0);
        let (out, ev) = step_to_waypoint(&state, Vec2::new(50.0, 0.0), &spec, &kin).unwrap();

        assert!(!ev.terminal());
        assert_eq!(out.yaw, 0.0);
        assert_relative_eq!(out.position.y, 0.0, epsilon = 1e-12);
        // Pursuit stops once within the 10 m capture tolerance of the
        // waypoint, one 3 m sub-step past the 40 m mark.
        assert!((out.position.x - 50.0).abs() <= kin.waypoint_tolerance + state.speed * kin.dt);
        assert!(out.position.x >= 40.0);
    }

    #[test]
    fn waypoint_inside_obstacle_collides_and_truncates_path() {
        let mut spec = open_spec();
        spec.field.circles.push(Circle::new(Vec2::new(60.0, 0.0), 12.0));
        let kin = KinematicParams::default();
        let state = UavKinematicState::new(Vec2::ZERO, 0.0, 30.0);
        let (out, ev) = step_to_waypoint(&state, Vec2::new(60.0, 0.0), &spec, &kin).unwrap();

        assert!(ev.collided);
        assert!(!ev.reached_target);
        let last = *ev.sub_path.last().unwrap();
        assert_eq!(last, out.position);
        assert!(spec.field.collides(last));
        // Every prior sub-step stayed clear.
        for p in &ev.sub_path[..ev.sub_path.len() - 1] {
            assert!(!spec.field.collides(*p));
        }
    }

    #[test]
    fn turn_rate_and_speed_bounds_hold_every_substep() {
        let spec = open_spec();
        let kin = KinematicParams::default();
        let state = UavKinematicState::new(Vec2::ZERO, 0.0, 30.0);
        let (_, ev) =
            step_to_waypoint(&state, Vec2::new(-40.0, 120.0), &spec, &kin).unwrap();

        let mut prev_pos = state.position;
        let mut prev_yaw = state.yaw;
        for (p, y) in ev.sub_path.iter().zip(&ev.sub_yaw) {
            assert!(wrap_angle(y - prev_yaw).abs() <= kin.max_turn_rate * kin.dt + 1e-9);
            assert_relative_eq!(prev_pos.distance(*p), state.speed * kin.dt, epsilon = 1e-9);
            assert!(*y > -PI && *y <= PI);
            prev_pos = *p;
            prev_yaw = *y;
        }
    }

    /// Fine-step reference run of the same pursuit law.
    fn reference_flight(
        state: &UavKinematicState,
        waypoint: Vec2,
        kin: &KinematicParams,
        duration: f64,
    ) -> Vec2 {
        let mut pos = state.position;
        let mut yaw = state.yaw;
        let steps = (duration / kin.dt).round() as usize;
        for _ in 0..steps {
            if pos.distance(waypoint) <= kin.waypoint_tolerance {
                break;
            }
            let bearing = (waypoint - pos).angle();
            let diff = wrap_angle(bearing - yaw);
            let max_turn = kin.max_turn_rate * kin.dt;
            let turn = diff.clamp(-max_turn, max_turn);
            pos += Vec2::from_angle(yaw + 0.5 * turn) * (state.speed * kin.dt);
            yaw = wrap_angle(yaw + turn);
        }
        pos
    }

    #[test]
    fn coarse_integration_tracks_fine_reference() {
        // 90-degree bearing change at the paper-era bank limit, then a long
        // straight leg: 60 s of flight total.
        let spec = ScenarioSpec {
            bounds: Aabb::new(Vec2::new(-1e5, -1e5), Vec2::new(1e5, 1e5)),
            target: Vec2::new(9e4, 9e4),
            d_max: 1e6,
            ..open_spec()
        };
        let state = UavKinematicState::new(Vec2::ZERO, 0.0, 30.0);
        let waypoint = Vec2::new(0.0, 2000.0);

        let coarse = KinematicParams {
            dt: 0.1,
            max_turn_rate: 0.327,
            waypoint_tolerance: 10.0,
            max_substeps: 600,
        };
        let (out, _) = step_to_waypoint(&state, waypoint, &spec, &coarse).unwrap();

        let fine = KinematicParams { dt: 0.001, ..coarse };
        let reference = reference_flight(&state, waypoint, &fine, 60.0);

        assert!(
            out.position.distance(reference) < 0.5,
            "coarse {:?} vs fine {:?}",
            out.position,
            reference
        );
    }

    #[test]
    fn termination_predicates() {
        let mut spec = open_spec();
        spec.field.circles.push(Circle::new(Vec2::new(100.0, 100.0), 10.0));
        spec.d_max = 500.0;
        spec.target = Vec2::new(200.0, 0.0);

        let at_target = UavKinematicState::new(spec.target, 0.0, 30.0);
        assert!(check_termination(&at_target, &spec, 0, 0.0).reached_target);

        let on_boundary =
            UavKinematicState::new(Vec2::new(100.0 + 10.0 + 0.1, 100.0), 0.0, 30.0);
        assert!(!check_termination(&on_boundary, &spec, 0, 0.0).collided);

        let inside = UavKinematicState::new(Vec2::new(100.0, 100.0), 0.0, 30.0);
        assert!(check_termination(&inside, &spec, 0, 0.0).collided);

        let far = UavKinematicState::new(Vec2::new(-400.0, 0.0), 0.0, 30.0);
        assert!(check_termination(&far, &spec, 0, 0.0).exceeded_cap);

        let capped = check_termination(&at_target, &spec, spec.max_steps, 0.0);
        assert!(capped.exceeded_cap);

        let flown_out = check_termination(&at_target, &spec, 0, spec.d_max + 1.0);
        assert!(flown_out.exceeded_cap);

        let outside = UavKinematicState::new(Vec2::new(0.0, 6000.0), 0.0, 30.0);
        assert!(check_termination(&outside, &spec, 0, 0.0).out_of_bounds);
    }

    #[test]
    fn all_discrete_turns_capture_their_waypoints() {
        // With the default turn rate, every waypoint offset from the discrete
        // action set must be reachable rather than orbited.
        let spec = open_spec();
        let kin = KinematicParams::default();
        let state = UavKinematicState::new(Vec2::ZERO, 0.0, 30.0);
        for dyaw in [
            0.0,
            PI / 6.0,
            -PI / 6.0,
            PI / 4.0,
            -PI / 4.0,
            PI / 3.0,
            -PI / 3.0,
            FRAC_PI_2, // margin beyond the action set
        ] {
            let wp = Vec2::from_angle(dyaw) * 50.0;
            let (out, ev) = step_to_waypoint(&state, wp, &spec, &kin).unwrap();
            assert!(!ev.terminal());
            assert!(
                out.position.distance(wp) <= kin.waypoint_tolerance,
                "dyaw {dyaw}: stopped {} m from waypoint",
                out.position.distance(wp)
            );
        }
    }
}
