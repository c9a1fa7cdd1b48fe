//! Scenario file parsing, validation, and serialization.
//!
//! A scenario is UTF-8 text, one declaration per line:
//!
//! ```text
//! # comment
//! start: x y yaw
//! target: x y
//! capture_radius: r
//! d_max: v
//! max_steps: n
//! bounds: xmin ymin xmax ymax
//! circle: cx cy r
//! box: xmin ymin xmax ymax
//! ```
//!
//! Units are meters and radians. `bounds`, `start`, and `target` are
//! required; the rest have defaults.

use super::geom::{Aabb, Circle, Vec2};
use super::{ObstacleField, UavKinematicState, WorldError};

pub const DEFAULT_CAPTURE_RADIUS: f64 = 15.0;
pub const DEFAULT_D_MAX: f64 = 1300.0;
pub const DEFAULT_MAX_STEPS: usize = 60;

/// A validated scenario: obstacle field, start pose, target, and limits.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub field: ObstacleField,
    pub bounds: Aabb,
    pub start_position: Vec2,
    pub start_yaw: f64,
    pub target: Vec2,
    pub capture_radius: f64,
    pub d_max: f64,
    pub max_steps: usize,
}

impl ScenarioSpec {
    pub fn start_state(&self, speed: f64) -> UavKinematicState {
        UavKinematicState::new(self.start_position, self.start_yaw, speed)
    }

    /// Initial straight-line distance from start to target.
    pub fn start_distance(&self) -> f64 {
        self.start_position.distance(self.target)
    }

    /// Check every structural invariant, naming the first violation.
    pub fn validate(&self) -> Result<(), WorldError> {
        let err = |m: String| Err(WorldError::Validation(m));
        if self.bounds.width() <= 0.0 || self.bounds.height() <= 0.0 {
            return err("bounds must have positive area".into());
        }
        for (i, c) in self.field.circles.iter().enumerate() {
            if !(c.radius > 0.0) {
                return err(format!("circle {i} has non-positive radius"));
            }
            if !self.bounds.contains_circle(c) {
                return err(format!("circle {i} extends outside world bounds"));
            }
        }
        for (i, b) in self.field.boxes.iter().enumerate() {
            if b.width() <= 0.0 || b.height() <= 0.0 {
                return err(format!("box {i} has non-positive area"));
            }
            if !self.bounds.contains_aabb(b) {
                return err(format!("box {i} extends outside world bounds"));
            }
        }
        if !(self.capture_radius > 0.0) {
            return err("capture_radius must be positive".into());
        }
        if !(self.d_max > 0.0) {
            return err("d_max must be positive".into());
        }
        if self.max_steps == 0 {
            return err("max_steps must be at least 1".into());
        }
        if !self.bounds.contains_closed(self.start_position) {
            return err("start outside world bounds".into());
        }
        if !self.bounds.contains_closed(self.target) {
            return err("target outside world bounds".into());
        }
        if self.field.collides(self.start_position) {
            return err("start in collision".into());
        }
        if self.field.collides(self.target) {
            return err("target in collision".into());
        }
        if self.start_distance() > self.d_max {
            return err(format!(
                "start-target distance {:.1} exceeds d_max {:.1}",
                self.start_distance(),
                self.d_max
            ));
        }
        Ok(())
    }

    /// Serialize back to the scenario text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "bounds: {} {} {} {}\n",
            self.bounds.min.x, self.bounds.min.y, self.bounds.max.x, self.bounds.max.y
        ));
        s.push_str(&format!(
            "start: {} {} {}\n",
            self.start_position.x, self.start_position.y, self.start_yaw
        ));
        s.push_str(&format!("target: {} {}\n", self.target.x, self.target.y));
        s.push_str(&format!("capture_radius: {}\n", self.capture_radius));
        s.push_str(&format!("d_max: {}\n", self.d_max));
        s.push_str(&format!("max_steps: {}\n", self.max_steps));
        for c in &self.field.circles {
            s.push_str(&format!("circle: {} {} {}\n", c.center.x, c.center.y, c.radius));
        }
        for b in &self.field.boxes {
            s.push_str(&format!("box: {} {} {} {}\n", b.min.x, b.min.y, b.max.x, b.max.y));
        }
        s
    }
}

/// Parse and validate scenario text.
pub fn load_scenario(text: &str) -> Result<ScenarioSpec, WorldError> {
    let mut start: Option<(Vec2, f64)> = None;
    let mut target: Option<Vec2> = None;
    let mut bounds: Option<Aabb> = None;
    let mut capture_radius = DEFAULT_CAPTURE_RADIUS;
    let mut d_max = DEFAULT_D_MAX;
    let mut max_steps = DEFAULT_MAX_STEPS;
    let mut field = ObstacleField::default();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }

        let (key, rest) = line.split_once(':').ok_or_else(|| WorldError::Parse {
            line: line_no,
            message: "expected `key: values`".into(),
        })?;
        let nums = parse_numbers(rest, line_no)?;
        let expect = |n: usize| -> Result<(), WorldError> {
            if nums.len() == n {
                Ok(())
            } else {
                Err(WorldError::Parse {
                    line: line_no,
                    message: format!(
                        "`{}` expects {} values, found {}",
                        key.trim(),
                        n,
                        nums.len()
                    ),
                })
            }
        };

        match key.trim() {
            "start" => {
                expect(3)?;
                start = Some((Vec2::new(nums[0], nums[1]), nums[2]));
            }
            "target" => {
                expect(2)?;
                target = Some(Vec2::new(nums[0], nums[1]));
            }
            "capture_radius" => {
                expect(1)?;
                capture_radius = nums[0];
            }
            "d_max" => {
                expect(1)?;
                d_max = nums[0];
            }
            "max_steps" => {
                expect(1)?;
                if nums[0] < 0.0 || nums[0].fract() != 0.0 {
                    return Err(WorldError::Parse {
                        line: line_no,
                        message: "`max_steps` expects a non-negative integer".into(),
                    });
                }
                max_steps = nums[0] as usize;
            }
            "bounds" => {
                expect(4)?;
                bounds = Some(Aabb::new(
                    Vec2::new(nums[0], nums[1]),
                    Vec2::new(nums[2], nums[3]),
                ));
            }
            "circle" => {
                expect(3)?;
                field
                    .circles
                    .push(Circle::new(Vec2::new(nums[0], nums[1]), nums[2]));
            }
            "box" => {
                expect(4)?;
                field.boxes.push(Aabb::new(
                    Vec2::new(nums[0], nums[1]),
                    Vec2::new(nums[2], nums[3]),
                ));
            }
            other => {
                return Err(WorldError::Parse {
                    line: line_no,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
    }

    let missing = |what: &str| WorldError::Validation(format!("missing required `{what}` line"));
    let (start_position, start_yaw) = start.ok_or_else(|| missing("start"))?;
    let spec = ScenarioSpec {
        field,
        bounds: bounds.ok_or_else(|| missing("bounds"))?,
        start_position,
        start_yaw,
        target: target.ok_or_else(|| missing("target"))?,
        capture_radius,
        d_max,
        max_steps,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_numbers(s: &str, line: usize) -> Result<Vec<f64>, WorldError> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| WorldError::Parse {
                    line,
                    message: format!("`{tok}` is not a finite number"),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let text = "bounds: -100 -300 1100 300\nstart: 0 0 0\ntarget: 500 0\n";
        let spec = load_scenario(text).unwrap();
        assert!(spec.field.circles.is_empty());
        assert!(spec.field.boxes.is_empty());
        assert_eq!(spec.start_position, Vec2::ZERO);
        assert_eq!(spec.start_yaw, 0.0);
        assert_eq!(spec.target, Vec2::new(500.0, 0.0));
        assert_eq!(spec.capture_radius, DEFAULT_CAPTURE_RADIUS);
        assert_eq!(spec.d_max, DEFAULT_D_MAX);
        assert_eq!(spec.max_steps, DEFAULT_MAX_STEPS);
    }

    #[test]
    fn start_inside_circle_is_rejected() {
        let text = "bounds: -100 -100 600 100\nstart: 0 0 0\ntarget: 500 0\ncircle: 0 0 10\n";
        match load_scenario(text) {
            Err(WorldError::Validation(msg)) => assert!(msg.contains("start in collision")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_line_number() {
        let text = "bounds: -100 -100 600 100\nstart: 0 0 0\ntarget: 500 zero\n";
        match load_scenario(text) {
            Err(WorldError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let text = "bounds: 0 0 1 1\nstart: 0 0 0\ntarget: 1 1\nwind: 4\n";
        match load_scenario(text) {
            Err(WorldError::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("wind"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a scenario\n\nbounds: -10 -10 600 10 # inline\nstart: 0 0 0\ntarget: 500 0\n";
        assert!(load_scenario(text).is_ok());
    }

    #[test]
    fn distance_beyond_cap_is_rejected() {
        let text = "bounds: -10 -10 3000 10\nstart: 0 0 0\ntarget: 2000 0\n";
        match load_scenario(text) {
            Err(WorldError::Validation(msg)) => assert!(msg.contains("d_max")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn serialize_round_trips() {
        let text = "bounds: -100 -300 1100 300\nstart: 0 0 0.25\ntarget: 700 0\n\
                    capture_radius: 15\ncircle: 140 0 35\nbox: 300 50 400 120\n";
        let spec = load_scenario(text).unwrap();
        let again = load_scenario(&spec.to_text()).unwrap();
        assert_eq!(spec, again);
    }
}
