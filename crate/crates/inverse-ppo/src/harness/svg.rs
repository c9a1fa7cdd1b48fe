//! SVG rendering of flown trajectories over the obstacle field.

use crate::world::{ScenarioSpec, Vec2};
use std::fmt::Write;

/// One flown path, colored by outcome.
pub struct EpisodePath {
    pub points: Vec<Vec2>,
    pub success: bool,
}

const VIEW_WIDTH: f64 = 900.0;
const MARGIN: f64 = 20.0;

struct Mapper {
    scale: f64,
    x0: f64,
    y1: f64,
}

impl Mapper {
    fn x(&self, wx: f64) -> f64 {
        MARGIN + (wx - self.x0) * self.scale
    }
    // SVG y grows downward; world y grows upward.
    fn y(&self, wy: f64) -> f64 {
        MARGIN + (self.y1 - wy) * self.scale
    }
}

/// World-to-viewport linear map, obstacles as shapes, the expected
/// start-to-target line dashed, flown paths as solid polylines (one per
/// episode, green for successes and red otherwise).
pub fn trajectories_svg(spec: &ScenarioSpec, episodes: &[EpisodePath]) -> String {
    let m = Mapper {
        scale: (VIEW_WIDTH - 2.0 * MARGIN) / spec.bounds.width(),
        x0: spec.bounds.min.x,
        y1: spec.bounds.max.y,
    };
    let height = spec.bounds.height() * m.scale + 2.0 * MARGIN;

    let mut s = String::new();
    writeln!(
        &mut s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{VIEW_WIDTH}\" height=\"{height:.1}\" viewBox=\"0 0 {VIEW_WIDTH} {height:.1}\">"
    )
    .unwrap();
    writeln!(
        &mut s,
        "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#fcfcfc\" stroke=\"#333\" stroke-width=\"1\"/>",
        m.x(spec.bounds.min.x),
        m.y(spec.bounds.max.y),
        spec.bounds.width() * m.scale,
        spec.bounds.height() * m.scale
    )
    .unwrap();

    for c in &spec.field.circles {
        writeln!(
            &mut s,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"#b0b6bd\" stroke=\"#555\"/>",
            m.x(c.center.x),
            m.y(c.center.y),
            c.radius * m.scale
        )
        .unwrap();
    }
    for b in &spec.field.boxes {
        writeln!(
            &mut s,
            "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#b0b6bd\" stroke=\"#555\"/>",
            m.x(b.min.x),
            m.y(b.max.y),
            b.width() * m.scale,
            b.height() * m.scale
        )
        .unwrap();
    }

    // Expected straight line from start to target.
    writeln!(
        &mut s,
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#4455cc\" stroke-width=\"1.5\" stroke-dasharray=\"8 5\"/>",
        m.x(spec.start_position.x),
        m.y(spec.start_position.y),
        m.x(spec.target.x),
        m.y(spec.target.y)
    )
    .unwrap();

    for ep in episodes {
        let mut pts = String::new();
        for p in &ep.points {
            write!(&mut pts, "{:.2},{:.2} ", m.x(p.x), m.y(p.y)).unwrap();
        }
        let color = if ep.success { "#2a9d3a" } else { "#cc3333" };
        writeln!(
            &mut s,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" opacity=\"0.55\"/>",
            pts.trim_end()
        )
        .unwrap();
    }

    // Start and target markers.
    writeln!(
        &mut s,
        "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#cc2222\"/>",
        m.x(spec.start_position.x),
        m.y(spec.start_position.y)
    )
    .unwrap();
    writeln!(
        &mut s,
        "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"#d4a017\" stroke-width=\"1.5\"/>",
        m.x(spec.target.x),
        m.y(spec.target.y),
        spec.capture_radius * m.scale
    )
    .unwrap();
    writeln!(
        &mut s,
        "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#d4a017\"/>",
        m.x(spec.target.x),
        m.y(spec.target.y)
    )
    .unwrap();

    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::load_scenario;

    #[test]
    fn svg_contains_one_polyline_per_episode_and_the_obstacles() {
        let spec = load_scenario(
            "bounds: -100 -300 1100 300\nstart: 0 0 0\ntarget: 700 0\ncircle: 140 0 35\nbox: 300 50 400 120\n",
        )
        .unwrap();
        let episodes = vec![
            EpisodePath {
                points: vec![Vec2::ZERO, Vec2::new(50.0, 3.0), Vec2::new(100.0, -4.0)],
                success: true,
            },
            EpisodePath {
                points: vec![Vec2::ZERO, Vec2::new(40.0, -10.0)],
                success: false,
            },
        ];
        let svg = trajectories_svg(&spec, &episodes);
        assert_eq!(svg.matches("<polyline").count(), 2);
        // One obstacle circle + start marker + capture ring + target marker.
        assert_eq!(svg.matches("<circle").count(), 4);
        // Bounds rectangle + one box obstacle.
        assert_eq!(svg.matches("<rect").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
