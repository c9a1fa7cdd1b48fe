//! Render one ray-cast depth scan as ASCII art.
//!
//! ```bash
//! cargo run --example scan_preview -- [scenario.txt]
//! ```

use inverse_ppo::world::{load_scenario, raycast_depth, SensorParams};
use std::fs;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/corridor5.txt").into());
    let spec = load_scenario(&fs::read_to_string(&path).expect("read scenario"))
        .expect("valid scenario");

    let sensor = SensorParams::default();
    let state = spec.start_state(30.0);
    let depth = raycast_depth(&state, &spec.field, &sensor).expect("raycast");

    println!(
        "depth scan from ({:.0}, {:.0}) yaw {:.2} rad, fov {:.0} deg, max range {:.0} m",
        state.position.x,
        state.position.y,
        state.yaw,
        sensor.horizontal_fov.to_degrees(),
        sensor.max_range
    );
    // Darker glyphs are closer returns.
    let ramp = [b'@', b'%', b'#', b'*', b'+', b'=', b'-', b':', b'.', b' '];
    for i in 0..sensor.height {
        let mut line = String::new();
        for j in 0..sensor.width {
            let t = depth.get(i, j) / sensor.max_range;
            let idx = ((t * (ramp.len() - 1) as f64).round() as usize).min(ramp.len() - 1);
            line.push(ramp[idx] as char);
        }
        println!("|{line}|");
    }
    let nearest = depth
        .values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    println!("nearest return: {nearest:.1} m");
}
