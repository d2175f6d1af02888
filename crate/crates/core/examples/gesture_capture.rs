//! Air-draw one digit above the pad and watch it turn into a 28×28 image.
//!
//! ```bash
//! cargo run -p airpad-core --example gesture_capture -- 7
//! ```

use airpad_core::dataset::{synth_trajectory, trajectory_stream, SynthConfig};
use airpad_core::gesture::{estimate_distance, reconstruct, SegmenterConfig};
use airpad_core::pipeline::{capture, trace_to_image};
use airpad_core::sensing::{ElectrodeLayout, SensorConfig};

fn main() {
    let digit: u8 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let seed: u64 = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(1);
    let synth_cfg = SynthConfig::default();
    let sensor = SensorConfig { seed, ..Default::default() };

    let synth = synth_trajectory(digit, &synth_cfg, &mut trajectory_stream(seed, digit, 0, 0));
    println!(
        "digit {digit}: {} hand samples over {:.2} s, drawing {:.2}..{:.2} s",
        synth.samples.len(),
        synth.samples.last().unwrap().t_s,
        synth.draw_start_s,
        synth.draw_end_s
    );

    let cap = capture(&synth.trajectory(), &sensor, &ElectrodeLayout::default(), &SegmenterConfig::default())
        .expect("capture");
    println!("{} frames at 80 Hz, {} gesture(s), {} discarded", cap.frames.len(), cap.gestures.len(), cap.discarded);
    for f in cap.frames.iter().step_by(10) {
        let c = reconstruct(f);
        let dist = estimate_distance(c.z_u, sensor.lambda_cm)
            .map(|d| format!("{d:5.2} cm"))
            .unwrap_or_else(|_| "  out of range".into());
        println!(
            "t={:.3}  A={:.3} B={:.3} C={:.3} D={:.3}  x={:+.3} y={:+.3} z={:.3}  ~{dist}",
            f.t_s, f.a, f.b, f.c, f.d, c.x_u, c.y_u, c.z_u
        );
    }
    for trace in &cap.gestures {
        let img = trace_to_image(trace, Some(digit)).expect("rasterize");
        println!("\n{} points, {:.2}..{:.2} s", trace.points.len(), trace.start_t, trace.end_t);
        print!("{}", img.to_ascii());
    }
}
