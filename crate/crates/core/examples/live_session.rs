//! Drive a streaming session with hand samples, the same way the WebSocket
//! endpoint does, and print the outbound events.
//!
//! ```bash
//! cargo run -p airpad-core --example live_session -- model.apnn
//! ```

use std::sync::Arc;

use airpad_core::dataset::{synth_trajectory, trajectory_stream, SynthConfig};
use airpad_core::gesture::SegmenterConfig;
use airpad_core::nn::{load_model, ModelBundle, Recipe};
use airpad_core::sensing::SensorConfig;
use airpad_core::session::{Session, StreamMessage};

fn main() {
    let model = match std::env::args().nth(1) {
        Some(path) => load_model(&path).expect("load model"),
        None => {
            eprintln!("no model given, using an untrained mlp");
            ModelBundle::untrained(Recipe::Mlp, 0).unwrap()
        }
    };
    let mut session = Session::new(1, SensorConfig::default(), SegmenterConfig::default(), Some(Arc::new(model))).unwrap();

    for digit in [2u8, 7] {
        let synth = synth_trajectory(digit, &SynthConfig::default(), &mut trajectory_stream(9, digit, 0, 0));
        let mut channels = 0;
        let mut points = 0;
        for s in synth.samples.iter().step_by(4) {
            let msg = StreamMessage::HandSample { t: s.t_s, x: s.x_cm, y: s.y_cm, z: s.z_cm };
            for out in session.handle(msg) {
                match out {
                    StreamMessage::Channels { .. } => channels += 1,
                    StreamMessage::TracePoint { .. } => points += 1,
                    StreamMessage::Classification { digit: d, confidence, .. } => {
                        println!("drew {digit}: classified {d} ({:.1}%)", 100.0 * confidence)
                    }
                    other => println!("{}", other.to_json()),
                }
            }
        }
        println!("  {channels} channel frames, {points} trace points");
        session.handle(StreamMessage::Reset);
    }
}
