//! Random rotation, zoom and shift applied to one synthetic digit.
//!
//! ```bash
//! cargo run -p airpad-core --example augmentation -- 4
//! ```

use airpad_core::dataset::{augment_with, synth_trajectory, trajectory_stream, AugmentConfig, AugmentParams, SynthConfig};
use airpad_core::gesture::SegmenterConfig;
use airpad_core::pipeline::{capture, trace_to_image};
use airpad_core::sensing::{ElectrodeLayout, SensorConfig};
use rand::SeedableRng;

fn main() {
    let digit: u8 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let synth = synth_trajectory(digit, &SynthConfig::default(), &mut trajectory_stream(3, digit, 0, 0));
    let cap = capture(&synth.trajectory(), &SensorConfig::default(), &ElectrodeLayout::default(), &SegmenterConfig::default())
        .expect("capture");
    let img = trace_to_image(&cap.gestures[0], Some(digit)).expect("rasterize").quantized();

    println!("original");
    print!("{}", img.to_ascii());
    let fixed = [
        AugmentParams { rotation_deg: 90.0, ..AugmentParams::IDENTITY },
        AugmentParams { zoom: 0.8, ..AugmentParams::IDENTITY },
        AugmentParams { shift_x: 0.1, shift_y: -0.1, ..AugmentParams::IDENTITY },
    ];
    for p in fixed {
        println!("\n{p:?}");
        print!("{}", augment_with(&img, &p).to_ascii());
    }

    let cfg = AugmentConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for _ in 0..2 {
        let p = cfg.sample(&mut rng);
        println!("\nrandom {p:?}");
        print!("{}", augment_with(&img, &p).to_ascii());
    }
}
