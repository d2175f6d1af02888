//! Proximity response of the four pads and the analog low-pass in front of the ADC.
//!
//! ```bash
//! cargo run -p airpad-core --example sensor_response
//! ```

use airpad_core::sensing::{channel_response, ElectrodeLayout, LowPass, Point3, SensorConfig};

fn main() {
    let cfg = SensorConfig::default();
    let layout = ElectrodeLayout::default();

    println!("hand on the central axis");
    println!("  z_cm      A       B       C       D");
    for z in [1.0, 2.0, 3.0, 4.0, 6.0, 8.0] {
        let [a, b, c, d] = channel_response(&Point3::new(0.0, 0.0, z), &layout, &cfg);
        println!("  {z:4.1}  {a:.4}  {b:.4}  {c:.4}  {d:.4}");
    }

    println!("\nhand sweeping along x at z = 2.5 cm");
    for x in [-3.0, -1.5, 0.0, 1.5, 3.0] {
        let [a, b, c, d] = channel_response(&Point3::new(x, 0.0, 2.5), &layout, &cfg);
        println!("  x={x:+.1}  A={a:.4} B={b:.4} C={c:.4} D={d:.4}");
    }

    // steady-state amplitude of a sine pushed through the one-pole filter
    let fs = cfg.internal_rate_hz as f64;
    println!("\nlow-pass, cutoff {} Hz at {} Hz internal rate", cfg.filter_cutoff_hz, fs);
    for f in [0.0, 10.0, 72.3, 200.0, 723.0, 2000.0] {
        let mut lp = LowPass::new(cfg.filter_cutoff_hz, fs);
        let n = (fs * 2.0) as usize;
        let mut peak = 0.0f64;
        for i in 0..n {
            let u = if f == 0.0 { 1.0 } else { (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin() };
            let y = lp.step(u);
            if i > n / 2 {
                peak = peak.max(y.abs());
            }
        }
        println!("  {f:7.1} Hz  gain {peak:.4}  ({:+.2} dB)", 20.0 * peak.log10());
    }
}
