//! Generate a small synthetic dataset, write it to disk and read it back.
//!
//! ```bash
//! cargo run -p airpad-core --example build_dataset -- 20 /tmp/airpad-data
//! ```

use airpad_core::dataset::{build_dataset, class_counts, load_dataset, save_dataset, SynthConfig};
use airpad_core::sensing::SensorConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let out = args.next().map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("airpad-data"));

    let cfg = SynthConfig { per_class, seed: 42, ..Default::default() };
    let started = std::time::Instant::now();
    let (ds, stats) = build_dataset(&cfg, &SensorConfig::default()).expect("build");
    println!(
        "{} trajectories ({} retried) -> {} train / {} test in {:.1}s",
        stats.trajectories,
        stats.failures,
        ds.train.len(),
        ds.test.len(),
        started.elapsed().as_secs_f64()
    );
    println!("train per class {:?}", class_counts(&ds.train));
    println!("test per class  {:?}", class_counts(&ds.test));

    save_dataset(&out, &ds).expect("save");
    let back = load_dataset(&out).expect("load");
    assert_eq!(back, ds);
    println!("round trip through {} ok", out.display());

    for img in ds.train.iter().take(3) {
        println!("\nlabel {:?}", img.label());
        print!("{}", img.to_ascii());
    }
}
