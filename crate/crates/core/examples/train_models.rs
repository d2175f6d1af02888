//! Synthesize a desk-scale dataset and train all four classifiers on it, then
//! compare them the way the results table does: final train/validation accuracy,
//! the train-validation gap, and validation accuracy on augmented images.
//!
//! ```bash
//! cargo run --release -p airpad-core --example train_models -- 1000 20
//! ```
//! Arguments: images per class (default 200), epochs (default 5).

use std::time::Instant;

use airpad_core::dataset::{augment_all, build_dataset, AugmentConfig, SynthConfig};
use airpad_core::nn::{train, Recipe};
use airpad_core::sensing::SensorConfig;

fn main() {
    let per_class: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let epochs: usize = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(5);
    let seed = 7;

    let t0 = Instant::now();
    let synth = SynthConfig { per_class, seed, ..Default::default() };
    let (ds, stats) = build_dataset(&synth, &SensorConfig::default()).expect("dataset");
    println!(
        "dataset: {} train / {} test from {} trajectories ({} segmentation retries) in {:.1}s",
        ds.train.len(),
        ds.test.len(),
        stats.trajectories,
        stats.failures,
        t0.elapsed().as_secs_f64()
    );
    let val_aug = augment_all(&ds.test, &AugmentConfig { seed: seed + 1, ..Default::default() });

    println!("{:<8} {:>9} {:>9} {:>7} {:>9} {:>8}", "model", "train_acc", "val_acc", "gap", "aug_val", "time_s");
    for recipe in Recipe::ALL {
        let cfg = airpad_core::nn::TrainConfig { epochs, ..recipe.config(seed) };
        let (bundle, report) = train(recipe.spec(), &ds.train, &ds.test, &cfg, recipe.name(), |m| {
            eprintln!(
                "  {recipe} epoch {:>2}: loss {:.4} acc {:.4} | val loss {:.4} acc {:.4}",
                m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc
            )
        })
        .expect("training");
        let last = report.last().expect("at least one epoch");
        let aug = bundle.evaluate(&val_aug).expect("evaluate");
        println!(
            "{:<8} {:>9.4} {:>9.4} {:>7.4} {:>9.4} {:>8.1}",
            recipe.name(),
            last.train_acc,
            last.val_acc,
            last.gap(),
            aug.accuracy,
            report.wall_time_s
        );
    }
}
