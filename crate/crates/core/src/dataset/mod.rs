//! Synthetic labeled gestures, pushed through the full sensing and gesture
//! pipeline, plus the augmentation policy and the on-disk dataset format.

mod augment;
mod io;
mod synth;
pub mod templates;

pub use augment::{augment, augment_all, augment_with, AugmentConfig, AugmentParams};
pub use io::{
    load_dataset, load_split, read_split, save_dataset, save_split, write_split, Manifest, DATASET_MAGIC,
    DATASET_VERSION,
};
pub use synth::{build_dataset, synth_trajectory, trajectory_stream, BuildStats, SynthConfig, ZProfile};
pub use templates::DigitTemplate;

use thiserror::Error;

use crate::gesture::DigitImage;
use crate::pipeline::PipelineError;

/// Version tag written into dataset manifests.
pub const GENERATOR_VERSION: &str = concat!("airpad-synth/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{failed} of {total} trajectories did not yield exactly one gesture")]
    SegmentationFailure { failed: usize, total: usize },
    #[error("dataset format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Train and test splits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<DigitImage>,
    pub test: Vec<DigitImage>,
    pub seed: u64,
    pub per_class: usize,
}

/// Per-class image counts of a split.
pub fn class_counts(images: &[DigitImage]) -> [usize; 10] {
    let mut counts = [0; 10];
    for img in images {
        if let Some(l) = img.label() {
            counts[l as usize] += 1;
        }
    }
    counts
}
