//! From calibrated channel frames to 28×28 digit images: coordinate
//! reconstruction, proximity-threshold segmentation and stroke rasterization.

mod image;
mod raster;
mod segment;

pub use image::{DigitImage, IMAGE_PIXELS, IMAGE_SIDE};
pub use raster::{normalize_points, normalize_trace, rasterize, CANVAS_SIDE, STROKE_RADIUS_PX};
pub use segment::{default_z_on, GestureTrace, SegmentEvent, Segmenter, SegmenterConfig, SegmenterMode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensing::ChannelFrame;

#[derive(Debug, Error, PartialEq)]
pub enum GestureError {
    #[error("proximity {0} is not positive; distance is out of range")]
    NonPositiveProximity(f64),
    #[error("coordinate at t={t} s arrived after t={prev} s")]
    OutOfOrderTimestamp { t: f64, prev: f64 },
    #[error("gesture trace is empty")]
    EmptyTrace,
    #[error("invalid segmenter thresholds: {0}")]
    InvalidThresholds(String),
    #[error("image must have {expected} pixels, got {got}")]
    PayloadSizeMismatch { expected: usize, got: usize },
    #[error("pixel {index} = {value} is outside [0, 1]")]
    PixelOutOfRange { index: usize, value: f32 },
    #[error("label {0} is not a digit")]
    InvalidLabel(u8),
}

/// Reconstructed hand coordinate in GUI units: x and y in [-1, 1], proximity z in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub x_u: f64,
    pub y_u: f64,
    pub z_u: f64,
    pub t_s: f64,
}

/// X = A - D, Y = B - C, Z = (A + B + C + D) / 4.
pub fn reconstruct(frame: &ChannelFrame) -> Coordinate {
    Coordinate {
        x_u: frame.a - frame.d,
        y_u: frame.b - frame.c,
        z_u: (frame.a + frame.b + frame.c + frame.d) / 4.0,
        t_s: frame.t_s,
    }
}

/// Mean slant range implied by a proximity reading, `-lambda * ln(z)`. Display only.
pub fn estimate_distance(z_u: f64, lambda_cm: f64) -> Result<f64, GestureError> {
    if !(z_u > 0.0) {
        return Err(GestureError::NonPositiveProximity(z_u));
    }
    Ok((-lambda_cm * z_u.min(1.0).ln()).max(0.0))
}
