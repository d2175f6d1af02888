//! Behavioral model of the four-electrode sensing board and its processing chain.
//!
//! A hand position is turned into four proximity responses (Pad-A..D), each of
//! which is corrupted with Gaussian noise, low-pass filtered at the internal
//! simulation rate, sampled once per scan cycle and quantized by the ADC.
//! Frames come out at the scan rate (80 Hz by default).

mod calibrate;
mod filter;
pub mod io;
mod sim;

pub use calibrate::{calibrate, CalibrationState, CALIBRATION_FRAMES};
pub use filter::LowPass;
pub use sim::{Simulator, Trajectory};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SensingError {
    #[error("invalid sensor configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid electrode layout: {0}")]
    InvalidLayout(String),
    #[error("scan interval [{start:.6}, {end:.6}] s is not covered by the trajectory")]
    TrajectoryGap { start: f64, end: f64 },
    #[error("hand sample at t={t} s does not advance time (previous t={prev} s)")]
    NonMonotoneTime { t: f64, prev: f64 },
    #[error("hand sample at t={t} s is below the board (z={z} cm)")]
    NegativeHeight { t: f64, z: f64 },
    #[error("calibration needs at least {needed} idle frames, got {got}")]
    InsufficientIdleFrames { needed: usize, got: usize },
}

/// A point in board coordinates, in centimeters. The transmit pad sits at the origin
/// and the board occupies the z=0 plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Centers of the four receiving pads, in the order A, B, C, D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeLayout {
    pub pads: [Point3; 4],
    pub pad_radius_cm: f64,
}

impl ElectrodeLayout {
    /// Pads on the axes at `offset_cm` from the transmit pad: A on +x, B on +y,
    /// C on -y and D on -x, so that A-D reads out x and B-C reads out y.
    pub fn cross(offset_cm: f64, pad_radius_cm: f64) -> Self {
        Self {
            pads: [
                Point3::new(offset_cm, 0.0, 0.0),
                Point3::new(0.0, offset_cm, 0.0),
                Point3::new(0.0, -offset_cm, 0.0),
                Point3::new(-offset_cm, 0.0, 0.0),
            ],
            pad_radius_cm,
        }
    }

    /// Checks the mirror pairing (A/D through x=0, B/C through y=0) and that every
    /// pad lies on the board plane.
    pub fn validate(&self) -> Result<(), SensingError> {
        let [a, b, c, d] = self.pads;
        if self.pads.iter().any(|p| p.z != 0.0) {
            return Err(SensingError::InvalidLayout("pads must lie in the z=0 plane".into()));
        }
        if a.x != -d.x || a.y != d.y {
            return Err(SensingError::InvalidLayout(
                "Pad-A and Pad-D must mirror through x=0".into(),
            ));
        }
        if b.y != -c.y || b.x != c.x {
            return Err(SensingError::InvalidLayout(
                "Pad-B and Pad-C must mirror through y=0".into(),
            ));
        }
        if !(self.pad_radius_cm > 0.0) {
            return Err(SensingError::InvalidLayout("pad radius must be positive".into()));
        }
        Ok(())
    }
}

impl Default for ElectrodeLayout {
    fn default() -> Self {
        Self::cross(3.0, 1.0)
    }
}

/// Timestamped hand position. Serialized with the short keys used by trajectory files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandSample {
    #[serde(rename = "t")]
    pub t_s: f64,
    #[serde(rename = "x")]
    pub x_cm: f64,
    #[serde(rename = "y")]
    pub y_cm: f64,
    #[serde(rename = "z")]
    pub z_cm: f64,
}

impl HandSample {
    pub const fn new(t_s: f64, x_cm: f64, y_cm: f64, z_cm: f64) -> Self {
        Self { t_s, x_cm, y_cm, z_cm }
    }

    pub fn position(&self) -> Point3 {
        Point3::new(self.x_cm, self.y_cm, self.z_cm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Decay length of the proximity response.
    pub lambda_cm: f64,
    /// Per-channel Gaussian noise added before the filter.
    pub noise_sigma: f64,
    pub scan_rate_hz: u32,
    pub internal_rate_hz: u32,
    pub filter_cutoff_hz: f64,
    pub adc_bits: u32,
    /// Comparator output with no hand present, before the reference trim removes it.
    pub idle_level: f64,
    pub seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            lambda_cm: 4.0,
            noise_sigma: 0.003,
            scan_rate_hz: 80,
            internal_rate_hz: 8000,
            filter_cutoff_hz: 72.3,
            adc_bits: 10,
            idle_level: 0.1,
            seed: 0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SensingError> {
        let bad = |msg: &str| Err(SensingError::InvalidConfig(msg.to_string()));
        if self.scan_rate_hz == 0 || self.internal_rate_hz == 0 {
            return bad("rates must be positive");
        }
        if self.internal_rate_hz % self.scan_rate_hz != 0 {
            return bad("internal_rate_hz must be an integer multiple of scan_rate_hz");
        }
        if self.internal_rate_hz / self.scan_rate_hz < 4 {
            return bad("each scan cycle needs at least one internal tick per channel");
        }
        if !(self.filter_cutoff_hz > 0.0 && self.filter_cutoff_hz < self.internal_rate_hz as f64 / 2.0) {
            return bad("filter_cutoff_hz must lie in (0, internal_rate_hz/2)");
        }
        if !(1..=16).contains(&self.adc_bits) {
            return bad("adc_bits must be in [1, 16]");
        }
        if !(self.lambda_cm > 0.0) {
            return bad("lambda_cm must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.idle_level) {
            return bad("idle_level must be in [0, 1)");
        }
        Ok(())
    }

    pub fn ticks_per_scan(&self) -> u32 {
        self.internal_rate_hz / self.scan_rate_hz
    }

    /// Largest ADC code; quantized values are multiples of `1 / adc_max_code()`.
    pub fn adc_max_code(&self) -> f64 {
        ((1u32 << self.adc_bits) - 1) as f64
    }

    pub fn quantize(&self, v: f64) -> f64 {
        let full = self.adc_max_code();
        (v.clamp(0.0, 1.0) * full).round() / full
    }
}

/// One scan of the four receiving electrodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelFrame {
    pub t_s: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl ChannelFrame {
    pub fn channels(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn from_channels(t_s: f64, [a, b, c, d]: [f64; 4]) -> Self {
        Self { t_s, a, b, c, d }
    }
}

/// Noise-free proximity response `exp(-r/lambda)` of each pad, in the order A, B, C, D.
pub fn channel_response(hand: &Point3, layout: &ElectrodeLayout, cfg: &SensorConfig) -> [f64; 4] {
    layout.pads.map(|pad| (-hand.distance(&pad) / cfg.lambda_cm).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_on_axis_at_five_cm_slant_range() {
        let cfg = SensorConfig::default();
        let s = channel_response(&Point3::new(0.0, 0.0, 4.0), &ElectrodeLayout::default(), &cfg);
        let expected = (-1.25f64).exp();
        for v in s {
            assert!((v - expected).abs() < 1e-15);
        }
        assert!((expected - 0.28650).abs() < 5e-6);
    }

    #[test]
    fn response_vanishes_far_away() {
        let cfg = SensorConfig::default();
        let s = channel_response(&Point3::new(0.0, 0.0, 1e4), &ElectrodeLayout::default(), &cfg);
        assert!(s.iter().all(|&v| v < 1e-300));
    }

    #[test]
    fn axis_hand_is_mirror_symmetric() {
        let cfg = SensorConfig::default();
        for z in [0.5, 2.0, 4.0, 9.0] {
            let [a, b, c, d] = channel_response(&Point3::new(0.0, 0.0, z), &ElectrodeLayout::default(), &cfg);
            assert_eq!(a, d);
            assert_eq!(b, c);
        }
    }

    #[test]
    fn layout_validation() {
        assert!(ElectrodeLayout::default().validate().is_ok());
        let mut bad = ElectrodeLayout::default();
        bad.pads[0].x = 2.5;
        assert!(bad.validate().is_err());
        let mut lifted = ElectrodeLayout::default();
        lifted.pads[1].z = 0.1;
        assert!(lifted.validate().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SensorConfig::default().validate().is_ok());
        let cases = [
            SensorConfig { internal_rate_hz: 2010, ..Default::default() },
            SensorConfig { filter_cutoff_hz: 4000.0, ..Default::default() },
            SensorConfig { adc_bits: 0, ..Default::default() },
            SensorConfig { adc_bits: 17, ..Default::default() },
        ];
        for cfg in cases {
            assert!(matches!(cfg.validate(), Err(SensingError::InvalidConfig(_))));
        }
    }

    #[test]
    fn quantizer_levels() {
        let cfg = SensorConfig::default();
        assert_eq!(cfg.quantize(-0.2), 0.0);
        assert_eq!(cfg.quantize(1.7), 1.0);
        assert_eq!(cfg.quantize(0.5), 512.0 / 1023.0);
    }
}
