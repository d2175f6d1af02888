use serde::{Deserialize, Serialize};

use super::{Coordinate, GestureError};

/// Proximity reading of a hand 4 cm above the pad center under the default
/// cross layout (3 cm pads, lambda 4 cm): every pad at 5 cm slant range.
pub fn default_z_on() -> f64 {
    (-1.25f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub z_on: f64,
    pub z_off: f64,
    pub min_points: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        let z_on = default_z_on();
        Self { z_on, z_off: 0.9 * z_on, min_points: 8 }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), GestureError> {
        if !(self.z_on > self.z_off && self.z_off > 0.0) {
            return Err(GestureError::InvalidThresholds(format!(
                "need z_on > z_off > 0, got z_on={}, z_off={}",
                self.z_on, self.z_off
            )));
        }
        Ok(())
    }
}

/// One completed approach–retract cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureTrace {
    pub points: Vec<Coordinate>,
    pub start_t: f64,
    pub end_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmenterMode {
    Idle,
    Active,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentEvent {
    Idle,
    Started,
    Point,
    Completed(GestureTrace),
    Discarded { points: usize },
}

/// Hysteresis segmenter: a gesture opens when proximity reaches `z_on` and closes
/// when it falls below `z_off`.
#[derive(Debug, Clone)]
pub struct Segmenter {
    cfg: SegmenterConfig,
    mode: SegmenterMode,
    trace: Vec<Coordinate>,
    last_t: Option<f64>,
}

impl Segmenter {
    pub fn new(cfg: SegmenterConfig) -> Result<Self, GestureError> {
        cfg.validate()?;
        Ok(Self { cfg, mode: SegmenterMode::Idle, trace: Vec::new(), last_t: None })
    }

    pub fn config(&self) -> &SegmenterConfig {
        &self.cfg
    }

    pub fn mode(&self) -> SegmenterMode {
        self.mode
    }

    pub fn pending(&self) -> &[Coordinate] {
        &self.trace
    }

    /// Back to Idle, dropping any partial trace and the time ordering check.
    pub fn reset(&mut self) {
        self.mode = SegmenterMode::Idle;
        self.trace.clear();
        self.last_t = None;
    }

    pub fn step(&mut self, coord: Coordinate) -> Result<SegmentEvent, GestureError> {
        if let Some(prev) = self.last_t {
            if !(coord.t_s > prev) {
                return Err(GestureError::OutOfOrderTimestamp { t: coord.t_s, prev });
            }
        }
        self.last_t = Some(coord.t_s);
        Ok(match self.mode {
            SegmenterMode::Idle if coord.z_u >= self.cfg.z_on => {
                self.mode = SegmenterMode::Active;
                self.trace.push(coord);
                SegmentEvent::Started
            }
            SegmenterMode::Idle => SegmentEvent::Idle,
            SegmenterMode::Active if coord.z_u < self.cfg.z_off => {
                self.mode = SegmenterMode::Idle;
                let points = std::mem::take(&mut self.trace);
                if points.len() >= self.cfg.min_points {
                    let (start_t, end_t) = (points[0].t_s, points[points.len() - 1].t_s);
                    SegmentEvent::Completed(GestureTrace { points, start_t, end_t })
                } else {
                    SegmentEvent::Discarded { points: points.len() }
                }
            }
            SegmenterMode::Active => {
                self.trace.push(coord);
                SegmentEvent::Point
            }
        })
    }
}
