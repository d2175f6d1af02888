//! Batch capture: trajectory in, calibrated frames and segmented gestures out.

use thiserror::Error;

use crate::gesture::{
    normalize_trace, rasterize, reconstruct, DigitImage, GestureError, GestureTrace, SegmentEvent,
    Segmenter, SegmenterConfig,
};
use crate::sensing::{
    ChannelFrame, ElectrodeLayout, SensingError, SensorConfig, Simulator, Trajectory, CALIBRATION_FRAMES,
};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Gesture(#[from] GestureError),
}

#[derive(Debug, Clone, Default)]
pub struct Capture {
    /// Calibrated frames, one per scan cycle.
    pub frames: Vec<ChannelFrame>,
    pub gestures: Vec<GestureTrace>,
    pub discarded: usize,
}

/// Calibrates a fresh simulator on idle frames, replays `traj` through it and
/// segments the reconstructed coordinates.
pub fn capture(
    traj: &Trajectory,
    sensor: &SensorConfig,
    layout: &ElectrodeLayout,
    seg: &SegmenterConfig,
) -> Result<Capture, PipelineError> {
    let mut sim = Simulator::new(sensor.clone(), layout.clone())?;
    sim.calibrate_idle(CALIBRATION_FRAMES)?;
    let mut segmenter = Segmenter::new(*seg)?;
    let frames = sim.run(traj);
    let mut out = Capture { frames: Vec::new(), gestures: Vec::new(), discarded: 0 };
    for f in &frames {
        match segmenter.step(reconstruct(f))? {
            SegmentEvent::Completed(trace) => out.gestures.push(trace),
            SegmentEvent::Discarded { .. } => out.discarded += 1,
            _ => {}
        }
    }
    out.frames = frames;
    Ok(out)
}

/// Normalizes and rasterizes a completed gesture.
pub fn trace_to_image(trace: &GestureTrace, label: Option<u8>) -> Result<DigitImage, GestureError> {
    Ok(rasterize(&normalize_trace(trace)?)?.with_label(label))
}
