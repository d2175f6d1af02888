use serde::{Deserialize, Serialize};

use super::{ChannelFrame, SensingError};

/// Idle frames averaged into the baseline: half a second at 80 Hz.
pub const CALIBRATION_FRAMES: usize = 40;

/// Per-channel baseline removed from every frame once the reference trim has run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState {
    pub baseline: [f64; 4],
    pub frames_accumulated: usize,
}

impl CalibrationState {
    /// Baseline-subtracted frame, clamped to [0, 1].
    pub fn apply(&self, frame: &ChannelFrame) -> ChannelFrame {
        let mut ch = frame.channels();
        for (v, b) in ch.iter_mut().zip(self.baseline) {
            *v = (*v - b).clamp(0.0, 1.0);
        }
        ChannelFrame::from_channels(frame.t_s, ch)
    }
}

/// Averages idle (no hand) frames into a per-channel baseline.
pub fn calibrate(idle: &[ChannelFrame]) -> Result<CalibrationState, SensingError> {
    if idle.len() < CALIBRATION_FRAMES {
        return Err(SensingError::InsufficientIdleFrames {
            needed: CALIBRATION_FRAMES,
            got: idle.len(),
        });
    }
    // mean as offset from the first frame, exact for constant input
    let anchor = idle[0].channels();
    let mut sum = [0.0f64; 4];
    for f in idle {
        for ((s, v), a) in sum.iter_mut().zip(f.channels()).zip(anchor) {
            *s += v - a;
        }
    }
    let n = idle.len() as f64;
    let mut baseline = anchor;
    for (b, s) in baseline.iter_mut().zip(sum) {
        *b = (*b + s / n).clamp(0.0, 1.0);
    }
    Ok(CalibrationState {
        baseline,
        frames_accumulated: idle.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_frames(p: f64, n: usize) -> Vec<ChannelFrame> {
        (0..n)
            .map(|i| ChannelFrame::from_channels(i as f64 / 80.0, [p; 4]))
            .collect()
    }

    #[test]
    fn constant_idle_frames_subtract_to_zero() {
        let frames = constant_frames(0.25, 40);
        let cal = calibrate(&frames).unwrap();
        assert_eq!(cal.baseline, [0.25; 4]);
        assert_eq!(cal.frames_accumulated, 40);
        let out = cal.apply(&frames[3]);
        assert_eq!(out.channels(), [0.0; 4]);
    }

    #[test]
    fn too_few_frames() {
        let err = calibrate(&constant_frames(0.1, 10)).unwrap_err();
        assert_eq!(err, SensingError::InsufficientIdleFrames { needed: 40, got: 10 });
    }

    #[test]
    fn subtraction_clamps_at_zero() {
        let cal = CalibrationState { baseline: [0.2, 0.2, 0.2, 0.2], frames_accumulated: 40 };
        let out = cal.apply(&ChannelFrame::from_channels(0.0, [0.1, 0.3, 0.2, 1.0]));
        assert_eq!(out.channels()[0], 0.0);
        assert!((out.channels()[1] - 0.1).abs() < 1e-15);
        assert_eq!(out.channels()[2], 0.0);
        assert!((out.channels()[3] - 0.8).abs() < 1e-15);
    }
}
