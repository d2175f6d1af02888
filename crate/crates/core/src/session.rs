//! Live sessions: hand positions stream in, channel frames, trace points and
//! classifications stream out. Messages are JSON objects tagged by `type`.
//!
//! ```json
//! {"type":"hand_sample","t":0.0125,"x":0.4,"y":-1.2,"z":2.5}
//! {"type":"classification","digit":7,"confidence":0.98,"probs":[...],"image":"<base64>"}
//! ```

use std::collections::VecDeque;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gesture::{reconstruct, DigitImage, GestureError, SegmentEvent, Segmenter, SegmenterConfig, IMAGE_PIXELS};
use crate::nn::{ModelBundle, NnError};
use crate::pipeline::trace_to_image;
use crate::sensing::{ElectrodeLayout, HandSample, SensingError, SensorConfig, Simulator, CALIBRATION_FRAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedMessage,
    UnexpectedMessage,
    InvalidSample,
    InvalidConfig,
    NoModelLoaded,
    PayloadSizeMismatch,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamMessage {
    // inbound
    HandSample {
        t: f64,
        x: f64,
        y: f64,
        z: f64,
    },
    Reset,
    SetConfig {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sensor: Option<SensorConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        segmenter: Option<SegmenterConfig>,
    },
    // outbound
    Channels {
        t: f64,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    TracePoint {
        x: f64,
        y: f64,
        z: f64,
    },
    GestureStarted {
        t: f64,
    },
    Classification {
        digit: u8,
        confidence: f64,
        probs: Vec<f64>,
        /// Base64 of the 784-byte rasterized image the classifier saw.
        image: String,
    },
    GestureDiscarded {
        points: usize,
    },
    Error {
        code: ErrorCode,
        msg: String,
    },
}

impl StreamMessage {
    pub fn error(code: ErrorCode, msg: impl Into<String>) -> Self {
        Self::Error { code, msg: msg.into() }
    }

    /// Gesture lifecycle messages are never dropped under backpressure.
    pub fn is_gesture_event(&self) -> bool {
        matches!(self, Self::GestureStarted { .. } | Self::Classification { .. } | Self::GestureDiscarded { .. })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stream messages always serialize")
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no model loaded")]
    NoModelLoaded,
    #[error("payload must be {expected} bytes, got {got}")]
    PayloadSizeMismatch { expected: usize, got: usize },
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Gesture(#[from] GestureError),
    #[error(transparent)]
    Model(#[from] NnError),
}

impl SessionError {
    pub fn code(&self) -> ErrorCode {
        match self {
            Self::NoModelLoaded => ErrorCode::NoModelLoaded,
            Self::PayloadSizeMismatch { .. } => ErrorCode::PayloadSizeMismatch,
            Self::MalformedMessage(_) => ErrorCode::MalformedMessage,
            Self::Sensing(_) | Self::Gesture(_) => ErrorCode::InvalidSample,
            Self::Model(_) => ErrorCode::Internal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub digit: u8,
    pub confidence: f64,
    pub probs: Vec<f64>,
}

/// Single-shot classification of a 784-byte image (`byte / 255` per pixel).
pub fn classify_image(model: Option<&ModelBundle>, bytes: &[u8]) -> Result<ClassificationResult, SessionError> {
    if bytes.len() != IMAGE_PIXELS {
        return Err(SessionError::PayloadSizeMismatch { expected: IMAGE_PIXELS, got: bytes.len() });
    }
    let model = model.ok_or(SessionError::NoModelLoaded)?;
    let image = DigitImage::from_bytes(bytes, None)?;
    let p = model.predict(&image)?;
    Ok(ClassificationResult { digit: p.digit, confidence: p.confidence, probs: p.probabilities.to_vec() })
}

/// One simulator and segmenter pair plus a shared read-only model.
pub struct Session {
    id: u64,
    sensor: SensorConfig,
    layout: ElectrodeLayout,
    sim: Simulator,
    segmenter: Segmenter,
    model: Option<Arc<ModelBundle>>,
}

impl Session {
    pub fn new(
        id: u64,
        sensor: SensorConfig,
        segmenter: SegmenterConfig,
        model: Option<Arc<ModelBundle>>,
    ) -> Result<Self, SessionError> {
        let layout = ElectrodeLayout::default();
        let sim = Self::calibrated(&sensor, &layout)?;
        Ok(Self { id, sensor, layout, sim, segmenter: Segmenter::new(segmenter)?, model })
    }

    fn calibrated(sensor: &SensorConfig, layout: &ElectrodeLayout) -> Result<Simulator, SessionError> {
        let mut sim = Simulator::new(sensor.clone(), layout.clone())?;
        sim.calibrate_idle(CALIBRATION_FRAMES)?;
        Ok(sim)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn segmenter(&self) -> &Segmenter {
        &self.segmenter
    }

    pub fn has_model(&self) -> bool {
        self.model.is_some()
    }

    /// Parses one JSON text message and handles it. Malformed input yields an
    /// error message; the session is unaffected.
    pub fn handle_text(&mut self, text: &str) -> Vec<StreamMessage> {
        match serde_json::from_str::<StreamMessage>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => vec![StreamMessage::error(ErrorCode::MalformedMessage, e.to_string())],
        }
    }

    pub fn handle(&mut self, msg: StreamMessage) -> Vec<StreamMessage> {
        match msg {
            StreamMessage::HandSample { t, x, y, z } => self.hand_sample(HandSample::new(t, x, y, z)),
            StreamMessage::Reset => {
                self.reset();
                Vec::new()
            }
            StreamMessage::SetConfig { sensor, segmenter } => match self.set_config(sensor, segmenter) {
                Ok(()) => Vec::new(),
                Err(e) => vec![StreamMessage::error(ErrorCode::InvalidConfig, e.to_string())],
            },
            other => vec![StreamMessage::error(
                ErrorCode::UnexpectedMessage,
                format!("{} is an outbound message", other.to_json()),
            )],
        }
    }

    /// Drops any gesture in progress and restarts the scan clock. Calibration is kept.
    pub fn reset(&mut self) {
        self.segmenter.reset();
        self.sim.reset_timeline();
    }

    /// Replaces the sensor and/or segmenter configuration, recalibrating from scratch.
    pub fn set_config(&mut self, sensor: Option<SensorConfig>, segmenter: Option<SegmenterConfig>) -> Result<(), SessionError> {
        let seg = Segmenter::new(segmenter.unwrap_or(*self.segmenter.config()))?;
        let sensor = sensor.unwrap_or_else(|| self.sensor.clone());
        self.sim = Self::calibrated(&sensor, &self.layout)?;
        self.sensor = sensor;
        self.segmenter = seg;
        Ok(())
    }

    fn hand_sample(&mut self, sample: HandSample) -> Vec<StreamMessage> {
        let frames = match self.sim.feed(sample) {
            Ok(f) => f,
            Err(e) => return vec![StreamMessage::error(ErrorCode::InvalidSample, e.to_string())],
        };
        let mut out = Vec::new();
        for f in frames {
            out.push(StreamMessage::Channels { t: f.t_s, a: f.a, b: f.b, c: f.c, d: f.d });
            let coord = reconstruct(&f);
            let event = match self.segmenter.step(coord) {
                Ok(ev) => ev,
                Err(e) => {
                    out.push(StreamMessage::error(ErrorCode::InvalidSample, e.to_string()));
                    continue;
                }
            };
            let point = StreamMessage::TracePoint { x: coord.x_u, y: coord.y_u, z: coord.z_u };
            match event {
                SegmentEvent::Idle => {}
                SegmentEvent::Started => {
                    out.push(StreamMessage::GestureStarted { t: coord.t_s });
                    out.push(point);
                }
                SegmentEvent::Point => out.push(point),
                SegmentEvent::Discarded { points } => out.push(StreamMessage::GestureDiscarded { points }),
                SegmentEvent::Completed(trace) => out.push(self.classify_trace(&trace)),
            }
        }
        out
    }

    fn classify_trace(&self, trace: &crate::gesture::GestureTrace) -> StreamMessage {
        let image = match trace_to_image(trace, None) {
            Ok(img) => img.quantized(),
            Err(e) => return StreamMessage::error(ErrorCode::Internal, e.to_string()),
        };
        let bytes = image.to_bytes();
        match classify_image(self.model.as_deref(), &bytes) {
            Ok(r) => StreamMessage::Classification {
                digit: r.digit,
                confidence: r.confidence,
                probs: r.probs,
                image: BASE64.encode(&bytes),
            },
            Err(e) => StreamMessage::error(e.code(), e.to_string()),
        }
    }
}

/// Bounded outbound buffer for one session. When full, the oldest `channels`
/// message goes first, then the oldest `trace_point`; gesture events and errors
/// are always kept, even past capacity.
#[derive(Debug)]
pub struct OutboundQueue {
    capacity: usize,
    items: VecDeque<StreamMessage>,
    dropped: u64,
}

impl OutboundQueue {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), items: VecDeque::new(), dropped: 0 }
    }

    pub fn push(&mut self, msg: StreamMessage) {
        if self.items.len() >= self.capacity && !self.evict() && !Self::must_keep(&msg) {
            self.dropped += 1;
            return;
        }
        self.items.push_back(msg);
    }

    fn must_keep(msg: &StreamMessage) -> bool {
        !matches!(msg, StreamMessage::Channels { .. } | StreamMessage::TracePoint { .. })
    }

    fn evict(&mut self) -> bool {
        let victim = self
            .items
            .iter()
            .position(|m| matches!(m, StreamMessage::Channels { .. }))
            .or_else(|| self.items.iter().position(|m| matches!(m, StreamMessage::TracePoint { .. })));
        match victim {
            Some(i) => {
                self.items.remove(i);
                self.dropped += 1;
                true
            }
            None => false,
        }
    }

    pub fn pop(&mut self) -> Option<StreamMessage> {
        self.items.pop_front()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
