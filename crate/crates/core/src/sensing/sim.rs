use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    calibrate, channel_response, CalibrationState, ChannelFrame, ElectrodeLayout, HandSample,
    LowPass, Point3, SensingError, SensorConfig,
};

// Slack for comparing tick times against sample times.
const TIME_EPS: f64 = 1e-9;

/// Time-ordered hand samples, linearly interpolated between samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    samples: Vec<HandSample>,
}

impl Trajectory {
    pub fn new(samples: Vec<HandSample>) -> Result<Self, SensingError> {
        let mut traj = Self { samples: Vec::with_capacity(samples.len()) };
        for s in samples {
            traj.push(s)?;
        }
        Ok(traj)
    }

    pub fn push(&mut self, s: HandSample) -> Result<(), SensingError> {
        if !(s.z_cm >= 0.0) {
            return Err(SensingError::NegativeHeight { t: s.t_s, z: s.z_cm });
        }
        if let Some(last) = self.samples.last() {
            if !(s.t_s > last.t_s) {
                return Err(SensingError::NonMonotoneTime { t: s.t_s, prev: last.t_s });
            }
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn samples(&self) -> &[HandSample] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t_s)
    }

    pub fn end(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t_s)
    }

    pub fn covers(&self, start: f64, end: f64) -> bool {
        match (self.start(), self.end()) {
            (Some(s), Some(e)) => start >= s - TIME_EPS && end <= e + TIME_EPS,
            _ => false,
        }
    }

    /// Interpolated hand position, or `None` outside the sampled span.
    pub fn position_at(&self, t: f64) -> Option<Point3> {
        let (first, last) = (self.samples.first()?, self.samples.last()?);
        if t < first.t_s - TIME_EPS || t > last.t_s + TIME_EPS {
            return None;
        }
        let i = self.samples.partition_point(|s| s.t_s <= t);
        if i == 0 {
            return Some(first.position());
        }
        if i == self.samples.len() {
            return Some(last.position());
        }
        let (p, q) = (&self.samples[i - 1], &self.samples[i]);
        let w = (t - p.t_s) / (q.t_s - p.t_s);
        Some(Point3::new(
            p.x_cm + w * (q.x_cm - p.x_cm),
            p.y_cm + w * (q.y_cm - p.y_cm),
            p.z_cm + w * (q.z_cm - p.z_cm),
        ))
    }

    /// Drops samples no longer needed to interpolate at or after `t`.
    fn prune_before(&mut self, t: f64) {
        let keep_from = self.samples.partition_point(|s| s.t_s <= t).saturating_sub(1);
        if keep_from > 0 {
            self.samples.drain(..keep_from);
        }
    }
}

/// Sensing board plus processing board. Owns the noise RNG, the four filters and
/// the scan clock; frames are emitted one per scan cycle.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SensorConfig,
    layout: ElectrodeLayout,
    rng: ChaCha8Rng,
    filters: [LowPass; 4],
    calibration: Option<CalibrationState>,
    origin: Option<f64>,
    next_cycle: u64,
    stream: Trajectory,
}

impl Simulator {
    pub fn new(cfg: SensorConfig, layout: ElectrodeLayout) -> Result<Self, SensingError> {
        cfg.validate()?;
        layout.validate()?;
        let filter = LowPass::new(cfg.filter_cutoff_hz, cfg.internal_rate_hz as f64);
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            filters: [filter; 4],
            cfg,
            layout,
            calibration: None,
            origin: None,
            next_cycle: 0,
            stream: Trajectory::default(),
        })
    }

    pub fn config(&self) -> &SensorConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    pub fn calibration(&self) -> Option<&CalibrationState> {
        self.calibration.as_ref()
    }

    pub fn set_calibration(&mut self, cal: Option<CalibrationState>) {
        self.calibration = cal;
    }

    /// Time of the first trajectory sample; cycle k ends at `origin + (k+1)/scan_rate`.
    pub fn origin(&self) -> Option<f64> {
        self.origin
    }

    /// Forgets the scan clock and any buffered stream samples. Filters, RNG and
    /// calibration carry over, as they would on the real board.
    pub fn reset_timeline(&mut self) {
        self.origin = None;
        self.next_cycle = 0;
        self.stream = Trajectory::default();
    }

    /// Runs `frames` scan cycles with no hand present and installs the resulting
    /// baseline. Returns the raw idle frames used.
    pub fn calibrate_idle(&mut self, frames: usize) -> Result<Vec<ChannelFrame>, SensingError> {
        self.calibration = None;
        let idle: Vec<ChannelFrame> =
            (0..frames).map(|_| self.cycle(0.0, |_| None)).collect();
        self.calibration = Some(calibrate(&idle)?);
        Ok(idle)
    }

    /// Produces the next frame from `traj`. The first call anchors the scan clock
    /// at the trajectory start.
    pub fn scan_cycle(&mut self, traj: &Trajectory) -> Result<ChannelFrame, SensingError> {
        let origin = match self.origin {
            Some(o) => o,
            None => {
                let start = traj.start().ok_or(SensingError::TrajectoryGap { start: 0.0, end: 0.0 })?;
                self.origin = Some(start);
                start
            }
        };
        let (start, end) = self.cycle_span(origin, self.next_cycle);
        if !traj.covers(start, end) {
            return Err(SensingError::TrajectoryGap { start, end });
        }
        let frame = self.cycle(origin, |t| traj.position_at(t));
        self.next_cycle += 1;
        Ok(frame)
    }

    /// Simulates every complete scan cycle covered by `traj`.
    pub fn run(&mut self, traj: &Trajectory) -> Vec<ChannelFrame> {
        let mut frames = Vec::new();
        while let Ok(f) = self.scan_cycle(traj) {
            frames.push(f);
        }
        frames
    }

    /// Streaming entry point: buffers `sample` and emits every frame whose scan
    /// interval is now covered.
    pub fn feed(&mut self, sample: HandSample) -> Result<Vec<ChannelFrame>, SensingError> {
        self.stream.push(sample)?;
        let mut stream = std::mem::take(&mut self.stream);
        let mut frames = Vec::new();
        loop {
            match self.scan_cycle(&stream) {
                Ok(f) => frames.push(f),
                Err(SensingError::TrajectoryGap { start, .. }) => {
                    stream.prune_before(start);
                    break;
                }
                Err(e) => {
                    self.stream = stream;
                    return Err(e);
                }
            }
        }
        self.stream = stream;
        Ok(frames)
    }

    fn cycle_span(&self, origin: f64, cycle: u64) -> (f64, f64) {
        let n = self.cfg.ticks_per_scan() as u64;
        let fs = self.cfg.internal_rate_hz as f64;
        (origin + (cycle * n) as f64 / fs, origin + ((cycle + 1) * n) as f64 / fs)
    }

    /// One scan cycle: per internal tick every channel gets response, noise and a
    /// filter update; channel c is held at its slot and then quantized.
    fn cycle(&mut self, origin: f64, mut position: impl FnMut(f64) -> Option<Point3>) -> ChannelFrame {
        let n = self.cfg.ticks_per_scan() as u64;
        let fs = self.cfg.internal_rate_hz as f64;
        let first_tick = self.next_cycle * n;
        let slots: [u64; 4] = [0, 1, 2, 3].map(|c| ((c + 1) * n) / 4 - 1);
        let mut held = [0.0f64; 4];
        let mut t = origin;
        for j in 0..n {
            t = origin + (first_tick + j + 1) as f64 / fs;
            let response = match position(t) {
                Some(p) => channel_response(&p, &self.layout, &self.cfg),
                None => [0.0; 4],
            };
            for (c, filter) in self.filters.iter_mut().enumerate() {
                let noise = if self.cfg.noise_sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    z * self.cfg.noise_sigma
                } else {
                    0.0
                };
                let y = filter.step(self.cfg.idle_level + response[c] + noise);
                if slots[c] == j {
                    held[c] = y;
                }
            }
        }
        let raw = ChannelFrame::from_channels(t, held.map(|v| self.cfg.quantize(v)));
        match &self.calibration {
            Some(cal) => cal.apply(&raw),
            None => raw,
        }
    }
}
