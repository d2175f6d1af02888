use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::templates::{catmull_rom, resample_by_arc_length, DigitTemplate};
use super::{Dataset, DatasetError};
use crate::gesture::{DigitImage, SegmenterConfig};
use crate::pipeline::{capture, trace_to_image};
use crate::sensing::{ElectrodeLayout, HandSample, SensorConfig, Trajectory};

// Retries per dataset slot when a trajectory does not segment cleanly.
const MAX_ATTEMPTS: u64 = 3;
const MAX_FAILURE_RATE: f64 = 0.01;

/// Height profile of one approach–draw–retract cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZProfile {
    pub hover_cm: f64,
    pub draw_cm: f64,
    /// Peak deviation from `draw_cm` while drawing.
    pub wobble_cm: f64,
    pub lift_cm: f64,
    pub hold_s: f64,
    pub approach_s: f64,
    pub retract_s: f64,
}

impl Default for ZProfile {
    fn default() -> Self {
        Self {
            hover_cm: 8.0,
            draw_cm: 2.5,
            wobble_cm: 0.5,
            lift_cm: 8.5,
            hold_s: 0.1,
            approach_s: 0.25,
            retract_s: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub per_class: usize,
    /// Gaussian σ of control-point jitter, in template (unit square) units.
    pub jitter: f64,
    /// Relative drawing-speed variation, e.g. 0.2 for ±20%.
    pub speed_variation: f64,
    pub draw_duration_s: f64,
    /// Side of the square above the pad that the template is mapped onto.
    pub extent_cm: f64,
    pub sample_rate_hz: f64,
    pub z: ZProfile,
    pub split_ratio: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            per_class: 1000,
            jitter: 0.04,
            speed_variation: 0.2,
            draw_duration_s: 1.0,
            extent_cm: 4.0,
            sample_rate_hz: 200.0,
            z: ZProfile::default(),
            split_ratio: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::Config(m.to_string()));
        if self.per_class == 0 {
            return bad("per_class must be at least 1");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split_ratio must be in (0, 1)");
        }
        if !(self.jitter >= 0.0) || !(0.0..1.0).contains(&self.speed_variation) {
            return bad("jitter must be >= 0 and speed_variation in [0, 1)");
        }
        if !(self.sample_rate_hz > 0.0 && self.draw_duration_s > 0.0 && self.extent_cm > 0.0) {
            return bad("rates, durations and extent must be positive");
        }
        let z = &self.z;
        if !(z.draw_cm - z.wobble_cm > 0.0 && z.draw_cm + z.wobble_cm < 4.0 && z.hover_cm > 4.0 && z.lift_cm > 4.0) {
            return bad("z profile must dip below 4 cm while drawing and start/end above it");
        }
        Ok(())
    }
}

/// A synthesized gesture with the time window of its drawing phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrajectory {
    pub digit: u8,
    pub samples: Vec<HandSample>,
    pub draw_start_s: f64,
    pub draw_end_s: f64,
}

impl SynthTrajectory {
    pub fn trajectory(&self) -> Trajectory {
        Trajectory::new(self.samples.clone()).expect("synthesized samples are ordered")
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Hover, descend, trace the jittered template for `digit`, lift away.
pub fn synth_trajectory<R: Rng + ?Sized>(digit: u8, cfg: &SynthConfig, rng: &mut R) -> SynthTrajectory {
    assert!(digit < 10, "digit out of range: {digit}");
    let mut ctrl = DigitTemplate::for_digit(digit).points;
    if cfg.jitter > 0.0 {
        let n = Normal::new(0.0, cfg.jitter).expect("finite jitter");
        for p in ctrl.iter_mut() {
            p[0] += n.sample(rng);
            p[1] += n.sample(rng);
        }
    }
    let path = resample_by_arc_length(&catmull_rom(&ctrl, 16), 512);

    let sv = cfg.speed_variation;
    let draw_s = cfg.draw_duration_s * (1.0 + sv * rng.random_range(-1.0..=1.0));
    // progress(τ) = τ + a/(2πk)·(sin(2πkτ+φ) − sin φ): speed 1 + a·cos(..), |a| ≤ sv
    let speed_amp = sv * rng.random_range(-1.0..=1.0);
    let speed_cycles = rng.random_range(1..=3) as f64;
    let speed_phase = rng.random_range(0.0..2.0 * PI);
    let wobble = cfg.z.wobble_cm * rng.random_range(0.0..=1.0);
    let wobble_freq = rng.random_range(0.5..1.5);
    let wobble_phase = rng.random_range(0.0..2.0 * PI);

    let progress = |tau: f64| {
        let w = 2.0 * PI * speed_cycles;
        tau + speed_amp / w * ((w * tau + speed_phase).sin() - speed_phase.sin())
    };
    let along = |s: f64| {
        let x = s.clamp(0.0, 1.0) * (path.len() - 1) as f64;
        let i = (x.floor() as usize).min(path.len() - 2);
        let f = x - i as f64;
        let (a, b) = (path[i], path[i + 1]);
        [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
    };
    let draw_z = |tau: f64| cfg.z.draw_cm + wobble * (2.0 * PI * wobble_freq * tau + wobble_phase).sin();
    let to_cm = |p: [f64; 2]| [(p[0] - 0.5) * cfg.extent_cm, (p[1] - 0.5) * cfg.extent_cm];

    let z = &cfg.z;
    let draw_start = z.hold_s + z.approach_s;
    let draw_end = draw_start + draw_s;
    let total = draw_end + z.retract_s + z.hold_s;
    let n = (total * cfg.sample_rate_hz).round() as usize;
    let (start_xy, end_xy) = (to_cm(along(0.0)), to_cm(along(1.0)));
    let samples = (0..=n)
        .map(|i| {
            let t = i as f64 / cfg.sample_rate_hz;
            let (xy, zc) = if t < draw_start {
                let u = smoothstep((t - z.hold_s) / z.approach_s);
                (start_xy, z.hover_cm + (draw_z(0.0) - z.hover_cm) * u)
            } else if t <= draw_end {
                let tau = (t - draw_start) / draw_s;
                (to_cm(along(progress(tau))), draw_z(tau))
            } else {
                let u = smoothstep((t - draw_end) / z.retract_s);
                (end_xy, draw_z(1.0) + (z.lift_cm - draw_z(1.0)) * u)
            };
            HandSample::new(t, xy[0], xy[1], zc)
        })
        .collect();
    SynthTrajectory { digit, samples, draw_start_s: draw_start, draw_end_s: draw_end }
}

/// Independent RNG for one dataset slot, identical regardless of scheduling.
pub fn trajectory_stream(seed: u64, digit: u8, index: usize, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((digit as u64) << 48) | ((index as u64) << 8) | attempt);
    rng
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub trajectories: usize,
    pub failures: usize,
}

/// synth → simulate → segment → rasterize for every class, then a stratified
/// seeded split. Images are byte-quantized so the in-memory dataset equals what
/// [`super::save_dataset`] writes.
pub fn build_dataset(cfg: &SynthConfig, sensor: &SensorConfig) -> Result<(Dataset, BuildStats), DatasetError> {
    cfg.validate()?;
    sensor.validate().map_err(|e| DatasetError::Config(e.to_string()))?;
    let layout = ElectrodeLayout::default();
    let seg = SegmenterConfig::default();

    let jobs: Vec<(u8, usize)> = (0..10u8).flat_map(|d| (0..cfg.per_class).map(move |i| (d, i))).collect();
    let results: Vec<(Option<DigitImage>, usize, usize)> = jobs
        .par_iter()
        .map(|&(digit, index)| {
            let mut failures = 0;
            for attempt in 0..MAX_ATTEMPTS {
                let mut rng = trajectory_stream(cfg.seed, digit, index, attempt);
                let synth = synth_trajectory(digit, cfg, &mut rng);
                let sensor = SensorConfig { seed: rng.random(), ..sensor.clone() };
                let cap = match capture(&synth.trajectory(), &sensor, &layout, &seg) {
                    Ok(c) => c,
                    Err(_) => {
                        failures += 1;
                        continue;
                    }
                };
                if let [trace] = cap.gestures.as_slice() {
                    if let Ok(img) = trace_to_image(trace, Some(digit)) {
                        return (Some(img.quantized()), failures, attempt as usize + 1);
                    }
                }
                failures += 1;
            }
            (None, failures, MAX_ATTEMPTS as usize)
        })
        .collect();

    let stats = BuildStats {
        trajectories: results.iter().map(|r| r.2).sum(),
        failures: results.iter().map(|r| r.1).sum(),
    };
    let exhausted = results.iter().any(|r| r.0.is_none());
    if exhausted || stats.failures as f64 > MAX_FAILURE_RATE * stats.trajectories as f64 {
        return Err(DatasetError::SegmentationFailure { failed: stats.failures, total: stats.trajectories });
    }

    let n_train = (cfg.per_class as f64 * cfg.split_ratio).floor() as usize;
    let mut images = results.into_iter().map(|r| r.0.expect("checked above"));
    let mut split_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    split_rng.set_stream(u64::MAX);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for _digit in 0..10 {
        let mut class: Vec<DigitImage> = images.by_ref().take(cfg.per_class).collect();
        class.shuffle(&mut split_rng);
        test.extend(class.split_off(n_train));
        train.extend(class);
    }
    train.shuffle(&mut split_rng);
    test.shuffle(&mut split_rng);
    Ok((Dataset { train, test, seed: cfg.seed, per_class: cfg.per_class }, stats))
}
