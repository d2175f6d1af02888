use std::f64::consts::PI;

/// One-pole IIR low-pass, the discrete counterpart of the RC stage after the
/// phase-frequency comparator. DC gain is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPass {
    alpha: f64,
    y: Option<f64>,
}

impl LowPass {
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        Self { alpha: Self::alpha(cutoff_hz, sample_rate_hz), y: None }
    }

    /// Smoothing factor `1 - exp(-2π·fc/fs)`.
    pub fn alpha(cutoff_hz: f64, sample_rate_hz: f64) -> f64 {
        1.0 - (-2.0 * PI * cutoff_hz / sample_rate_hz).exp()
    }

    pub fn with_state(mut self, y: f64) -> Self {
        self.y = Some(y);
        self
    }

    pub fn state(&self) -> Option<f64> {
        self.y
    }

    pub fn reset(&mut self) {
        self.y = None;
    }

    /// Advance one sample. An uninitialized filter starts from its first input.
    pub fn step(&mut self, u: f64) -> f64 {
        let y = match self.y {
            Some(y) => y + self.alpha * (u - y),
            None => u,
        };
        self.y = Some(y);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_is_a_fixed_point() {
        let mut f = LowPass::new(72.3, 8000.0).with_state(0.5);
        for _ in 0..10_000 {
            assert_eq!(f.step(0.5), 0.5);
        }
    }

    #[test]
    fn first_input_initializes_state() {
        let mut f = LowPass::new(72.3, 8000.0);
        assert_eq!(f.step(0.37), 0.37);
        assert_eq!(f.state(), Some(0.37));
    }

    #[test]
    fn step_response_time_constant_at_2khz() {
        let fs = 2000.0;
        let fc = 72.3;
        let tau_steps = fs / (2.0 * PI * fc);
        let mut f = LowPass::new(fc, fs).with_state(0.0);
        let target = 1.0 - (-1.0f64).exp();
        let mut crossed = None;
        for n in 1..=20 {
            let y = f.step(1.0);
            // closed form of the sampled exponential
            let closed = 1.0 - (-(n as f64) / tau_steps).exp();
            assert!((y - closed).abs() < 1e-12);
            if crossed.is_none() && y >= target {
                crossed = Some(n);
            }
        }
        assert_eq!(crossed, Some(tau_steps.ceil() as usize));
        assert_eq!(crossed, Some(5));
        let alpha = LowPass::alpha(fc, fs);
        let tau_est_s = -1.0 / (1.0 - alpha).ln() / fs;
        let tau_rc = 1.0 / (2.0 * PI * fc);
        assert!((tau_est_s / tau_rc - 1.0).abs() < 0.02);
    }
}
