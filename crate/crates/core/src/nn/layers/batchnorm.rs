use super::{check_same_shape, no_cache, Layer};
use crate::nn::{LayerSpec, NnError, Scalar, Tensor};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight kept by the running statistics on each update.
pub const BN_MOMENTUM: f64 = 0.9;

/// Batch normalization per channel (`[N, C, H, W]`) or per feature (`[N, C]`).
///
/// Training normalizes with the batch's biased variance and folds the batch mean
/// and unbiased variance into the running statistics. Inference uses the running
/// statistics and fails until at least one training batch has been seen.
pub struct BatchNorm<S> {
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub running_mean: Tensor<S>,
    pub running_var: Tensor<S>,
    /// Single-element count of training batches folded into the running statistics.
    pub batches_tracked: Tensor<S>,
    grad_gamma: Tensor<S>,
    grad_beta: Tensor<S>,
    cache: Option<Cache<S>>,
}

struct Cache<S> {
    x_hat: Tensor<S>,
    inv_std: Vec<S>,
}

impl<S: Scalar> BatchNorm<S> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[channels], S::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], S::one()),
            batches_tracked: Tensor::zeros(&[1]),
            grad_gamma: Tensor::zeros(&[channels]),
            grad_beta: Tensor::zeros(&[channels]),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn has_running_stats(&self) -> bool {
        self.batches_tracked.data()[0] > S::zero()
    }

    /// `(batch, channels, spatial)` view of the input.
    fn layout(&self, x: &Tensor<S>) -> Result<(usize, usize), NnError> {
        let s = x.shape();
        if s.len() < 2 || s[1] != self.channels() {
            return Err(NnError::ShapeMismatch(format!(
                "batchnorm over {} channels got input {:?}",
                self.channels(),
                s
            )));
        }
        Ok((s[0], s[2..].iter().product()))
    }

    /// Normalizes with batch statistics without touching any state. Returns the
    /// output, the normalized input and per-channel `(mean, biased var)`.
    pub fn normalize_batch(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>, Vec<(S, S)>), NnError> {
        let (n, spatial) = self.layout(x)?;
        let c = self.channels();
        let m = n * spatial;
        if m == 0 {
            return Err(NnError::ShapeMismatch("batchnorm on an empty batch".into()));
        }
        let mf = S::from_usize(m).unwrap();
        let eps = S::from_f64_lossy(BN_EPSILON);
        let xd = x.data();
        let mut stats = Vec::with_capacity(c);
        for ch in 0..c {
            let mut sum = S::zero();
            for b in 0..n {
                let base = (b * c + ch) * spatial;
                sum += xd[base..base + spatial].iter().copied().sum::<S>();
            }
            let mean = sum / mf;
            let mut sq = S::zero();
            for b in 0..n {
                let base = (b * c + ch) * spatial;
                sq += xd[base..base + spatial].iter().map(|&v| (v - mean) * (v - mean)).sum::<S>();
            }
            stats.push((mean, sq / mf));
        }
        let mut x_hat = Tensor::zeros(x.shape());
        let mut y = Tensor::zeros(x.shape());
        for b in 0..n {
            for (ch, &(mean, var)) in stats.iter().enumerate() {
                let inv = S::one() / (var + eps).sqrt();
                let (g, bt) = (self.gamma.data()[ch], self.beta.data()[ch]);
                let base = (b * c + ch) * spatial;
                for i in base..base + spatial {
                    let h = (xd[i] - mean) * inv;
                    x_hat.data_mut()[i] = h;
                    y.data_mut()[i] = g * h + bt;
                }
            }
        }
        Ok((y, x_hat, stats))
    }
}

impl<S: Scalar> Layer<S> for BatchNorm<S> {
    fn spec(&self) -> LayerSpec {
        LayerSpec::BatchNorm
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        if !self.has_running_stats() {
            return Err(NnError::MissingRunningStats);
        }
        let (n, spatial) = self.layout(x)?;
        let c = self.channels();
        let eps = S::from_f64_lossy(BN_EPSILON);
        let scale: Vec<S> = (0..c)
            .map(|ch| self.gamma.data()[ch] / (self.running_var.data()[ch] + eps).sqrt())
            .collect();
        let mut y = x.clone();
        for b in 0..n {
            for ch in 0..c {
                let (mean, beta) = (self.running_mean.data()[ch], self.beta.data()[ch]);
                let base = (b * c + ch) * spatial;
                for v in &mut y.data_mut()[base..base + spatial] {
                    *v = (*v - mean) * scale[ch] + beta;
                }
            }
        }
        Ok(y)
    }

    fn forward(&mut self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let (y, x_hat, stats) = self.normalize_batch(x)?;
        let (n, spatial) = self.layout(x)?;
        let m = n * spatial;
        let mom = S::from_f64_lossy(BN_MOMENTUM);
        let eps = S::from_f64_lossy(BN_EPSILON);
        let bessel = if m > 1 { S::from_usize(m).unwrap() / S::from_usize(m - 1).unwrap() } else { S::one() };
        for (ch, &(mean, var)) in stats.iter().enumerate() {
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = mom * *rm + (S::one() - mom) * mean;
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = mom * *rv + (S::one() - mom) * var * bessel;
        }
        self.batches_tracked.data_mut()[0] += S::one();
        let inv_std = stats.iter().map(|&(_, var)| S::one() / (var + eps).sqrt()).collect();
        self.cache = Some(Cache { x_hat, inv_std });
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let cache = self.cache.as_ref().ok_or_else(|| no_cache("batchnorm"))?;
        check_same_shape(dy, cache.x_hat.shape(), "batchnorm")?;
        let (n, spatial) = self.layout(dy)?;
        let c = self.channels();
        let mf = S::from_usize(n * spatial).unwrap();
        let (dyd, xh) = (dy.data(), cache.x_hat.data());
        let mut dx = Tensor::zeros(dy.shape());
        for ch in 0..c {
            let (mut sum_dy, mut sum_dy_xh) = (S::zero(), S::zero());
            for b in 0..n {
                let base = (b * c + ch) * spatial;
                for i in base..base + spatial {
                    sum_dy += dyd[i];
                    sum_dy_xh += dyd[i] * xh[i];
                }
            }
            self.grad_gamma.data_mut()[ch] += sum_dy_xh;
            self.grad_beta.data_mut()[ch] += sum_dy;
            let k = self.gamma.data()[ch] * cache.inv_std[ch] / mf;
            for b in 0..n {
                let base = (b * c + ch) * spatial;
                for i in base..base + spatial {
                    dx.data_mut()[i] = k * (mf * dyd[i] - sum_dy - xh[i] * sum_dy_xh);
                }
            }
        }
        Ok(dx)
    }

    fn param_grads(&mut self) -> Vec<(&mut Tensor<S>, &mut Tensor<S>)> {
        vec![(&mut self.gamma, &mut self.grad_gamma), (&mut self.beta, &mut self.grad_beta)]
    }

    fn tensors(&self) -> Vec<(&'static str, &Tensor<S>)> {
        vec![
            ("gamma", &self.gamma),
            ("beta", &self.beta),
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
            ("batches_tracked", &self.batches_tracked),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor<S>)> {
        vec![
            ("gamma", &mut self.gamma),
            ("beta", &mut self.beta),
            ("running_mean", &mut self.running_mean),
            ("running_var", &mut self.running_var),
            ("batches_tracked", &mut self.batches_tracked),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn train_output_is_standardized_per_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, c, hw) = (4, 3, 5 * 5);
        let x = Tensor::from_fn(&[n, c, 5, 5], |i| rng.random_range(-2.0..5.0) * (1.0 + (i % 3) as f64));
        let mut bn = BatchNorm::<f64>::new(c);
        let y = bn.forward(&x).unwrap();
        for ch in 0..c {
            let vals: Vec<f64> = (0..n).flat_map(|b| y.data()[(b * c + ch) * hw..][..hw].to_vec()).collect();
            let m = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            assert!(mean.abs() <= 1e-6, "mean {mean}");
            // the epsilon in the denominator shrinks the variance by var/(var+eps)
            assert!((var - 1.0).abs() <= 1e-5, "var {var}");
        }
    }

    #[test]
    fn inference_needs_running_stats() {
        let bn = BatchNorm::<f32>::new(2);
        assert!(matches!(bn.infer(&Tensor::zeros(&[1, 2])), Err(NnError::MissingRunningStats)));
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNorm::<f64>::new(1);
        let x = Tensor::new(vec![4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        bn.forward(&x).unwrap();
        assert!((bn.running_mean.data()[0] - 0.25).abs() < 1e-12);
        // unbiased variance of 1..4 is 5/3
        assert!((bn.running_var.data()[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
        let y = bn.infer(&x).unwrap();
        let expect = (1.0 - 0.25) / (0.9 + 0.5 / 3.0 + 1e-5f64).sqrt();
        assert!((y.data()[0] - expect).abs() < 1e-12);
    }
}
