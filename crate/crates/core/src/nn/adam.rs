use serde::{Deserialize, Serialize};

use super::{NnError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for every parameter tensor, in the order they are passed to
/// [`AdamState::step`].
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<S>>,
    pub v: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// One bias-corrected update over all `(param, grad)` pairs.
    pub fn step<'a, I>(&mut self, pairs: I) -> Result<(), NnError>
    where
        I: IntoIterator<Item = (&'a mut Tensor<S>, &'a Tensor<S>)>,
    {
        self.t += 1;
        let c = self.config;
        let t = self.t as i32;
        let (b1, b2) = (S::from_f64_lossy(c.beta1), S::from_f64_lossy(c.beta2));
        let corr1 = S::from_f64_lossy(1.0 - c.beta1.powi(t));
        let corr2 = S::from_f64_lossy(1.0 - c.beta2.powi(t));
        let (lr, eps) = (S::from_f64_lossy(c.lr), S::from_f64_lossy(c.eps));
        for (k, (param, grad)) in pairs.into_iter().enumerate() {
            if param.shape() != grad.shape() {
                return Err(NnError::ShapeMismatch(format!(
                    "adam: parameter {:?} vs gradient {:?}",
                    param.shape(),
                    grad.shape()
                )));
            }
            if k == self.m.len() {
                self.m.push(vec![S::zero(); param.len()]);
                self.v.push(vec![S::zero(); param.len()]);
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            if m.len() != param.len() {
                return Err(NnError::ShapeMismatch(format!("adam: moment slot {k} has {} values, parameter {}", m.len(), param.len())));
            }
            for (((p, &g), mi), vi) in param.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (S::one() - b1) * g;
                *vi = b2 * *vi + (S::one() - b2) * g * g;
                let m_hat = *mi / corr1;
                let v_hat = *vi / corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
