//! Central finite-difference verification of the hand-derived backward passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layers::{BatchNorm, Conv2d, Dense, Flatten, Layer, Lstm, MaxPool2, Relu};
use super::loss::softmax_cross_entropy;
use super::model::{LayerSpec, ModelId, ModelSpec, Network};
use super::{NnError, Tensor};

pub const FD_STEP: f64 = 1e-5;
pub const LAYER_TOLERANCE: f64 = 1e-4;
pub const LOSS_TOLERANCE: f64 = 1e-6;
pub const LINEAR_TOLERANCE: f64 = 1e-8;
/// Magnitude below which gradients are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error.is_finite() && self.max_rel_error <= self.tolerance
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

fn weighted_sum(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

struct Tracker {
    max: f64,
    checked: usize,
}

impl Tracker {
    fn push(&mut self, analytic: f64, numeric: f64) {
        self.max = self.max.max(rel_error(analytic, numeric));
        self.checked += 1;
    }
}

/// Checks input and parameter gradients of `layer` (training mode) against
/// central differences of `L = Σ r ⊙ layer(x)` for a fixed random `r`.
pub fn check_layer(
    name: &str,
    layer: &mut dyn Layer<f64>,
    input: &Tensor<f64>,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = layer.forward(input)?;
    let r = uniform(y.shape(), -1.0, 1.0, &mut rng);
    layer.zero_grad();
    layer.forward(input)?;
    let dx = layer.backward(&r)?;
    let analytic_params: Vec<Tensor<f64>> = layer.param_grads().into_iter().map(|(_, g)| g.clone()).collect();

    let mut t = Tracker { max: 0.0, checked: 0 };
    let mut x = input.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + FD_STEP;
        let lp = weighted_sum(&layer.forward(&x)?, &r);
        x.data_mut()[i] = orig - FD_STEP;
        let lm = weighted_sum(&layer.forward(&x)?, &r);
        x.data_mut()[i] = orig;
        t.push(dx.data()[i], (lp - lm) / (2.0 * FD_STEP));
    }
    for (k, analytic) in analytic_params.iter().enumerate() {
        for j in 0..analytic.len() {
            let orig = layer.param_grads()[k].0.data()[j];
            layer.param_grads()[k].0.data_mut()[j] = orig + FD_STEP;
            let lp = weighted_sum(&layer.forward(input)?, &r);
            layer.param_grads()[k].0.data_mut()[j] = orig - FD_STEP;
            let lm = weighted_sum(&layer.forward(input)?, &r);
            layer.param_grads()[k].0.data_mut()[j] = orig;
            t.push(analytic.data()[j], (lp - lm) / (2.0 * FD_STEP));
        }
    }
    Ok(GradCheckReport { name: name.into(), max_rel_error: t.max, checked: t.checked, tolerance })
}

/// Checks the fused softmax/cross-entropy gradient w.r.t. the logits.
pub fn check_loss(logits: &Tensor<f64>, labels: &[usize], tolerance: f64) -> Result<GradCheckReport, NnError> {
    let analytic = softmax_cross_entropy(logits, labels)?.grad;
    let mut t = Tracker { max: 0.0, checked: 0 };
    let mut z = logits.clone();
    for i in 0..z.len() {
        let orig = z.data()[i];
        z.data_mut()[i] = orig + FD_STEP;
        let lp = softmax_cross_entropy(&z, labels)?.loss;
        z.data_mut()[i] = orig - FD_STEP;
        let lm = softmax_cross_entropy(&z, labels)?.loss;
        z.data_mut()[i] = orig;
        t.push(analytic.data()[i], (lp - lm) / (2.0 * FD_STEP));
    }
    Ok(GradCheckReport { name: "softmax+ce".into(), max_rel_error: t.max, checked: t.checked, tolerance })
}

/// Checks every parameter gradient of a whole network under the mean cross-entropy loss.
pub fn check_network(
    name: &str,
    net: &mut Network<f64>,
    x: &Tensor<f64>,
    labels: &[usize],
    tolerance: f64,
) -> Result<GradCheckReport, NnError> {
    let loss = |net: &mut Network<f64>| -> Result<f64, NnError> { Ok(softmax_cross_entropy(&net.forward(x)?, labels)?.loss) };
    net.zero_grad();
    let out = softmax_cross_entropy(&net.forward(x)?, labels)?;
    net.backward(&out.grad)?;
    let analytic: Vec<Tensor<f64>> = net.param_grads().into_iter().map(|(_, g)| g.clone()).collect();
    let mut t = Tracker { max: 0.0, checked: 0 };
    for (k, a) in analytic.iter().enumerate() {
        for j in 0..a.len() {
            let orig = net.param_grads()[k].0.data()[j];
            net.param_grads()[k].0.data_mut()[j] = orig + FD_STEP;
            let lp = loss(net)?;
            net.param_grads()[k].0.data_mut()[j] = orig - FD_STEP;
            let lm = loss(net)?;
            net.param_grads()[k].0.data_mut()[j] = orig;
            t.push(a.data()[j], (lp - lm) / (2.0 * FD_STEP));
        }
    }
    Ok(GradCheckReport { name: name.into(), max_rel_error: t.max, checked: t.checked, tolerance })
}

/// Values in `±[0.1, 1)`, away from the ReLU kink.
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.1..1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// Distinct values spaced well beyond the finite-difference step so no pooling
/// window changes its argmax under perturbation.
fn well_separated(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut ranks: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ranks.swap(i, rng.random_range(0..=i));
    }
    Tensor::new(shape.to_vec(), ranks.into_iter().map(|r| r as f64 * 0.05 - 1.0).collect()).unwrap()
}

/// Every layer type on small random batches of two, the loss, and one whole network.
pub fn run_suite(seed: u64) -> Result<Vec<GradCheckReport>, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();

    let mut dense = Dense::new(uniform(&[4, 5], -1.0, 1.0, &mut rng), uniform(&[4], -0.5, 0.5, &mut rng))?;
    let x = uniform(&[2, 5], -1.0, 1.0, &mut rng);
    reports.push(check_layer("dense", &mut dense, &x, LAYER_TOLERANCE, rng.random())?);
    reports.push(check_layer("dense (linear)", &mut dense, &x, LINEAR_TOLERANCE, rng.random())?);

    let mut conv = Conv2d::new(uniform(&[3, 2, 3, 3], -1.0, 1.0, &mut rng), uniform(&[3], -0.5, 0.5, &mut rng), 1, 1)?;
    let x = uniform(&[2, 2, 5, 5], -1.0, 1.0, &mut rng);
    reports.push(check_layer("conv2d", &mut conv, &x, LAYER_TOLERANCE, rng.random())?);
    let mut strided = Conv2d::new(uniform(&[2, 2, 3, 3], -1.0, 1.0, &mut rng), uniform(&[2], -0.5, 0.5, &mut rng), 2, 0)?;
    let x = uniform(&[2, 2, 6, 6], -1.0, 1.0, &mut rng);
    reports.push(check_layer("conv2d (stride 2)", &mut strided, &x, LAYER_TOLERANCE, rng.random())?);

    let x = well_separated(&[2, 2, 4, 4], &mut rng);
    reports.push(check_layer("maxpool2", &mut MaxPool2::new(), &x, LAYER_TOLERANCE, rng.random())?);

    let mut bn = BatchNorm::new(3);
    bn.gamma = uniform(&[3], 0.5, 1.5, &mut rng);
    bn.beta = uniform(&[3], -0.5, 0.5, &mut rng);
    let x = uniform(&[2, 3, 3, 3], -2.0, 2.0, &mut rng);
    reports.push(check_layer("batchnorm", &mut bn, &x, LAYER_TOLERANCE, rng.random())?);
    let mut bn1 = BatchNorm::new(4);
    bn1.gamma = uniform(&[4], 0.5, 1.5, &mut rng);
    let x = uniform(&[3, 4], -2.0, 2.0, &mut rng);
    reports.push(check_layer("batchnorm (features)", &mut bn1, &x, LAYER_TOLERANCE, rng.random())?);

    let x = away_from_zero(&[2, 3, 4], &mut rng);
    reports.push(check_layer("relu", &mut Relu::new(), &x, LAYER_TOLERANCE, rng.random())?);

    let x = uniform(&[2, 3, 2, 2], -1.0, 1.0, &mut rng);
    reports.push(check_layer("flatten", &mut Flatten::new(), &x, LAYER_TOLERANCE, rng.random())?);

    let (f, h, steps) = (4, 3, 5);
    let mut lstm = Lstm::new(
        uniform(&[4 * h, f], -0.8, 0.8, &mut rng),
        uniform(&[4 * h, h], -0.8, 0.8, &mut rng),
        uniform(&[4 * h], -0.5, 0.5, &mut rng),
    )?;
    let x = uniform(&[2, steps, f], -1.0, 1.0, &mut rng);
    reports.push(check_layer("lstm", &mut lstm, &x, LAYER_TOLERANCE, rng.random())?);

    let logits = uniform(&[2, 10], -3.0, 3.0, &mut rng);
    let labels = [rng.random_range(0..10), rng.random_range(0..10)];
    reports.push(check_loss(&logits, &labels, LOSS_TOLERANCE)?);

    let spec = ModelSpec {
        id: ModelId::Rnn,
        input_shape: vec![1, 5, 3],
        layers: vec![LayerSpec::Lstm { hidden: 4 }, LayerSpec::Dense { units: 10 }, LayerSpec::Softmax],
    };
    let mut net = Network::<f64>::new(spec, rng.random())?;
    let x = uniform(&[2, 1, 5, 3], -1.0, 1.0, &mut rng);
    let labels = [rng.random_range(0..10), rng.random_range(0..10)];
    reports.push(check_network("network (lstm+dense+ce)", &mut net, &x, &labels, LAYER_TOLERANCE)?);

    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for r in run_suite(42).unwrap() {
            assert!(r.passed(), "{r:?}");
            assert!(r.checked > 0);
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // a layer whose backward forgets a factor of two
        struct Doubler(Option<Tensor<f64>>);
        impl Layer<f64> for Doubler {
            fn spec(&self) -> LayerSpec {
                LayerSpec::Relu
            }
            fn infer(&self, x: &Tensor<f64>) -> Result<Tensor<f64>, NnError> {
                Ok(x.map(|v| 2.0 * v))
            }
            fn forward(&mut self, x: &Tensor<f64>) -> Result<Tensor<f64>, NnError> {
                self.0 = Some(x.clone());
                self.infer(x)
            }
            fn backward(&mut self, dy: &Tensor<f64>) -> Result<Tensor<f64>, NnError> {
                Ok(dy.clone())
            }
        }
        let x = Tensor::from_fn(&[2, 3], |i| i as f64);
        let r = check_layer("doubler", &mut Doubler(None), &x, LAYER_TOLERANCE, 1).unwrap();
        assert!(!r.passed());
        assert!((r.max_rel_error - 0.5).abs() < 1e-6);
    }
}
