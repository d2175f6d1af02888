use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm, Conv2d, Dense, Flatten, Layer, Lstm, MaxPool2, Relu};
use super::{NnError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d { out_channels: usize, kernel: usize, stride: usize, padding: usize },
    BatchNorm,
    Relu,
    MaxPool2,
    Flatten,
    Dense { units: usize },
    Lstm { hidden: usize },
    Softmax,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Conv2d { .. } => "conv2d",
            Self::BatchNorm => "batchnorm",
            Self::Relu => "relu",
            Self::MaxPool2 => "maxpool2",
            Self::Flatten => "flatten",
            Self::Dense { .. } => "dense",
            Self::Lstm { .. } => "lstm",
            Self::Softmax => "softmax",
        }
    }

    /// Per-sample output shape (no batch dimension).
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let bad = || NnError::InvalidSpec(format!("{} cannot take input {input:?}", self.name()));
        match *self {
            Self::Conv2d { out_channels, kernel, stride, padding } => {
                let &[_, h, w] = input else { return Err(bad()) };
                if out_channels == 0 || kernel == 0 || stride == 0 || h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return Err(bad());
                }
                Ok(vec![out_channels, (h + 2 * padding - kernel) / stride + 1, (w + 2 * padding - kernel) / stride + 1])
            }
            Self::BatchNorm => match input.len() {
                1 | 3 => Ok(input.to_vec()),
                _ => Err(bad()),
            },
            Self::Relu | Self::Softmax => Ok(input.to_vec()),
            Self::MaxPool2 => match *input {
                [c, h, w] if h >= 2 && w >= 2 => Ok(vec![c, h / 2, w / 2]),
                _ => Err(bad()),
            },
            Self::Flatten => Ok(vec![input.iter().product()]),
            Self::Dense { units } => match input {
                [_] if units > 0 => Ok(vec![units]),
                _ => Err(bad()),
            },
            Self::Lstm { hidden } => {
                if input.len() < 2 || hidden == 0 {
                    return Err(bad());
                }
                Ok(vec![hidden])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Cnn,
    Mlp,
    Rnn,
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cnn => "cnn",
            Self::Mlp => "mlp",
            Self::Rnn => "rnn",
        })
    }
}

impl FromStr for ModelId {
    type Err = NnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cnn" => Ok(Self::Cnn),
            "mlp" => Ok(Self::Mlp),
            "rnn" => Ok(Self::Rnn),
            _ => Err(NnError::InvalidSpec(format!("unknown model id {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: ModelId,
    /// Per-sample input shape, `[channels, rows, cols]`.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn cnn() -> Self {
        use LayerSpec::*;
        let conv = |out_channels| Conv2d { out_channels, kernel: 3, stride: 1, padding: 1 };
        Self {
            id: ModelId::Cnn,
            input_shape: vec![1, 28, 28],
            layers: vec![
                conv(32),
                BatchNorm,
                Relu,
                conv(32),
                BatchNorm,
                Relu,
                MaxPool2,
                conv(64),
                BatchNorm,
                Relu,
                MaxPool2,
                Flatten,
                Dense { units: 128 },
                Relu,
                Dense { units: 10 },
                Softmax,
            ],
        }
    }

    pub fn mlp() -> Self {
        use LayerSpec::*;
        Self {
            id: ModelId::Mlp,
            input_shape: vec![1, 28, 28],
            layers: vec![Flatten, Dense { units: 256 }, Relu, Dense { units: 128 }, Relu, Dense { units: 10 }, Softmax],
        }
    }

    pub fn rnn() -> Self {
        use LayerSpec::*;
        Self {
            id: ModelId::Rnn,
            input_shape: vec![1, 28, 28],
            layers: vec![Lstm { hidden: 128 }, Dense { units: 10 }, Softmax],
        }
    }

    pub fn preset(id: ModelId) -> Self {
        match id {
            ModelId::Cnn => Self::cnn(),
            ModelId::Mlp => Self::mlp(),
            ModelId::Rnn => Self::rnn(),
        }
    }

    /// Per-sample shapes entering each layer, followed by the final output shape.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>, NnError> {
        let mut shapes = vec![self.input_shape.clone()];
        for l in &self.layers {
            let next = l.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn classes(&self) -> Result<usize, NnError> {
        match self.shapes()?.last().map(Vec::as_slice) {
            Some(&[k]) => Ok(k),
            other => Err(NnError::InvalidSpec(format!("model output {other:?} is not a class vector"))),
        }
    }

    /// Shapes chain from the input to a 10-way output, and softmax appears exactly once, last.
    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_shape.len() != 3 || self.input_shape.iter().any(|&d| d == 0) {
            return Err(NnError::InvalidSpec(format!("input shape {:?} must be [c, h, w]", self.input_shape)));
        }
        let softmaxes = self.layers.iter().filter(|l| **l == LayerSpec::Softmax).count();
        if softmaxes != 1 || self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(NnError::InvalidSpec("softmax must be the single terminal layer".into()));
        }
        let classes = self.classes()?;
        if classes != 10 {
            return Err(NnError::InvalidSpec(format!("model outputs {classes} classes, expected 10")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    HeUniform,
    GlorotUniform,
}

fn uniform_tensor<S: Scalar>(shape: &[usize], limit: f64, rng: &mut ChaCha8Rng) -> Tensor<S> {
    Tensor::from_fn(shape, |_| S::from_f64_lossy(rng.random_range(-limit..=limit)))
}

fn init_limit(init: Init, fan_in: usize, fan_out: usize) -> f64 {
    match init {
        Init::HeUniform => (6.0 / fan_in as f64).sqrt(),
        Init::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    }
}

/// A sequential stack of layers built from a [`ModelSpec`]. The terminal softmax
/// is not materialized: the network outputs logits.
pub struct Network<S: Scalar> {
    spec: ModelSpec,
    layers: Vec<Box<dyn Layer<S>>>,
}

impl<S: Scalar> Network<S> {
    /// Builds the network with seeded weight initialization: He-uniform for layers
    /// feeding a ReLU (possibly through a batchnorm), Glorot-uniform elsewhere, zero biases.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        let shapes = spec.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers: Vec<Box<dyn Layer<S>>> = Vec::new();
        for (k, l) in spec.layers.iter().enumerate() {
            let input = &shapes[k];
            let feeds_relu = spec.layers[k + 1..]
                .iter()
                .find(|n| **n != LayerSpec::BatchNorm)
                .is_some_and(|n| *n == LayerSpec::Relu);
            let init = if feeds_relu { Init::HeUniform } else { Init::GlorotUniform };
            let layer: Box<dyn Layer<S>> = match *l {
                LayerSpec::Conv2d { out_channels, kernel, stride, padding } => {
                    let c = input[0];
                    let limit = init_limit(init, c * kernel * kernel, out_channels * kernel * kernel);
                    let w = uniform_tensor(&[out_channels, c, kernel, kernel], limit, &mut rng);
                    Box::new(Conv2d::new(w, Tensor::zeros(&[out_channels]), stride, padding)?)
                }
                LayerSpec::BatchNorm => Box::new(BatchNorm::new(input[0])),
                LayerSpec::Relu => Box::new(Relu::new()),
                LayerSpec::MaxPool2 => Box::new(MaxPool2::new()),
                LayerSpec::Flatten => Box::new(Flatten::new()),
                LayerSpec::Dense { units } => {
                    let w = uniform_tensor(&[units, input[0]], init_limit(init, input[0], units), &mut rng);
                    Box::new(Dense::new(w, Tensor::zeros(&[units]))?)
                }
                LayerSpec::Lstm { hidden } => {
                    let f = *input.last().unwrap();
                    let w_ih = uniform_tensor(&[4 * hidden, f], init_limit(init, f, 4 * hidden), &mut rng);
                    let w_hh = uniform_tensor(&[4 * hidden, hidden], init_limit(init, hidden, 4 * hidden), &mut rng);
                    Box::new(Lstm::new(w_ih, w_hh, Tensor::zeros(&[4 * hidden]))?)
                }
                LayerSpec::Softmax => continue,
            };
            layers.push(layer);
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Box<dyn Layer<S>>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Box<dyn Layer<S>>] {
        &mut self.layers
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<(), NnError> {
        if x.shape().len() != 4 || x.shape()[1..] != self.spec.input_shape[..] {
            return Err(NnError::ShapeMismatch(format!(
                "model expects [N, {:?}] input, got {:?}",
                self.spec.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Evaluation-mode logits.
    pub fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        self.check_input(x)?;
        let mut h = x.clone();
        for l in &self.layers {
            h = l.infer(&h)?;
        }
        Ok(h)
    }

    /// Training-mode logits; caches activations for [`Network::backward`].
    pub fn forward(&mut self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        self.check_input(x)?;
        let mut h = x.clone();
        for l in &mut self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    /// Backpropagates a logit gradient; returns the input gradient.
    pub fn backward(&mut self, dlogits: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let mut g = dlogits.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            l.zero_grad();
        }
    }

    pub fn param_grads(&mut self) -> Vec<(&mut Tensor<S>, &mut Tensor<S>)> {
        self.layers.iter_mut().flat_map(|l| l.param_grads()).collect()
    }

    pub fn parameter_count(&mut self) -> usize {
        self.param_grads().iter().map(|(p, _)| p.len()).sum()
    }

    /// Every persisted tensor as `"{index}.{layer}.{name}"`, in a stable order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            let kind = l.spec().name();
            for (name, t) in l.tensors() {
                out.push((format!("{k}.{kind}.{name}"), t));
            }
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<S>)> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter_mut().enumerate() {
            let kind = l.spec().name();
            for (name, t) in l.tensors_mut() {
                out.push((format!("{k}.{kind}.{name}"), t));
            }
        }
        out
    }

    /// Same architecture and weights in another precision.
    pub fn cast<T: Scalar>(&self) -> Result<Network<T>, NnError> {
        let mut net = Network::<T>::new(self.spec.clone(), 0)?;
        for ((_, dst), (_, src)) in net.named_tensors_mut().into_iter().zip(self.named_tensors()) {
            *dst = src.cast();
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_chain_to_ten_classes() {
        for id in [ModelId::Cnn, ModelId::Mlp, ModelId::Rnn] {
            let spec = ModelSpec::preset(id);
            spec.validate().unwrap();
            assert_eq!(spec.classes().unwrap(), 10);
        }
        let shapes = ModelSpec::cnn().shapes().unwrap();
        assert_eq!(shapes[11], vec![64, 7, 7]);
        assert_eq!(shapes[12], vec![3136]);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = ModelSpec::mlp();
        s.layers.pop();
        assert!(s.validate().is_err());
        let mut s = ModelSpec::mlp();
        s.layers.insert(2, LayerSpec::Softmax);
        assert!(s.validate().is_err());
        let mut s = ModelSpec::mlp();
        s.layers[5] = LayerSpec::Dense { units: 7 };
        assert!(s.validate().is_err());
        let mut s = ModelSpec::mlp();
        s.layers.remove(0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn spec_serde_round_trip() {
        let s = ModelSpec::cnn();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"type\":\"conv2d\""));
        assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), s);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Network::<f32>::new(ModelSpec::mlp(), 7).unwrap();
        let b = Network::<f32>::new(ModelSpec::mlp(), 7).unwrap();
        let c = Network::<f32>::new(ModelSpec::mlp(), 8).unwrap();
        let ta = a.named_tensors();
        assert_eq!(ta, b.named_tensors());
        assert_ne!(ta, c.named_tensors());
        // first dense feeds a ReLU: He-uniform limit sqrt(6/784)
        let (name, w) = &ta[0];
        assert_eq!(name, "1.dense.weight");
        let lim = (6.0f32 / 784.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= lim));
        assert!(w.data().iter().any(|v| v.abs() > 0.9 * lim));
        assert!(ta[1].1.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_shapes() {
        for spec in [ModelSpec::cnn(), ModelSpec::mlp(), ModelSpec::rnn()] {
            let mut net = Network::<f32>::new(spec, 1).unwrap();
            let y = net.forward(&Tensor::zeros(&[2, 1, 28, 28])).unwrap();
            assert_eq!(y.shape(), &[2, 10]);
            assert!(net.infer(&Tensor::zeros(&[2, 28, 28, 1])).is_err());
        }
    }
}
