use super::{check_same_shape, no_cache, Layer};
use crate::nn::{LayerSpec, NnError, Scalar, Tensor};

/// `max(0, x)`; the derivative at exactly zero is taken as zero.
#[derive(Default)]
pub struct Relu<S> {
    input: Option<Tensor<S>>,
}

impl<S: Scalar> Relu<S> {
    pub fn new() -> Self {
        Self { input: None }
    }
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| if v > S::zero() { v } else { S::zero() })
}

pub fn relu_backward<S: Scalar>(dy: &Tensor<S>, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
    check_same_shape(dy, x.shape(), "relu")?;
    let data = dy.data().iter().zip(x.data()).map(|(&d, &v)| if v > S::zero() { d } else { S::zero() }).collect();
    Tensor::new(x.shape().to_vec(), data)
}

impl<S: Scalar> Layer<S> for Relu<S> {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Relu
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        Ok(relu(x))
    }

    fn forward(&mut self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        self.input = Some(x.clone());
        Ok(relu(x))
    }

    fn backward(&mut self, dy: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let x = self.input.as_ref().ok_or_else(|| no_cache("relu"))?;
        relu_backward(dy, x)
    }
}

/// Collapses everything after the batch dimension.
#[derive(Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<S: Scalar> Layer<S> for Flatten {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Flatten
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        if x.shape().is_empty() {
            return Err(NnError::ShapeMismatch("flatten needs a batch dimension".into()));
        }
        let n = x.batch();
        let rest = x.shape()[1..].iter().product();
        x.clone().reshape(&[n, rest])
    }

    fn forward(&mut self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        self.input_shape = Some(x.shape().to_vec());
        self.infer(x)
    }

    fn backward(&mut self, dy: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let shape = self.input_shape.as_ref().ok_or_else(|| no_cache("flatten"))?;
        dy.clone().reshape(shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relu_by_inspection() {
        let x = Tensor::new(vec![3], vec![-3.0, 2.0, 0.0]).unwrap();
        assert_eq!(relu::<f64>(&x).data(), &[0.0, 2.0, 0.0]);
        let dx = relu_backward(&Tensor::filled(&[3], 1.0), &x).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn flatten_round_trip() {
        let mut f = Flatten::new();
        let x = Tensor::<f64>::from_fn(&[2, 3, 2, 2], |i| i as f64);
        let y = f.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 12]);
        assert_eq!(Layer::<f64>::backward(&mut f, &y).unwrap(), x);
    }

    proptest! {
        #[test]
        fn relu_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..50)) {
            let x = Tensor::new(vec![v.len()], v).unwrap();
            let once = relu(&x);
            prop_assert_eq!(relu(&once), once);
        }
    }
}
