use super::{check_same_shape, no_cache, Layer};
use crate::nn::scalar::strides;
use crate::nn::tensor::expect_rank;
use crate::nn::{LayerSpec, NnError, Scalar, Tensor};

/// Fully connected layer, `y = x Wᵀ + b` with `W: [out, in]`.
pub struct Dense<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    grad_w: Tensor<S>,
    grad_b: Tensor<S>,
    input: Option<Tensor<S>>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(weight: Tensor<S>, bias: Tensor<S>) -> Result<Self, NnError> {
        expect_rank(&weight, 2, "dense weight")?;
        if bias.shape() != [weight.shape()[0]] {
            return Err(NnError::ShapeMismatch(format!(
                "dense bias {:?} does not match weight {:?}",
                bias.shape(),
                weight.shape()
            )));
        }
        Ok(Self {
            grad_w: Tensor::zeros(weight.shape()),
            grad_b: Tensor::zeros(bias.shape()),
            weight,
            bias,
            input: None,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self::new(Tensor::zeros(&[outputs, inputs]), Tensor::zeros(&[outputs])).unwrap()
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<(), NnError> {
        expect_rank(x, 2, "dense")?;
        if x.shape()[1] != self.inputs() {
            return Err(NnError::ShapeMismatch(format!(
                "dense expects {} features, got {:?}",
                self.inputs(),
                x.shape()
            )));
        }
        Ok(())
    }
}

/// `y[n, o] = Σ_i x[n, i] w[o, i] + b[o]`.
pub(crate) fn affine<S: Scalar>(x: &[S], n: usize, w: &[S], inputs: usize, outputs: usize, b: &[S], y: &mut [S]) {
    for row in y.chunks_exact_mut(outputs) {
        row.copy_from_slice(b);
    }
    S::gemm(
        n,
        inputs,
        outputs,
        S::one(),
        x,
        strides(n, inputs, false),
        w,
        strides(inputs, outputs, true),
        S::one(),
        y,
        (outputs, 1),
    );
}

impl<S: Scalar> Layer<S> for Dense<S> {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Dense { units: self.outputs() }
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        self.check_input(x)?;
        let n = x.batch();
        let mut y = Tensor::zeros(&[n, self.outputs()]);
        affine(x.data(), n, self.weight.data(), self.inputs(), self.outputs(), self.bias.data(), y.data_mut());
        Ok(y)
    }

    fn forward(&mut self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let x = self.input.as_ref().ok_or_else(|| no_cache("dense"))?;
        let (n, inp, out) = (x.batch(), self.inputs(), self.outputs());
        check_same_shape(dy, &[n, out], "dense")?;
        // dW += dyᵀ x
        S::gemm(
            out,
            n,
            inp,
            S::one(),
            dy.data(),
            strides(out, n, true),
            x.data(),
            strides(n, inp, false),
            S::one(),
            self.grad_w.data_mut(),
            (inp, 1),
        );
        for row in dy.data().chunks_exact(out) {
            for (g, &d) in self.grad_b.data_mut().iter_mut().zip(row) {
                *g += d;
            }
        }
        // dx = dy W
        let mut dx = Tensor::zeros(&[n, inp]);
        S::gemm(
            n,
            out,
            inp,
            S::one(),
            dy.data(),
            strides(n, out, false),
            self.weight.data(),
            strides(out, inp, false),
            S::zero(),
            dx.data_mut(),
            (inp, 1),
        );
        Ok(dx)
    }

    fn param_grads(&mut self) -> Vec<(&mut Tensor<S>, &mut Tensor<S>)> {
        vec![(&mut self.weight, &mut self.grad_w), (&mut self.bias, &mut self.grad_b)]
    }

    fn tensors(&self) -> Vec<(&'static str, &Tensor<S>)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor<S>)> {
        vec![("weight", &mut self.weight), ("bias", &mut self.bias)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_hand_computation() {
        let w = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.0, 0.5]).unwrap();
        let b = Tensor::new(vec![2], vec![0.5, -0.5]).unwrap();
        let layer = Dense::<f64>::new(w, b).unwrap();
        let x = Tensor::new(vec![1, 3], vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(layer.infer(&x).unwrap().data(), &[9.5, -0.5]);
    }

    #[test]
    fn rejects_wrong_width() {
        let layer = Dense::<f32>::zeros(4, 2);
        assert!(matches!(layer.infer(&Tensor::zeros(&[1, 3])), Err(NnError::ShapeMismatch(_))));
    }
}
