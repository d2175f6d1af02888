use super::{check_same_shape, no_cache, Layer};
use crate::nn::tensor::expect_rank;
use crate::nn::{LayerSpec, NnError, Scalar, Tensor};

/// 2×2 max pooling with stride 2. Odd trailing rows/columns are dropped.
#[derive(Default)]
pub struct MaxPool2 {
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2 {
    pub fn new() -> Self {
        Self::default()
    }
}

fn pool<S: Scalar>(x: &Tensor<S>, mut argmax: Option<&mut Vec<usize>>) -> Result<Tensor<S>, NnError> {
    expect_rank(x, 4, "maxpool2")?;
    let &[n, c, h, w] = x.shape() else { unreachable!() };
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(NnError::ShapeMismatch(format!("maxpool2 input too small: {:?}", x.shape())));
    }
    let mut y = Tensor::zeros(&[n, c, oh, ow]);
    let src = x.data();
    let mut o = 0;
    let out = y.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + 2 * i * w + 2 * j;
                for idx in [best + 1, best + w, best + w + 1] {
                    // strict comparison keeps the first maximum
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                out[o] = src[best];
                if let Some(a) = argmax.as_deref_mut() {
                    a.push(best);
                }
                o += 1;
            }
        }
    }
    Ok(y)
}

impl<S: Scalar> Layer<S> for MaxPool2 {
    fn spec(&self) -> LayerSpec {
        LayerSpec::MaxPool2
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        pool(x, None)
    }

    fn forward(&mut self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let mut argmax = Vec::new();
        let y = pool(x, Some(&mut argmax))?;
        self.cache = Some((x.shape().to_vec(), argmax));
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let (shape, argmax) = self.cache.as_ref().ok_or_else(|| no_cache("maxpool2"))?;
        let out_shape = [shape[0], shape[1], shape[2] / 2, shape[3] / 2];
        check_same_shape(dy, &out_shape, "maxpool2")?;
        let mut dx = Tensor::zeros(shape);
        let d = dx.data_mut();
        for (&idx, &g) in argmax.iter().zip(dy.data()) {
            d[idx] += g;
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_window_maxima_and_routes_gradient() {
        #[rustfmt::skip]
        let x = Tensor::<f64>::new(vec![1, 1, 2, 4], vec![
            1.0, 5.0, 2.0, 2.0,
            3.0, 4.0, 2.0, 0.0,
        ]).unwrap();
        let mut pool = MaxPool2::new();
        let y = pool.forward(&x).unwrap();
        assert_eq!(y.data(), &[5.0, 2.0]);
        let dx = Layer::<f64>::backward(&mut pool, &Tensor::new(vec![1, 1, 1, 2], vec![1.0, 7.0]).unwrap()).unwrap();
        // the tie in the second window goes to its first element
        assert_eq!(dx.data(), &[0.0, 1.0, 7.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn odd_sizes_floor() {
        let y = MaxPool2::new().infer(&Tensor::<f32>::zeros(&[2, 3, 7, 5])).unwrap();
        assert_eq!(y.shape(), &[2, 3, 3, 2]);
    }
}
