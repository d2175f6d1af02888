use super::{check_same_shape, no_cache, Layer};
use crate::nn::scalar::strides;
use crate::nn::{LayerSpec, NnError, Scalar, Tensor};

/// Unidirectional LSTM returning the last hidden state.
///
/// Input `[N, ..., F]` is read as `T` timesteps of `F` features where `T` is the
/// product of the middle dimensions, so a `[N, 1, 28, 28]` image batch becomes 28
/// rows of 28 pixels. Gate blocks are stacked in the order input, forget, cell,
/// output: `w_ih: [4H, F]`, `w_hh: [4H, H]`, `bias: [4H]`. Initial state is zero.
pub struct Lstm<S> {
    pub w_ih: Tensor<S>,
    pub w_hh: Tensor<S>,
    pub bias: Tensor<S>,
    grad_w_ih: Tensor<S>,
    grad_w_hh: Tensor<S>,
    grad_bias: Tensor<S>,
    cache: Option<Cache<S>>,
}

struct Cache<S> {
    input: Tensor<S>,
    steps: usize,
    /// Activated gates per step, `[N, 4H]` each.
    gates: Vec<Vec<S>>,
    /// Cell and hidden states, `T + 1` entries of `[N, H]` starting with the zero state.
    cells: Vec<Vec<S>>,
    hiddens: Vec<Vec<S>>,
}

fn sigmoid<S: Scalar>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

impl<S: Scalar> Lstm<S> {
    pub fn new(w_ih: Tensor<S>, w_hh: Tensor<S>, bias: Tensor<S>) -> Result<Self, NnError> {
        let h = w_hh.shape().get(1).copied().unwrap_or(0);
        let ok = w_ih.shape().len() == 2
            && w_hh.shape() == [4 * h, h]
            && w_ih.shape()[0] == 4 * h
            && bias.shape() == [4 * h]
            && h > 0;
        if !ok {
            return Err(NnError::ShapeMismatch(format!(
                "lstm weights w_ih {:?} w_hh {:?} bias {:?} inconsistent",
                w_ih.shape(),
                w_hh.shape(),
                bias.shape()
            )));
        }
        Ok(Self {
            grad_w_ih: Tensor::zeros(w_ih.shape()),
            grad_w_hh: Tensor::zeros(w_hh.shape()),
            grad_bias: Tensor::zeros(bias.shape()),
            w_ih,
            w_hh,
            bias,
            cache: None,
        })
    }

    pub fn zeros(features: usize, hidden: usize) -> Self {
        Self::new(
            Tensor::zeros(&[4 * hidden, features]),
            Tensor::zeros(&[4 * hidden, hidden]),
            Tensor::zeros(&[4 * hidden]),
        )
        .unwrap()
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    pub fn features(&self) -> usize {
        self.w_ih.shape()[1]
    }

    fn steps(&self, x: &Tensor<S>) -> Result<usize, NnError> {
        let s = x.shape();
        if s.len() < 3 || s[s.len() - 1] != self.features() {
            return Err(NnError::ShapeMismatch(format!(
                "lstm expects [N, T, {}] input, got {:?}",
                self.features(),
                s
            )));
        }
        Ok(s[1..s.len() - 1].iter().product())
    }

    fn run(&self, x: &Tensor<S>, keep: bool) -> Result<(Tensor<S>, Option<Cache<S>>), NnError> {
        let t_steps = self.steps(x)?;
        let (n, f, h) = (x.batch(), self.features(), self.hidden());
        let g4 = 4 * h;
        let mut c = vec![S::zero(); n * h];
        let mut hs = vec![S::zero(); n * h];
        let mut cache = keep.then(|| Cache {
            input: x.clone(),
            steps: t_steps,
            gates: Vec::with_capacity(t_steps),
            cells: vec![c.clone()],
            hiddens: vec![hs.clone()],
        });
        let mut z = vec![S::zero(); n * g4];
        for t in 0..t_steps {
            for row in z.chunks_exact_mut(g4) {
                row.copy_from_slice(self.bias.data());
            }
            if n > 0 {
                S::gemm(
                    n,
                    f,
                    g4,
                    S::one(),
                    &x.data()[t * f..],
                    (t_steps * f, 1),
                    self.w_ih.data(),
                    strides(f, g4, true),
                    S::one(),
                    &mut z,
                    (g4, 1),
                );
                S::gemm(n, h, g4, S::one(), &hs, (h, 1), self.w_hh.data(), strides(h, g4, true), S::one(), &mut z, (g4, 1));
            }
            for b in 0..n {
                let zr = &mut z[b * g4..(b + 1) * g4];
                for j in 0..h {
                    let i = sigmoid(zr[j]);
                    let fg = sigmoid(zr[h + j]);
                    let g = zr[2 * h + j].tanh();
                    let o = sigmoid(zr[3 * h + j]);
                    let cell = fg * c[b * h + j] + i * g;
                    c[b * h + j] = cell;
                    hs[b * h + j] = o * cell.tanh();
                    zr[j] = i;
                    zr[h + j] = fg;
                    zr[2 * h + j] = g;
                    zr[3 * h + j] = o;
                }
            }
            if let Some(cache) = cache.as_mut() {
                cache.gates.push(z.clone());
                cache.cells.push(c.clone());
                cache.hiddens.push(hs.clone());
            }
        }
        Ok((Tensor::new(vec![n, h], hs)?, cache))
    }
}

impl<S: Scalar> Layer<S> for Lstm<S> {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Lstm { hidden: self.hidden() }
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        Ok(self.run(x, false)?.0)
    }

    fn forward(&mut self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let (y, cache) = self.run(x, true)?;
        self.cache = cache;
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let cache = self.cache.as_ref().ok_or_else(|| no_cache("lstm"))?;
        let (n, f, h) = (cache.input.batch(), self.features(), self.hidden());
        check_same_shape(dy, &[n, h], "lstm")?;
        let (g4, t_steps) = (4 * h, cache.steps);
        let x = cache.input.data();
        let mut dx = Tensor::zeros(cache.input.shape());
        let mut dh = dy.data().to_vec();
        let mut dc = vec![S::zero(); n * h];
        let mut dz = vec![S::zero(); n * g4];
        for t in (0..t_steps).rev() {
            let gates = &cache.gates[t];
            let (c_prev, c_t) = (&cache.cells[t], &cache.cells[t + 1]);
            for b in 0..n {
                for j in 0..h {
                    let k = b * h + j;
                    let gr = &gates[b * g4..(b + 1) * g4];
                    let (i, fg, g, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                    let tc = c_t[k].tanh();
                    let dct = dc[k] + dh[k] * o * (S::one() - tc * tc);
                    let dzr = &mut dz[b * g4..(b + 1) * g4];
                    dzr[j] = dct * g * i * (S::one() - i);
                    dzr[h + j] = dct * c_prev[k] * fg * (S::one() - fg);
                    dzr[2 * h + j] = dct * i * (S::one() - g * g);
                    dzr[3 * h + j] = dh[k] * tc * o * (S::one() - o);
                    dc[k] = dct * fg;
                }
            }
            if n == 0 {
                continue;
            }
            let h_prev = &cache.hiddens[t];
            S::gemm(
                g4,
                n,
                f,
                S::one(),
                &dz,
                strides(g4, n, true),
                &x[t * f..],
                (t_steps * f, 1),
                S::one(),
                self.grad_w_ih.data_mut(),
                (f, 1),
            );
            S::gemm(g4, n, h, S::one(), &dz, strides(g4, n, true), h_prev, (h, 1), S::one(), self.grad_w_hh.data_mut(), (h, 1));
            for row in dz.chunks_exact(g4) {
                for (gb, &d) in self.grad_bias.data_mut().iter_mut().zip(row) {
                    *gb += d;
                }
            }
            S::gemm(
                n,
                g4,
                f,
                S::one(),
                &dz,
                (g4, 1),
                self.w_ih.data(),
                (f, 1),
                S::zero(),
                &mut dx.data_mut()[t * f..],
                (t_steps * f, 1),
            );
            S::gemm(n, g4, h, S::one(), &dz, (g4, 1), self.w_hh.data(), (h, 1), S::zero(), &mut dh, (h, 1));
        }
        Ok(dx)
    }

    fn param_grads(&mut self) -> Vec<(&mut Tensor<S>, &mut Tensor<S>)> {
        vec![
            (&mut self.w_ih, &mut self.grad_w_ih),
            (&mut self.w_hh, &mut self.grad_w_hh),
            (&mut self.bias, &mut self.grad_bias),
        ]
    }

    fn tensors(&self) -> Vec<(&'static str, &Tensor<S>)> {
        vec![("w_ih", &self.w_ih), ("w_hh", &self.w_hh), ("bias", &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor<S>)> {
        vec![("w_ih", &mut self.w_ih), ("w_hh", &mut self.w_hh), ("bias", &mut self.bias)]
    }
}
