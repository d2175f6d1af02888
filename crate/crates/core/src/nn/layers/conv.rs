use super::{check_same_shape, no_cache, Layer};
use crate::nn::scalar::strides;
use crate::nn::tensor::expect_rank;
use crate::nn::{LayerSpec, NnError, Scalar, Tensor};

/// 2-D cross-correlation over NCHW input with square kernels, zero padding.
/// `weight: [out_c, in_c, k, k]`, `bias: [out_c]`.
pub struct Conv2d<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    pub stride: usize,
    pub padding: usize,
    grad_w: Tensor<S>,
    grad_b: Tensor<S>,
    input: Option<Tensor<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl Geometry {
    pub fn new(c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Result<Self, NnError> {
        if stride == 0 || k == 0 || h + 2 * pad < k || w + 2 * pad < k {
            return Err(NnError::ShapeMismatch(format!(
                "conv: kernel {k} stride {stride} padding {pad} does not fit {h}x{w}"
            )));
        }
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        Ok(Self { c, h, w, k, stride, pad, oh, ow })
    }

    pub fn col_rows(&self) -> usize {
        self.c * self.k * self.k
    }

    pub fn col_cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Source coordinate for output position `o` and kernel offset `kk`, if inside.
    #[inline]
    fn src(&self, o: usize, kk: usize, extent: usize) -> Option<usize> {
        let p = (o * self.stride + kk).checked_sub(self.pad)?;
        (p < extent).then_some(p)
    }
}

/// Unfolds one `[c, h, w]` image into `[c·k·k, oh·ow]` columns.
pub fn im2col<S: Scalar>(x: &[S], c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Result<Vec<S>, NnError> {
    let g = Geometry::new(c, h, w, k, stride, pad)?;
    let mut col = vec![S::zero(); g.col_rows() * g.col_cols()];
    im2col_into(x, &g, &mut col);
    Ok(col)
}

pub(crate) fn im2col_into<S: Scalar>(x: &[S], g: &Geometry, col: &mut [S]) {
    let cols = g.col_cols();
    for ch in 0..g.c {
        let plane = &x[ch * g.h * g.w..(ch + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (ch * g.k + ki) * g.k + kj;
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let out = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    match g.src(oy, ki, g.h) {
                        None => out.fill(S::zero()),
                        Some(sy) => {
                            let src_row = &plane[sy * g.w..(sy + 1) * g.w];
                            for (ox, v) in out.iter_mut().enumerate() {
                                *v = g.src(ox, kj, g.w).map_or(S::zero(), |sx| src_row[sx]);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Folds columns back onto a `[c, h, w]` image, summing overlaps.
pub fn col2im<S: Scalar>(col: &[S], c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Result<Vec<S>, NnError> {
    let g = Geometry::new(c, h, w, k, stride, pad)?;
    let mut x = vec![S::zero(); c * h * w];
    col2im_add(col, &g, &mut x);
    Ok(x)
}

pub(crate) fn col2im_add<S: Scalar>(col: &[S], g: &Geometry, x: &mut [S]) {
    let cols = g.col_cols();
    for ch in 0..g.c {
        let plane = &mut x[ch * g.h * g.w..(ch + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (ch * g.k + ki) * g.k + kj;
                let src = &col[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let Some(sy) = g.src(oy, ki, g.h) else { continue };
                    for ox in 0..g.ow {
                        if let Some(sx) = g.src(ox, kj, g.w) {
                            plane[sy * g.w + sx] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(weight: Tensor<S>, bias: Tensor<S>, stride: usize, padding: usize) -> Result<Self, NnError> {
        expect_rank(&weight, 4, "conv2d weight")?;
        let s = weight.shape();
        if s[2] != s[3] || bias.shape() != [s[0]] || stride == 0 {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d weight {:?} / bias {:?} / stride {stride} invalid",
                s,
                bias.shape()
            )));
        }
        Ok(Self {
            grad_w: Tensor::zeros(weight.shape()),
            grad_b: Tensor::zeros(bias.shape()),
            weight,
            bias,
            stride,
            padding,
            input: None,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    fn geometry(&self, x: &Tensor<S>) -> Result<Geometry, NnError> {
        expect_rank(x, 4, "conv2d")?;
        let s = x.shape();
        if s[1] != self.in_channels() {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d expects {} input channels, got {:?}",
                self.in_channels(),
                s
            )));
        }
        Geometry::new(s[1], s[2], s[3], self.kernel(), self.stride, self.padding)
    }
}

impl<S: Scalar> Layer<S> for Conv2d<S> {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Conv2d {
            out_channels: self.out_channels(),
            kernel: self.kernel(),
            stride: self.stride,
            padding: self.padding,
        }
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let g = self.geometry(x)?;
        let (n, oc) = (x.batch(), self.out_channels());
        let (rows, cols) = (g.col_rows(), g.col_cols());
        let mut y = Tensor::zeros(&[n, oc, g.oh, g.ow]);
        let mut col = vec![S::zero(); rows * cols];
        let in_len = g.c * g.h * g.w;
        for (xs, ys) in x.data().chunks_exact(in_len).zip(y.data_mut().chunks_exact_mut(oc * cols)) {
            im2col_into(xs, &g, &mut col);
            for (plane, &b) in ys.chunks_exact_mut(cols).zip(self.bias.data()) {
                plane.fill(b);
            }
            S::gemm(oc, rows, cols, S::one(), self.weight.data(), (rows, 1), &col, (cols, 1), S::one(), ys, (cols, 1));
        }
        Ok(y)
    }

    fn forward(&mut self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let x = self.input.as_ref().ok_or_else(|| no_cache("conv2d"))?;
        let g = self.geometry(x)?;
        let (n, oc) = (x.batch(), self.out_channels());
        check_same_shape(dy, &[n, oc, g.oh, g.ow], "conv2d")?;
        let (rows, cols) = (g.col_rows(), g.col_cols());
        let in_len = g.c * g.h * g.w;
        let mut dx = Tensor::zeros(x.shape());
        let mut col = vec![S::zero(); rows * cols];
        let mut dcol = vec![S::zero(); rows * cols];
        for ((xs, dys), dxs) in x
            .data()
            .chunks_exact(in_len)
            .zip(dy.data().chunks_exact(oc * cols))
            .zip(dx.data_mut().chunks_exact_mut(in_len))
        {
            im2col_into(xs, &g, &mut col);
            // dW += dy colᵀ
            S::gemm(
                oc,
                cols,
                rows,
                S::one(),
                dys,
                (cols, 1),
                &col,
                strides(cols, rows, true),
                S::one(),
                self.grad_w.data_mut(),
                (rows, 1),
            );
            for (gb, plane) in self.grad_b.data_mut().iter_mut().zip(dys.chunks_exact(cols)) {
                *gb += plane.iter().copied().sum::<S>();
            }
            // dcol = Wᵀ dy
            S::gemm(
                rows,
                oc,
                cols,
                S::one(),
                self.weight.data(),
                strides(rows, oc, true),
                dys,
                (cols, 1),
                S::zero(),
                &mut dcol,
                (cols, 1),
            );
            col2im_add(&dcol, &g, dxs);
        }
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
