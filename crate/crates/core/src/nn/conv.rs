use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Mode, Module, Param};
use crate::nn::child_name;
use crate::tensor::Tensor;

/// Stride-1 square convolution with zero "same" padding, lowered to GEMM
/// through an im2col buffer.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out, in * k * k]`
    pub weight: Param,
    pub bias: Option<Param>,
    input: Option<Tensor>,
    col: Vec<f32>,
}

impl Conv2d {
    pub fn new<R: Rng>(in_channels: usize, out_channels: usize, kernel: usize, bias: bool, rng: &mut R) -> Self {
        assert!(kernel % 2 == 1, "only odd kernels keep the spatial size");
        let fan_in = in_channels * kernel * kernel;
        let weight = Param::uniform_fan_in(&[out_channels, fan_in], fan_in, rng);
        let bias = bias.then(|| Param::uniform_fan_in(&[out_channels], fan_in, rng));
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            weight,
            bias,
            input: None,
            col: Vec::new(),
        }
    }

    fn pad(&self) -> usize {
        self.kernel / 2
    }

    fn rows(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        assert_eq!(x.c(), self.in_channels, "conv input channels");
        let (n, h, w) = (x.n(), x.h(), x.w());
        let hw = h * w;
        let k_rows = self.rows();
        let mut y = Tensor::zeros([n, self.out_channels, h, w]);
        for b in 0..n {
            let col: &[f32] = if self.kernel == 1 {
                x.sample(b)
            } else {
                self.col.resize(k_rows * hw, 0.0);
                im2col(
                    x.sample(b),
                    self.in_channels,
                    h,
                    w,
                    self.kernel,
                    self.pad(),
                    &mut self.col,
                );
                &self.col
            };
            let out = y.sample_mut(b);
            if let Some(bias) = &self.bias {
                for (o, row) in out.chunks_exact_mut(hw).enumerate() {
                    row.iter_mut().for_each(|v| *v = bias.value[o]);
                }
            }
            let beta = if self.bias.is_some() { 1.0 } else { 0.0 };
            // y[out x hw] = W[out x K] * col[K x hw]
            unsafe {
                matrixmultiply::sgemm(
                    self.out_channels,
                    k_rows,
                    hw,
                    1.0,
                    self.weight.value.as_ptr(),
                    k_rows as isize,
                    1,
                    col.as_ptr(),
                    hw as isize,
                    1,
                    beta,
                    out.as_mut_ptr(),
                    hw as isize,
                    1,
                );
            }
        }
        self.input = mode.is_train().then(|| x.clone());
        y
    }

    /// Accumulates parameter gradients; returns the input gradient when
    /// `need_input_grad` is set.
    pub fn backward(&mut self, dy: &Tensor, need_input_grad: bool) -> Option<Tensor> {
        let x = self
            .input
            .take()
            .expect("Conv2d::backward without a training forward pass");
        let (n, h, w) = (x.n(), x.h(), x.w());
        let hw = h * w;
        let k_rows = self.rows();
        let mut dx = need_input_grad.then(|| Tensor::zeros(x.shape));
        let mut dcol = if need_input_grad && self.kernel != 1 {
            vec![0.0f32; k_rows * hw]
        } else {
            Vec::new()
        };
        for b in 0..n {
            let dyb = dy.sample(b);
            if let Some(bias) = &mut self.bias {
                for (o, row) in dyb.chunks_exact(hw).enumerate() {
                    bias.grad[o] += row.iter().sum::<f32>();
                }
            }
            let col: &[f32] = if self.kernel == 1 {
                x.sample(b)
            } else {
                self.col.resize(k_rows * hw, 0.0);
                im2col(
                    x.sample(b),
                    self.in_channels,
                    h,
                    w,
                    self.kernel,
                    self.pad(),
                    &mut self.col,
                );
                &self.col
            };
            // dW[out x K] += dy[out x hw] * col^T[hw x K]
            unsafe {
                matrixmultiply::sgemm(
                    self.out_channels,
                    hw,
                    k_rows,
                    1.0,
                    dyb.as_ptr(),
                    hw as isize,
                    1,
                    col.as_ptr(),
                    1,
                    hw as isize,
                    1.0,
                    self.weight.grad.as_mut_ptr(),
                    k_rows as isize,
                    1,
                );
            }
            if let Some(dx) = dx.as_mut() {
                let target: &mut [f32] = if self.kernel == 1 { dx.sample_mut(b) } else { &mut dcol };
                // dcol[K x hw] = W^T[K x out] * dy[out x hw]
                unsafe {
                    matrixmultiply::sgemm(
                        k_rows,
                        self.out_channels,
                        hw,
                        1.0,
                        self.weight.value.as_ptr(),
                        1,
                        k_rows as isize,
                        dyb.as_ptr(),
                        hw as isize,
                        1,
                        0.0,
                        target.as_mut_ptr(),
                        hw as isize,
                        1,
                    );
                }
                if self.kernel != 1 {
                    col2im(&dcol, self.in_channels, h, w, self.kernel, self.pad(), dx.sample_mut(b));
                }
            }
        }
        dx
    }
}

impl Module for Conv2d {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&child_name(prefix, "weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            f(&child_name(prefix, "bias"), b);
        }
    }
}

fn im2col(x: &[f32], c: usize, h: usize, w: usize, k: usize, pad: usize, col: &mut [f32]) {
    let hw = h * w;
    let mut row = 0;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let dst = &mut col[row * hw..(row + 1) * hw];
                let (x_lo, x_hi) = valid_range(kx, pad, w);
                for y in 0..h {
                    let d = &mut dst[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        d.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    d[..x_lo].iter_mut().for_each(|v| *v = 0.0);
                    d[x_hi..].iter_mut().for_each(|v| *v = 0.0);
                    let off = kx as isize - pad as isize;
                    let s0 = (x_lo as isize + off) as usize;
                    d[x_lo..x_hi].copy_from_slice(&src[s0..s0 + (x_hi - x_lo)]);
                }
                row += 1;
            }
        }
    }
}

fn col2im(col: &[f32], c: usize, h: usize, w: usize, k: usize, pad: usize, dx: &mut [f32]) {
    let hw = h * w;
    let mut row = 0;
    for ci in 0..c {
        let plane = &mut dx[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let src = &col[row * hw..(row + 1) * hw];
                let (x_lo, x_hi) = valid_range(kx, pad, w);
                let off = kx as isize - pad as isize;
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        continue;
                    }
                    let d = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    let s = &src[y * w..(y + 1) * w];
                    let d0 = (x_lo as isize + off) as usize;
                    for (dv, sv) in d[d0..d0 + (x_hi - x_lo)].iter_mut().zip(&s[x_lo..x_hi]) {
                        *dv += *sv;
                    }
                }
                row += 1;
            }
        }
    }
}

/// Output columns `[lo, hi)` whose source column `x + kx - pad` is in range.
fn valid_range(kx: usize, pad: usize, w: usize) -> (usize, usize) {
    let off = kx as isize - pad as isize;
    let lo = (-off).max(0) as usize;
    let hi = ((w as isize - off).min(w as isize)).max(0) as usize;
    (lo.min(w), hi)
}
