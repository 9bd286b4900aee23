use alloc::vec;
use alloc::vec::Vec;

use super::{child_name, Mode, Module, Param};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Param,
    pub running_var: Param,
    pub momentum: f32,
    pub eps: f32,
    normalized: Option<Tensor>,
    inv_std: Vec<f32>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            channels,
            gamma: Param::filled(&[channels], 1.0),
            beta: Param::filled(&[channels], 0.0),
            running_mean: Param::buffer(&[channels], 0.0),
            running_var: Param::buffer(&[channels], 1.0),
            momentum: 0.1,
            eps: 1e-5,
            normalized: None,
            inv_std: Vec::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        assert_eq!(x.c(), self.channels, "batch-norm channels");
        let (n, c, hw) = (x.n(), x.c(), x.h() * x.w());
        let mut y = Tensor::zeros(x.shape);
        if !mode.is_train() {
            for ch in 0..c {
                let inv = 1.0 / num_traits::Float::sqrt(self.running_var.value[ch] + self.eps);
                let scale = self.gamma.value[ch] * inv;
                let shift = self.beta.value[ch] - self.running_mean.value[ch] * scale;
                for b in 0..n {
                    let off = (b * c + ch) * hw;
                    for (o, i) in y.data[off..off + hw].iter_mut().zip(&x.data[off..off + hw]) {
                        *o = *i * scale + shift;
                    }
                }
            }
            self.normalized = None;
            return y;
        }
        let count = (n * hw) as f64;
        let mut xhat = Tensor::zeros(x.shape);
        self.inv_std = vec![0.0; c];
        for ch in 0..c {
            let (mut sum, mut sq) = (0.0f64, 0.0f64);
            for b in 0..n {
                let off = (b * c + ch) * hw;
                for v in &x.data[off..off + hw] {
                    sum += *v as f64;
                    sq += (*v as f64) * (*v as f64);
                }
            }
            let mean = sum / count;
            let var = (sq / count - mean * mean).max(0.0);
            let inv = 1.0 / num_traits::Float::sqrt(var + self.eps as f64);
            self.inv_std[ch] = inv as f32;
            let (g, bt) = (self.gamma.value[ch], self.beta.value[ch]);
            for b in 0..n {
                let off = (b * c + ch) * hw;
                for i in off..off + hw {
                    let h = ((x.data[i] as f64 - mean) * inv) as f32;
                    xhat.data[i] = h;
                    y.data[i] = g * h + bt;
                }
            }
            let unbiased = if count > 1.0 { var * count / (count - 1.0) } else { var };
            let m = self.momentum;
            self.running_mean.value[ch] = (1.0 - m) * self.running_mean.value[ch] + m * mean as f32;
            self.running_var.value[ch] = (1.0 - m) * self.running_var.value[ch] + m * unbiased as f32;
        }
        self.normalized = Some(xhat);
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let xhat = self
            .normalized
            .take()
            .expect("BatchNorm2d::backward without a training forward pass");
        let (n, c, hw) = (dy.n(), dy.c(), dy.h() * dy.w());
        let count = (n * hw) as f32;
        let mut dx = Tensor::zeros(dy.shape);
        for ch in 0..c {
            let (mut sum_dy, mut sum_dy_xhat) = (0.0f32, 0.0f32);
            for b in 0..n {
                let off = (b * c + ch) * hw;
                for i in off..off + hw {
                    sum_dy += dy.data[i];
                    sum_dy_xhat += dy.data[i] * xhat.data[i];
                }
            }
            self.gamma.grad[ch] += sum_dy_xhat;
            self.beta.grad[ch] += sum_dy;
            let k = self.gamma.value[ch] * self.inv_std[ch] / count;
            for b in 0..n {
                let off = (b * c + ch) * hw;
                for i in off..off + hw {
                    dx.data[i] = k * (count * dy.data[i] - sum_dy - xhat.data[i] * sum_dy_xhat);
                }
            }
        }
        dx
    }
}

impl Module for BatchNorm2d {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&child_name(prefix, "weight"), &mut self.gamma);
        f(&child_name(prefix, "bias"), &mut self.beta);
        f(&child_name(prefix, "running_mean"), &mut self.running_mean);
        f(&child_name(prefix, "running_var"), &mut self.running_var);
    }
}
