use alloc::vec::Vec;

use super::Mode;
use crate::tensor::Tensor;

/// 2x2 max pooling with stride 2. Odd trailing rows/columns are dropped.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    argmax: Vec<u32>,
    input_shape: [usize; 4],
}

impl MaxPool2 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        let (n, c, h, w) = (x.n(), x.c(), x.h(), x.w());
        let (oh, ow) = (h / 2, w / 2);
        let mut y = Tensor::zeros([n, c, oh, ow]);
        let keep = mode.is_train();
        self.argmax.clear();
        if keep {
            self.argmax.reserve(y.data.len());
        }
        for plane in 0..n * c {
            let src = &x.data[plane * h * w..(plane + 1) * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let base = 2 * oy * w + 2 * ox;
                    let mut best = base;
                    for cand in [base + 1, base + w, base + w + 1] {
                        if src[cand] > src[best] {
                            best = cand;
                        }
                    }
                    y.data[(plane * oh + oy) * ow + ox] = src[best];
                    if keep {
                        self.argmax.push((plane * h * w + best) as u32);
                    }
                }
            }
        }
        self.input_shape = x.shape;
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        assert_eq!(self.argmax.len(), dy.data.len(), "MaxPool2::backward without forward");
        let mut dx = Tensor::zeros(self.input_shape);
        for (g, &idx) in dy.data.iter().zip(&self.argmax) {
            dx.data[idx as usize] += *g;
        }
        self.argmax.clear();
        dx
    }
}
