use alloc::vec::Vec;

use rand::Rng;

use super::{child_name, Mode, Module, Param};

/// Fully-connected layer over row-major `[batch, in]` matrices.
#[derive(Debug, Clone)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out, in]`
    pub weight: Param,
    pub bias: Param,
    input: Option<Vec<f32>>,
}

impl Linear {
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Linear {
            inputs,
            outputs,
            weight: Param::uniform_fan_in(&[outputs, inputs], inputs, rng),
            bias: Param::uniform_fan_in(&[outputs], inputs, rng),
            input: None,
        }
    }

    pub fn forward(&mut self, x: &[f32], mode: Mode) -> Vec<f32> {
        let rows = x.len() / self.inputs;
        assert_eq!(rows * self.inputs, x.len(), "linear input width");
        let mut y = Vec::with_capacity(rows * self.outputs);
        for _ in 0..rows {
            y.extend_from_slice(&self.bias.value);
        }
        // y[rows x out] += x[rows x in] * W^T[in x out]
        unsafe {
            matrixmultiply::sgemm(
                rows,
                self.inputs,
                self.outputs,
                1.0,
                x.as_ptr(),
                self.inputs as isize,
                1,
                self.weight.value.as_ptr(),
                1,
                self.inputs as isize,
                1.0,
                y.as_mut_ptr(),
                self.outputs as isize,
                1,
            );
        }
        self.input = mode.is_train().then(|| x.to_vec());
        y
    }

    pub fn backward(&mut self, dy: &[f32]) -> Vec<f32> {
        let x = self.input.take().expect("Linear::backward without forward");
        let rows = x.len() / self.inputs;
        for row in dy.chunks_exact(self.outputs) {
            for (g, d) in self.bias.grad.iter_mut().zip(row) {
                *g += *d;
            }
        }
        unsafe {
            // dW[out x in] += dy^T[out x rows] * x[rows x in]
            matrixmultiply::sgemm(
                self.outputs,
                rows,
                self.inputs,
                1.0,
                dy.as_ptr(),
                1,
                self.outputs as isize,
                x.as_ptr(),
                self.inputs as isize,
                1,
                1.0,
                self.weight.grad.as_mut_ptr(),
                self.inputs as isize,
                1,
            );
        }
        let mut dx = alloc::vec![0.0f32; rows * self.inputs];
        unsafe {
            // dx[rows x in] = dy[rows x out] * W[out x in]
            matrixmultiply::sgemm(
                rows,
                self.outputs,
                self.inputs,
                1.0,
                dy.as_ptr(),
                self.outputs as isize,
                1,
                self.weight.value.as_ptr(),
                self.inputs as isize,
                1,
                0.0,
                dx.as_mut_ptr(),
                self.inputs as isize,
                1,
            );
        }
        dx
    }
}

impl Module for Linear {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&child_name(prefix, "weight"), &mut self.weight);
        f(&child_name(prefix, "bias"), &mut self.bias);
    }
}
