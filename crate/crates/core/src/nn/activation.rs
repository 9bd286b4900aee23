use super::{child_name, Mode, Module, Param};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Default)]
pub struct Relu {
    output: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, mut x: Tensor, mode: Mode) -> Tensor {
        x.data.iter_mut().for_each(|v| *v = v.max(0.0));
        self.output = mode.is_train().then(|| x.clone());
        x
    }

    pub fn backward(&mut self, mut dy: Tensor) -> Tensor {
        let out = self.output.take().expect("Relu::backward without forward");
        for (g, o) in dy.data.iter_mut().zip(&out.data) {
            if *o <= 0.0 {
                *g = 0.0;
            }
        }
        dy
    }
}

/// Parametric ReLU with a single learnable negative slope.
#[derive(Debug, Clone)]
pub struct PRelu {
    pub slope: Param,
    input: Option<Tensor>,
}

impl Default for PRelu {
    fn default() -> Self {
        PRelu {
            slope: Param::filled(&[1], 0.25),
            input: None,
        }
    }
}

impl PRelu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        let a = self.slope.value[0];
        let mut y = x.clone();
        y.data.iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v *= a
            }
        });
        self.input = mode.is_train().then(|| x.clone());
        y
    }

    pub fn backward(&mut self, mut dy: Tensor) -> Tensor {
        let x = self.input.take().expect("PRelu::backward without forward");
        let a = self.slope.value[0];
        let mut da = 0.0f32;
        for (g, v) in dy.data.iter_mut().zip(&x.data) {
            if *v < 0.0 {
                da += *g * *v;
                *g *= a;
            }
        }
        self.slope.grad[0] += da;
        dy
    }
}

impl Module for PRelu {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&child_name(prefix, "weight"), &mut self.slope);
    }
}
