use rand::Rng;

use crate::nn::{child_name, Conv2d, Mode, Module, PRelu, Param};
use crate::tensor::Tensor;

/// Three 3x3 convolutions (16 hidden channels, PReLU between them) added as
/// a residual to the coarse drawing. The last layer starts at zero, so an
/// untrained refiner is the identity.
#[derive(Debug, Clone)]
pub struct Refiner {
    conv1: Conv2d,
    act1: PRelu,
    conv2: Conv2d,
    act2: PRelu,
    conv3: Conv2d,
    raw: Option<Tensor>,
}

impl Refiner {
    pub fn new<R: Rng>(hidden: usize, rng: &mut R) -> Self {
        let mut conv3 = Conv2d::new(hidden, 1, 3, true, rng);
        conv3.weight.value.iter_mut().for_each(|v| *v = 0.0);
        if let Some(b) = conv3.bias.as_mut() {
            b.value.iter_mut().for_each(|v| *v = 0.0);
        }
        Refiner {
            conv1: Conv2d::new(1, hidden, 3, true, rng),
            act1: PRelu::new(),
            conv2: Conv2d::new(hidden, hidden, 3, true, rng),
            act2: PRelu::new(),
            conv3,
            raw: None,
        }
    }

    pub fn forward(&mut self, coarse: &Tensor, mode: Mode) -> Tensor {
        let y = self.conv1.forward(coarse, mode);
        let y = self.act1.forward(&y, mode);
        let y = self.conv2.forward(&y, mode);
        let y = self.act2.forward(&y, mode);
        let mut y = self.conv3.forward(&y, mode);
        y.add_assign(coarse);
        let mut out = y.clone();
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        self.raw = mode.is_train().then_some(y);
        out
    }

    /// Returns the gradient with respect to the coarse image.
    pub fn backward(&mut self, d_out: &Tensor) -> Tensor {
        let raw = self.raw.take().expect("Refiner::backward without forward");
        let mut d = d_out.clone();
        for (g, r) in d.data.iter_mut().zip(&raw.data) {
            if !(0.0..=1.0).contains(r) {
                *g = 0.0;
            }
        }
        let skip = d.clone();
        let d = self.conv3.backward(&d, true).unwrap();
        let d = self.act2.backward(d);
        let d = self.conv2.backward(&d, true).unwrap();
        let d = self.act1.backward(d);
        let mut d = self.conv1.backward(&d, true).unwrap();
        d.add_assign(&skip);
        d
    }
}

impl Module for Refiner {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.conv1.visit_params(&child_name(prefix, "conv1"), f);
        self.act1.visit_params(&child_name(prefix, "act1"), f);
        self.conv2.visit_params(&child_name(prefix, "conv2"), f);
        self.act2.visit_params(&child_name(prefix, "act2"), f);
        self.conv3.visit_params(&child_name(prefix, "conv3"), f);
    }
}
