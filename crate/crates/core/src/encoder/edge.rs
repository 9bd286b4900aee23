use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{child_name, BatchNorm2d, Conv2d, Linear, MaxPool2, Mode, Module, Param, Relu};
use crate::tensor::Tensor;

/// Per-patch connectivity classifier:
/// conv3x3→32, BN, ReLU, pool, conv3x3→16, BN, ReLU, pool, FC, ReLU, FC.
/// Returns logits; the sigmoid is applied by the caller.
#[derive(Debug, Clone)]
pub struct EdgeClassifier {
    conv1: Conv2d,
    bn1: BatchNorm2d,
    relu1: Relu,
    pool1: MaxPool2,
    conv2: Conv2d,
    bn2: BatchNorm2d,
    relu2: Relu,
    pool2: MaxPool2,
    fc1: Linear,
    relu3: Relu,
    fc2: Linear,
    flat_shape: [usize; 4],
}

impl EdgeClassifier {
    pub fn new<R: Rng>(patch_size: usize, hidden: usize, rng: &mut R) -> Self {
        let flat = 16 * (patch_size / 4) * (patch_size / 4);
        EdgeClassifier {
            conv1: Conv2d::new(1, 32, 3, false, rng),
            bn1: BatchNorm2d::new(32),
            relu1: Relu::new(),
            pool1: MaxPool2::new(),
            conv2: Conv2d::new(32, 16, 3, false, rng),
            bn2: BatchNorm2d::new(16),
            relu2: Relu::new(),
            pool2: MaxPool2::new(),
            fc1: Linear::new(flat, hidden, rng),
            relu3: Relu::new(),
            fc2: Linear::new(hidden, 1, rng),
            flat_shape: [0; 4],
        }
    }

    pub fn forward(&mut self, patches: &Tensor, mode: Mode) -> Vec<f32> {
        let x = self.conv1.forward(patches, mode);
        let x = self.bn1.forward(&x, mode);
        let x = self.relu1.forward(x, mode);
        let x = self.pool1.forward(&x, mode);
        let x = self.conv2.forward(&x, mode);
        let x = self.bn2.forward(&x, mode);
        let x = self.relu2.forward(x, mode);
        let x = self.pool2.forward(&x, mode);
        self.flat_shape = x.shape;
        let x = self.fc1.forward(&x.data, mode);
        let n = self.flat_shape[0];
        let x = self
            .relu3
            .forward(Tensor::from_vec([n, self.fc1.outputs, 1, 1], x), mode);
        self.fc2.forward(&x.data, mode)
    }

    pub fn backward(&mut self, d_logits: &[f32]) -> Tensor {
        let d = self.fc2.backward(d_logits);
        let n = self.flat_shape[0];
        let d = self.relu3.backward(Tensor::from_vec([n, self.fc1.outputs, 1, 1], d));
        let d = self.fc1.backward(&d.data);
        let d = Tensor::from_vec(self.flat_shape, d);
        let d = self.pool2.backward(&d);
        let d = self.relu2.backward(d);
        let d = self.bn2.backward(&d);
        let d = self.conv2.backward(&d, true).unwrap();
        let d = self.pool1.backward(&d);
        let d = self.relu1.backward(d);
        let d = self.bn1.backward(&d);
        self.conv1.backward(&d, true).unwrap()
    }
}

impl Module for EdgeClassifier {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.conv1.visit_params(&child_name(prefix, "conv1"), f);
        self.bn1.visit_params(&child_name(prefix, "bn1"), f);
        self.conv2.visit_params(&child_name(prefix, "conv2"), f);
        self.bn2.visit_params(&child_name(prefix, "bn2"), f);
        self.fc1.visit_params(&child_name(prefix, "fc1"), f);
        self.fc2.visit_params(&child_name(prefix, "fc2"), f);
    }
}
