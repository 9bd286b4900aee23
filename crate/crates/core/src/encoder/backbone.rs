use rand::Rng;

use crate::nn::{child_name, BatchNorm2d, Conv2d, MaxPool2, Mode, Module, Param, Relu};
use crate::tensor::Tensor;

/// Residual bottleneck: 1x1 reduce, 3x3, 1x1 expand, with a projected
/// shortcut.
#[derive(Debug, Clone)]
pub struct Bottleneck {
    reduce: Conv2d,
    bn1: BatchNorm2d,
    relu1: Relu,
    conv: Conv2d,
    bn2: BatchNorm2d,
    relu2: Relu,
    expand: Conv2d,
    bn3: BatchNorm2d,
    shortcut: Conv2d,
    shortcut_bn: BatchNorm2d,
    relu_out: Relu,
}

impl Bottleneck {
    pub fn new<R: Rng>(inputs: usize, width: usize, outputs: usize, rng: &mut R) -> Self {
        Bottleneck {
            reduce: Conv2d::new(inputs, width, 1, false, rng),
            bn1: BatchNorm2d::new(width),
            relu1: Relu::new(),
            conv: Conv2d::new(width, width, 3, false, rng),
            bn2: BatchNorm2d::new(width),
            relu2: Relu::new(),
            expand: Conv2d::new(width, outputs, 1, false, rng),
            bn3: BatchNorm2d::new(outputs),
            shortcut: Conv2d::new(inputs, outputs, 1, false, rng),
            shortcut_bn: BatchNorm2d::new(outputs),
            relu_out: Relu::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        let y = self.reduce.forward(x, mode);
        let y = self.bn1.forward(&y, mode);
        let y = self.relu1.forward(y, mode);
        let y = self.conv.forward(&y, mode);
        let y = self.bn2.forward(&y, mode);
        let y = self.relu2.forward(y, mode);
        let y = self.expand.forward(&y, mode);
        let mut y = self.bn3.forward(&y, mode);
        let s = self.shortcut.forward(x, mode);
        let s = self.shortcut_bn.forward(&s, mode);
        y.add_assign(&s);
        self.relu_out.forward(y, mode)
    }

    pub fn backward(&mut self, dy: Tensor, need_input_grad: bool) -> Option<Tensor> {
        let d = self.relu_out.backward(dy);
        let ds = self.shortcut_bn.backward(&d);
        let dx_short = self.shortcut.backward(&ds, need_input_grad);
        let d = self.bn3.backward(&d);
        let d = self.expand.backward(&d, true).unwrap();
        let d = self.relu2.backward(d);
        let d = self.bn2.backward(&d);
        let d = self.conv.backward(&d, true).unwrap();
        let d = self.relu1.backward(d);
        let d = self.bn1.backward(&d);
        let dx_main = self.reduce.backward(&d, need_input_grad);
        match (dx_main, dx_short) {
            (Some(mut a), Some(b)) => {
                a.add_assign(&b);
                Some(a)
            }
            _ => None,
        }
    }
}

impl Module for Bottleneck {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.reduce.visit_params(&child_name(prefix, "conv1"), f);
        self.bn1.visit_params(&child_name(prefix, "bn1"), f);
        self.conv.visit_params(&child_name(prefix, "conv2"), f);
        self.bn2.visit_params(&child_name(prefix, "bn2"), f);
        self.expand.visit_params(&child_name(prefix, "conv3"), f);
        self.bn3.visit_params(&child_name(prefix, "bn3"), f);
        self.shortcut.visit_params(&child_name(prefix, "downsample.0"), f);
        self.shortcut_bn.visit_params(&child_name(prefix, "downsample.1"), f);
    }
}

/// Single-channel 7x7 stem at full resolution, then two bottleneck blocks,
/// each behind a 2x2 max-pool. Output is at a quarter of the input size.
#[derive(Debug, Clone)]
pub struct Backbone {
    stem: Conv2d,
    stem_bn: BatchNorm2d,
    stem_relu: Relu,
    pool1: MaxPool2,
    block1: Bottleneck,
    pool2: MaxPool2,
    block2: Bottleneck,
    pub out_channels: usize,
}

impl Backbone {
    pub fn new<R: Rng>(stem_channels: usize, block_channels: [usize; 2], expansion: usize, rng: &mut R) -> Self {
        let [c1, c2] = block_channels;
        Backbone {
            stem: Conv2d::new(1, stem_channels, 7, false, rng),
            stem_bn: BatchNorm2d::new(stem_channels),
            stem_relu: Relu::new(),
            pool1: MaxPool2::new(),
            block1: Bottleneck::new(stem_channels, (c1 / expansion).max(1), c1, rng),
            pool2: MaxPool2::new(),
            block2: Bottleneck::new(c1, (c2 / expansion).max(1), c2, rng),
            out_channels: c2,
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        let y = self.stem.forward(x, mode);
        let y = self.stem_bn.forward(&y, mode);
        let y = self.stem_relu.forward(y, mode);
        let y = self.pool1.forward(&y, mode);
        let y = self.block1.forward(&y, mode);
        let y = self.pool2.forward(&y, mode);
        self.block2.forward(&y, mode)
    }

    pub fn backward(&mut self, dy: Tensor, need_input_grad: bool) -> Option<Tensor> {
        let d = self.block2.backward(dy, true).unwrap();
        let d = self.pool2.backward(&d);
        let d = self.block1.backward(d, true).unwrap();
        let d = self.pool1.backward(&d);
        let d = self.stem_relu.backward(d);
        let d = self.stem_bn.backward(&d);
        self.stem.backward(&d, need_input_grad)
    }
}

impl Module for Backbone {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.stem.visit_params(&child_name(prefix, "conv1"), f);
        self.stem_bn.visit_params(&child_name(prefix, "bn1"), f);
        self.block1.visit_params(&child_name(prefix, "layer1"), f);
        self.block2.visit_params(&child_name(prefix, "layer2"), f);
    }
}
