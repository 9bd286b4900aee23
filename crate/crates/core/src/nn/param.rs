use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

/// A named tensor of learnable values (or a non-trainable buffer such as a
/// batch-norm running mean) together with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
    pub trainable: bool,
    pub(crate) first_moment: Vec<f32>,
    pub(crate) second_moment: Vec<f32>,
}

impl Param {
    pub fn new(shape: &[usize], value: Vec<f32>) -> Self {
        let len: usize = shape.iter().product();
        assert_eq!(len, value.len(), "parameter data does not fit {shape:?}");
        Param {
            shape: shape.to_vec(),
            grad: vec![0.0; len],
            value,
            trainable: true,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn filled(shape: &[usize], fill: f32) -> Self {
        Self::new(shape, vec![fill; shape.iter().product()])
    }

    pub fn buffer(shape: &[usize], fill: f32) -> Self {
        let mut p = Self::filled(shape, fill);
        p.trainable = false;
        p
    }

    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, the default initialization of
    /// common deep-learning frameworks for convolution and linear layers.
    pub fn uniform_fan_in<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Self {
        let bound = 1.0 / num_traits::Float::sqrt(fan_in as f32);
        let len = shape.iter().product();
        let value = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
        Self::new(shape, value)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.grad.iter().map(|g| (*g as f64) * (*g as f64)).sum()
    }
}

/// Something that owns parameters.
pub trait Module {
    /// Visits every parameter and buffer with its dotted path name.
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param));
}

pub fn child_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        String::from(name)
    } else {
        format!("{prefix}.{name}")
    }
}

pub fn zero_grad<M: Module + ?Sized>(module: &mut M) {
    module.visit_params("", &mut |_, p| p.grad.iter_mut().for_each(|g| *g = 0.0));
}
