//! Graph → coarse drawing → refined image.

pub mod draw;
mod refine;
mod template;

use alloc::vec::Vec;

use rand::Rng;

pub use draw::{draw_coarse, draw_coarse_backward, DrawConfig, Drawing};
pub use refine::Refiner;
pub use template::TemplateBank;

use crate::nn::{child_name, Mode, Module, Param};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DecoderConfig {
    pub draw: DrawConfig,
    pub refine_channels: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            draw: DrawConfig::default(),
            refine_channels: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecoderOutput {
    /// Pre-clamp stroke sums, kept for the clamp's backward pass.
    pub coarse_raw: Tensor,
    pub coarse: Tensor,
    pub refined: Tensor,
}

#[derive(Debug, Clone)]
pub struct Decoder {
    pub config: DecoderConfig,
    pub bank: TemplateBank,
    pub refiner: Refiner,
}

impl Decoder {
    pub fn new<R: Rng>(config: DecoderConfig, rng: &mut R) -> Self {
        let refiner = Refiner::new(config.refine_channels, rng);
        Decoder {
            config,
            bank: TemplateBank::default(),
            refiner,
        }
    }

    /// Coarse drawing for a batch of `n`-slot graphs.
    pub fn draw(&self, coords: &[[f32; 2]], probs: &[f32], n: usize) -> (Tensor, Tensor) {
        let batch = coords.len() / n;
        let s = self.config.draw.canvas_size;
        let mut raw = Tensor::zeros([batch, 1, s, s]);
        let mut coarse = Tensor::zeros([batch, 1, s, s]);
        for b in 0..batch {
            let d = draw_coarse(
                &coords[b * n..(b + 1) * n],
                &probs[b * n * n..(b + 1) * n * n],
                &self.bank,
                &self.config.draw,
            );
            raw.sample_mut(b).copy_from_slice(&d.raw);
            coarse.sample_mut(b).copy_from_slice(&d.image);
        }
        (raw, coarse)
    }

    pub fn forward(&mut self, coords: &[[f32; 2]], probs: &[f32], n: usize, mode: Mode) -> DecoderOutput {
        let (coarse_raw, coarse) = self.draw(coords, probs, n);
        let refined = self.refiner.forward(&coarse, mode);
        DecoderOutput {
            coarse_raw,
            coarse,
            refined,
        }
    }

    /// Gradients with respect to node coordinates and adjacency
    /// probabilities. `d_refined` flows through the refiner; `d_coarse` is
    /// added directly at the coarse image.
    pub fn backward(
        &mut self,
        out: &DecoderOutput,
        coords: &[[f32; 2]],
        probs: &[f32],
        n: usize,
        d_refined: Option<&Tensor>,
        d_coarse: Option<&Tensor>,
    ) -> (Vec<[f32; 2]>, Vec<f32>) {
        let mut d = match d_refined {
            Some(g) => self.refiner.backward(g),
            None => Tensor::zeros(out.coarse.shape),
        };
        if let Some(g) = d_coarse {
            d.add_assign(g);
        }
        let batch = coords.len() / n;
        let mut d_coords = Vec::with_capacity(coords.len());
        let mut d_probs = Vec::with_capacity(probs.len());
        for b in 0..batch {
            let (dc, dp) = draw_coarse_backward(
                &coords[b * n..(b + 1) * n],
                &probs[b * n * n..(b + 1) * n * n],
                &self.bank,
                &self.config.draw,
                out.coarse_raw.sample(b),
                d.sample(b),
            );
            d_coords.extend(dc);
            d_probs.extend(dp);
        }
        (d_coords, d_probs)
    }
}

impl Module for Decoder {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.refiner.visit_params(&child_name(prefix, "refine"), f);
    }
}
