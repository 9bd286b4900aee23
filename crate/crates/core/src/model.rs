//! The assembled auto-encoder and the supervised baseline, each with a
//! single optimizer step.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::baseline::{align_adjacency, edge_loss_with_grad, gt_heatmap, node_loss_with_grad};
use crate::coords::pixel_to_norm;
use crate::decoder::{Decoder, DecoderConfig, DecoderOutput};
use crate::encoder::{BackwardScope, EdgeBranch, Encoder, EncoderConfig, EncoderGrads, EncoderOutput};
use crate::error::{Error, Result};
use crate::losses::{overlap_penalty_with_grad, similarity, similarity_with_grad, total_loss, LossConfig, Target};
use crate::nn::{child_name, zero_grad, Adam, Mode, Module, Param};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    pub loss: LossConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let e = &self.encoder;
        if e.n_max < 2 {
            return Err(Error::Config(alloc::format!(
                "n_max must be at least 2, got {}",
                e.n_max
            )));
        }
        if !e.image_size.is_multiple_of(4) || e.image_size != self.decoder.draw.canvas_size {
            return Err(Error::Config(alloc::format!(
                "image size {} must be a multiple of 4 and equal the canvas size {}",
                e.image_size,
                self.decoder.draw.canvas_size
            )));
        }
        self.loss.validate(e.image_size)
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub encoded: EncoderOutput,
    pub decoded: DecoderOutput,
}

impl Reconstruction {
    pub fn target(&self, target: Target) -> &Tensor {
        match target {
            Target::Refined => &self.decoded.refined,
            Target::Coarse => &self.decoded.coarse,
        }
    }
}

/// Batch means of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepStats {
    pub loss: f64,
    pub main: f64,
    pub aux: f64,
    pub similarity: f64,
    /// Samples that received the overlap penalty.
    pub aux_active: usize,
}

fn to_f64(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

#[derive(Debug, Clone)]
pub struct AutoEncoder {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub decoder: Decoder,
}

impl AutoEncoder {
    pub fn new<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let encoder = Encoder::new(config.encoder.clone(), rng);
        let decoder = Decoder::new(config.decoder.clone(), rng);
        Ok(AutoEncoder {
            config,
            encoder,
            decoder,
        })
    }

    pub fn reconstruct(&mut self, images: &Tensor, mode: Mode) -> Result<Reconstruction> {
        let encoded = self.encoder.forward(images, mode)?;
        let decoded = self
            .decoder
            .forward(&encoded.coords, &encoded.adjacency_probs, encoded.n_max, mode);
        Ok(Reconstruction { encoded, decoded })
    }

    /// Per-sample similarity of the configured target to the input.
    pub fn similarities(&self, rec: &Reconstruction, images: &Tensor) -> Result<Vec<f64>> {
        let pred = rec.target(self.config.loss.target);
        let s = self.config.encoder.image_size;
        (0..images.n())
            .map(|b| similarity(&to_f64(pred.sample(b)), &to_f64(images.sample(b)), s, &self.config.loss))
            .collect()
    }

    /// Forward, loss and backward for one batch; gradients accumulate on the
    /// parameters.
    pub fn loss_backward(&mut self, images: &Tensor) -> Result<StepStats> {
        let rec = self.reconstruct(images, Mode::Train)?;
        let cfg = self.config.loss;
        let s = self.config.encoder.image_size;
        let batch = images.n();
        let inv_b = 1.0 / batch as f64;
        let pred = rec.target(cfg.target);

        let mut sims = Vec::with_capacity(batch);
        let mut d_pred = Tensor::zeros(pred.shape);
        for b in 0..batch {
            let (sim, g) = similarity_with_grad(&to_f64(pred.sample(b)), &to_f64(images.sample(b)), s, &cfg)?;
            sims.push(sim);
            for (d, gv) in d_pred.sample_mut(b).iter_mut().zip(g) {
                *d = (-gv * inv_b) as f32;
            }
        }
        let mean_sim = sims.iter().sum::<f64>() * inv_b;

        let att = &rec.encoded.attention.0;
        let n = att.c();
        let mut d_att = Tensor::zeros(att.shape);
        let mut aux = 0.0;
        let mut aux_active = 0;
        if cfg.lambda_aux > 0.0 {
            for b in 0..batch {
                if sims[b] < mean_sim {
                    let (pen, g) = overlap_penalty_with_grad(&to_f64(att.sample(b)), n, true)?;
                    aux += pen * inv_b;
                    aux_active += 1;
                    for (d, gv) in d_att.sample_mut(b).iter_mut().zip(g) {
                        *d = (cfg.lambda_aux * gv * inv_b) as f32;
                    }
                }
            }
        }

        let (d_refined, d_coarse) = match cfg.target {
            Target::Refined => (Some(&d_pred), None),
            Target::Coarse => (None, Some(&d_pred)),
        };
        let (d_coords, d_probs) = self.decoder.backward(
            &rec.decoded,
            &rec.encoded.coords,
            &rec.encoded.adjacency_probs,
            n,
            d_refined,
            d_coarse,
        );
        self.encoder.backward(
            &rec.encoded,
            images,
            EncoderGrads {
                attention: Some(d_att),
                coords: Some(d_coords),
                adjacency_probs: Some(d_probs),
            },
            BackwardScope::ALL,
        );
        let main = 1.0 - mean_sim;
        Ok(StepStats {
            loss: total_loss(main, aux, &cfg),
            main,
            aux,
            similarity: mean_sim,
            aux_active,
        })
    }

    /// One Adam step. A non-finite loss leaves the parameters untouched.
    pub fn train_step(&mut self, images: &Tensor, adam: &mut Adam, lr: f32) -> Result<StepStats> {
        zero_grad(self);
        let stats = self.loss_backward(images)?;
        if !stats.loss.is_finite() {
            return Err(Error::NonFinite {
                step: adam.step as usize + 1,
            });
        }
        adam.begin_step();
        adam.update(self, lr);
        Ok(stats)
    }
}

impl Module for AutoEncoder {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.encoder.visit_params(&child_name(prefix, "encoder"), f);
        self.decoder.visit_params(&child_name(prefix, "decoder"), f);
    }
}

/// Ground truth for one baseline training sample, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTarget {
    pub coords_px: Vec<[f64; 2]>,
    pub adjacency: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineStage {
    /// Heatmap supervision of the attention branch.
    Nodes,
    /// Attention branch frozen; adjacency supervision of the edge classifier.
    Edges,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BaselineConfig {
    pub heatmap_sigma: f64,
    pub node_epochs: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            heatmap_sigma: 1.5,
            node_epochs: 2,
        }
    }
}

impl BaselineConfig {
    pub fn stage(&self, epoch: usize) -> BaselineStage {
        if epoch <= self.node_epochs {
            BaselineStage::Nodes
        } else {
            BaselineStage::Edges
        }
    }
}

/// The same encoder trained with direct supervision and no decoder.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    pub config: BaselineConfig,
    pub encoder: Encoder,
}

impl BaselineModel {
    pub fn new<R: Rng>(encoder: EncoderConfig, config: BaselineConfig, rng: &mut R) -> Self {
        BaselineModel {
            config,
            encoder: Encoder::new(encoder, rng),
        }
    }

    pub fn node_loss_backward(&mut self, images: &Tensor, targets: &[GraphTarget]) -> Result<f64> {
        let out = self.encoder.forward(images, Mode::Train)?;
        let att = &out.attention.0;
        let (n, map) = (att.c(), att.h());
        let size = self.encoder.config.image_size;
        let inv_b = 1.0 / images.n() as f64;
        let mut d_att = Tensor::zeros(att.shape);
        let mut loss = 0.0;
        for (b, t) in targets.iter().enumerate() {
            let gt = gt_heatmap(&t.coords_px, size, map, self.config.heatmap_sigma);
            let (l, g) = node_loss_with_grad(&to_f64(att.sample(b)), n, &gt)?;
            loss += l * inv_b;
            for (d, gv) in d_att.sample_mut(b).iter_mut().zip(g) {
                *d = (gv * inv_b) as f32;
            }
        }
        self.encoder.backward(
            &out,
            images,
            EncoderGrads {
                attention: Some(d_att),
                ..EncoderGrads::default()
            },
            BackwardScope {
                attention_branch: true,
                edge_branch: false,
                input: false,
            },
        );
        Ok(loss)
    }

    pub fn edge_loss_backward(&mut self, images: &Tensor, targets: &[GraphTarget]) -> Result<f64> {
        let out = self.encoder.forward_split(images, Mode::Eval, Mode::Train)?;
        let n = out.n_max;
        let size = self.encoder.config.image_size;
        let inv_b = 1.0 / images.n() as f64;
        let mut d_probs = vec![0.0f32; out.adjacency_probs.len()];
        let mut loss = 0.0;
        for (b, t) in targets.iter().enumerate() {
            let gt_norm: Vec<[f64; 2]> = t
                .coords_px
                .iter()
                .map(|c| [pixel_to_norm(c[0], size), pixel_to_norm(c[1], size)])
                .collect();
            let al = align_adjacency(&out.coords[b * n..(b + 1) * n], &gt_norm, &t.adjacency);
            let r = b * n * n..(b + 1) * n * n;
            let (l, g) = edge_loss_with_grad(&out.adjacency_probs[r.clone()], n, &al.adjacency, &al.mask);
            loss += l * inv_b;
            for (d, gv) in d_probs[r].iter_mut().zip(g) {
                *d = gv * inv_b as f32;
            }
        }
        self.encoder.backward(
            &out,
            images,
            EncoderGrads {
                adjacency_probs: Some(d_probs),
                ..EncoderGrads::default()
            },
            BackwardScope {
                attention_branch: false,
                edge_branch: true,
                input: false,
            },
        );
        Ok(loss)
    }

    /// One Adam step for the given stage. The edge stage only updates the
    /// edge classifier.
    pub fn train_step(
        &mut self,
        stage: BaselineStage,
        images: &Tensor,
        targets: &[GraphTarget],
        adam: &mut Adam,
        lr: f32,
    ) -> Result<f64> {
        if targets.len() != images.n() {
            return Err(crate::error::shape_err(images.n(), targets.len()));
        }
        zero_grad(&mut self.encoder);
        let loss = match stage {
            BaselineStage::Nodes => self.node_loss_backward(images, targets)?,
            BaselineStage::Edges => self.edge_loss_backward(images, targets)?,
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                step: adam.step as usize + 1,
            });
        }
        adam.begin_step();
        match stage {
            BaselineStage::Nodes => adam.update(&mut self.encoder, lr),
            BaselineStage::Edges => adam.update(&mut EdgeBranch(&mut self.encoder), lr),
        }
        Ok(loss)
    }
}

impl Module for BaselineModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.encoder.visit_params(&child_name(prefix, "encoder"), f);
    }
}
