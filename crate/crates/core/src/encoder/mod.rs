//! Image → node attention → node coordinates → soft adjacency.

mod backbone;
pub mod dsnt;
mod edge;
pub mod roi;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

pub use backbone::{Backbone, Bottleneck};
pub use edge::EdgeClassifier;
pub use roi::RoiConfig;

use crate::error::{shape_err, Result};
use crate::nn::{child_name, Conv2d, Mode, Module, Param, Relu};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EncoderConfig {
    pub n_max: usize,
    pub image_size: usize,
    pub stem_channels: usize,
    pub block_channels: [usize; 2],
    pub bottleneck_expansion: usize,
    pub head_channels: usize,
    pub edge_hidden: usize,
    pub roi_size: usize,
    pub roi_min_side: f64,
    pub softmax_temperature: f32,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            n_max: 4,
            image_size: 128,
            stem_channels: 64,
            block_channels: [128, 64],
            bottleneck_expansion: 4,
            head_channels: 64,
            edge_hidden: 64,
            roi_size: 16,
            roi_min_side: 8.0,
            softmax_temperature: 1.0,
        }
    }
}

impl EncoderConfig {
    pub fn attention_size(&self) -> usize {
        self.image_size / 4
    }

    pub fn roi(&self) -> RoiConfig {
        RoiConfig {
            size: self.roi_size,
            min_side: self.roi_min_side,
        }
    }
}

/// Per-node spatial probability maps, `[batch, n_max, h, w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMaps(pub Tensor);

impl AttentionMaps {
    pub fn channel(&self, b: usize, c: usize) -> &[f32] {
        self.0.plane(b, c)
    }

    pub fn n_max(&self) -> usize {
        self.0.c()
    }
}

/// The bottleneck graph of one image.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictedGraph {
    /// Normalized `[-1, 1]` coordinates, one row per slot.
    pub node_coords: Vec<[f32; 2]>,
    /// Row-major `n_max²` raw pair logits (ordered pairs).
    pub adjacency_logits: Vec<f32>,
    /// Row-major `n_max²`, symmetric with zero diagonal.
    pub adjacency_probs: Vec<f32>,
}

impl PredictedGraph {
    pub fn n_max(&self) -> usize {
        self.node_coords.len()
    }

    pub fn prob(&self, i: usize, j: usize) -> f32 {
        self.adjacency_probs[i * self.n_max() + j]
    }

    /// A graph whose probabilities are the given 0/1 adjacency, with pixel
    /// coordinates converted to normalized ones.
    pub fn from_ground_truth(coords_px: &[[f64; 2]], adjacency: &[Vec<u8>], image_size: usize) -> Self {
        let n = coords_px.len();
        let node_coords = coords_px
            .iter()
            .map(|c| {
                [
                    crate::coords::pixel_to_norm(c[0], image_size) as f32,
                    crate::coords::pixel_to_norm(c[1], image_size) as f32,
                ]
            })
            .collect();
        let mut probs = vec![0.0f32; n * n];
        for i in 0..n {
            for j in 0..n {
                probs[i * n + j] = if i != j && adjacency[i][j] != 0 { 1.0 } else { 0.0 };
            }
        }
        let logits = probs.iter().map(|&p| if p > 0.5 { 20.0 } else { -20.0 }).collect();
        PredictedGraph {
            node_coords,
            adjacency_logits: logits,
            adjacency_probs: probs,
        }
    }
}

/// `(S + Sᵀ) / 2` with the diagonal forced to zero, per `n x n` block.
pub fn symmetrize(pair_probs: &[f32], n: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; pair_probs.len()];
    for (src, dst) in pair_probs.chunks_exact(n * n).zip(out.chunks_exact_mut(n * n)) {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    dst[i * n + j] = 0.5 * (src[i * n + j] + src[j * n + i]);
                }
            }
        }
    }
    out
}

fn symmetrize_backward(d_sym: &[f32], n: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; d_sym.len()];
    for (src, dst) in d_sym.chunks_exact(n * n).zip(out.chunks_exact_mut(n * n)) {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    dst[i * n + j] = 0.5 * (src[i * n + j] + src[j * n + i]);
                }
            }
        }
    }
    out
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + num_traits::Float::exp(-x))
}

/// Two 3x3 convolutions producing one logit map per node slot.
#[derive(Debug, Clone)]
pub struct AttentionHead {
    conv1: Conv2d,
    relu: Relu,
    conv2: Conv2d,
}

impl AttentionHead {
    pub fn new<R: Rng>(inputs: usize, hidden: usize, n_max: usize, rng: &mut R) -> Self {
        AttentionHead {
            conv1: Conv2d::new(inputs, hidden, 3, true, rng),
            relu: Relu::new(),
            conv2: Conv2d::new(hidden, n_max, 3, true, rng),
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        let y = self.conv1.forward(x, mode);
        let y = self.relu.forward(y, mode);
        self.conv2.forward(&y, mode)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let d = self.conv2.backward(dy, true).unwrap();
        let d = self.relu.backward(d);
        self.conv1.backward(&d, true).unwrap()
    }
}

impl Module for AttentionHead {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.conv1.visit_params(&child_name(prefix, "conv1"), f);
        self.conv2.visit_params(&child_name(prefix, "conv2"), f);
    }
}

/// Everything the encoder produced for a batch; also the cache its backward
/// pass reads.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    pub n_max: usize,
    pub attention: AttentionMaps,
    /// `batch * n_max` normalized coordinates.
    pub coords: Vec<[f32; 2]>,
    /// `[batch * n_max², 1, roi, roi]`
    pub patches: Tensor,
    /// `batch * n_max²`, ordered pairs.
    pub adjacency_logits: Vec<f32>,
    pub pair_probs: Vec<f32>,
    /// `batch * n_max²`, symmetrized.
    pub adjacency_probs: Vec<f32>,
}

impl EncoderOutput {
    pub fn batch(&self) -> usize {
        self.coords.len() / self.n_max
    }

    pub fn graph(&self, b: usize) -> PredictedGraph {
        let (n, nn) = (self.n_max, self.n_max * self.n_max);
        PredictedGraph {
            node_coords: self.coords[b * n..(b + 1) * n].to_vec(),
            adjacency_logits: self.adjacency_logits[b * nn..(b + 1) * nn].to_vec(),
            adjacency_probs: self.adjacency_probs[b * nn..(b + 1) * nn].to_vec(),
        }
    }

    pub fn graphs(&self) -> Vec<PredictedGraph> {
        (0..self.batch()).map(|b| self.graph(b)).collect()
    }
}

/// Upstream gradients for [`Encoder::backward`]. Missing entries count as zero.
#[derive(Debug, Clone, Default)]
pub struct EncoderGrads {
    pub attention: Option<Tensor>,
    pub coords: Option<Vec<[f32; 2]>>,
    pub adjacency_probs: Option<Vec<f32>>,
}

/// Which parts of the encoder receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackwardScope {
    /// Backbone and attention head.
    pub attention_branch: bool,
    /// Edge classifier.
    pub edge_branch: bool,
    /// Also return the gradient with respect to the input images.
    pub input: bool,
}

impl BackwardScope {
    pub const ALL: BackwardScope = BackwardScope {
        attention_branch: true,
        edge_branch: true,
        input: false,
    };
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub backbone: Backbone,
    pub head: AttentionHead,
    pub edge: EdgeClassifier,
}

impl Encoder {
    pub fn new<R: Rng>(config: EncoderConfig, rng: &mut R) -> Self {
        let backbone = Backbone::new(
            config.stem_channels,
            config.block_channels,
            config.bottleneck_expansion,
            rng,
        );
        let head = AttentionHead::new(backbone.out_channels, config.head_channels, config.n_max, rng);
        let edge = EdgeClassifier::new(config.roi_size, config.edge_hidden, rng);
        Encoder {
            config,
            backbone,
            head,
            edge,
        }
    }

    /// Image features at a quarter of the input resolution.
    pub fn extract_features(&mut self, images: &Tensor, mode: Mode) -> Result<Tensor> {
        let s = self.config.image_size;
        if images.c() != 1 || images.h() != s || images.w() != s {
            return Err(shape_err([images.n(), 1, s, s], images.shape));
        }
        Ok(self.backbone.forward(images, mode))
    }

    /// Attention head plus per-channel spatial softmax.
    pub fn predict_attention(&mut self, features: &Tensor, mode: Mode) -> AttentionMaps {
        let logits = self.head.forward(features, mode);
        let mut probs = Tensor::zeros(logits.shape);
        let hw = logits.h() * logits.w();
        let t = self.config.softmax_temperature;
        for (src, dst) in logits.data.chunks_exact(hw).zip(probs.data.chunks_exact_mut(hw)) {
            dsnt::spatial_softmax(src, t, dst);
        }
        AttentionMaps(probs)
    }

    pub fn forward(&mut self, images: &Tensor, mode: Mode) -> Result<EncoderOutput> {
        self.forward_split(images, mode, mode)
    }

    /// Like [`Encoder::forward`] with separate modes for the attention branch
    /// and the edge classifier, e.g. to keep a frozen branch's batch-norm
    /// statistics fixed while the other trains.
    pub fn forward_split(&mut self, images: &Tensor, attention_mode: Mode, edge_mode: Mode) -> Result<EncoderOutput> {
        let features = self.extract_features(images, attention_mode)?;
        let attention = self.predict_attention(&features, attention_mode);
        let n = self.config.n_max;
        let (h, w) = (attention.0.h(), attention.0.w());
        let batch = images.n();
        let mut coords = Vec::with_capacity(batch * n);
        for b in 0..batch {
            for c in 0..n {
                coords.push(dsnt::dsnt(attention.channel(b, c), h, w));
            }
        }
        let roi = self.config.roi();
        let size = self.config.image_size;
        let mut patch_data = Vec::with_capacity(batch * n * n * roi.size * roi.size);
        for b in 0..batch {
            patch_data.extend(roi::build_edge_rois(
                &coords[b * n..(b + 1) * n],
                images.sample(b),
                size,
                &roi,
            ));
        }
        let patches = Tensor::from_vec([batch * n * n, 1, roi.size, roi.size], patch_data);
        let adjacency_logits = self.edge.forward(&patches, edge_mode);
        let pair_probs: Vec<f32> = adjacency_logits.iter().map(|&z| sigmoid(z)).collect();
        let adjacency_probs = symmetrize(&pair_probs, n);
        Ok(EncoderOutput {
            n_max: n,
            attention,
            coords,
            patches,
            adjacency_logits,
            pair_probs,
            adjacency_probs,
        })
    }

    /// Backpropagates through a training-mode [`Encoder::forward`].
    pub fn backward(
        &mut self,
        out: &EncoderOutput,
        images: &Tensor,
        grads: EncoderGrads,
        scope: BackwardScope,
    ) -> Option<Tensor> {
        let n = self.config.n_max;
        let batch = out.batch();
        let size = self.config.image_size;
        let mut d_coords = grads.coords.unwrap_or_else(|| vec![[0.0; 2]; batch * n]);
        let mut d_image = scope.input.then(|| Tensor::zeros(images.shape));

        if scope.edge_branch {
            if let Some(d_probs) = grads.adjacency_probs {
                let d_pair = symmetrize_backward(&d_probs, n);
                let d_logits: Vec<f32> = d_pair
                    .iter()
                    .zip(&out.pair_probs)
                    .map(|(g, s)| g * s * (1.0 - s))
                    .collect();
                let d_patches = self.edge.backward(&d_logits);
                let roi = self.config.roi();
                let ps = roi.size * roi.size * n * n;
                for b in 0..batch {
                    let coords = &out.coords[b * n..(b + 1) * n];
                    let dp = &d_patches.data[b * ps..(b + 1) * ps];
                    let di = d_image.as_mut().map(|t| t.sample_mut(b));
                    let dc = &mut d_coords[b * n..(b + 1) * n];
                    if scope.attention_branch || di.is_some() {
                        roi::build_edge_rois_backward(coords, images.sample(b), size, &roi, dp, dc, di);
                    }
                }
            }
        }

        if scope.attention_branch {
            let att = &out.attention.0;
            let (h, w) = (att.h(), att.w());
            let hw = h * w;
            let mut d_att = grads.attention.unwrap_or_else(|| Tensor::zeros(att.shape));
            for (k, dc) in d_coords.iter().enumerate() {
                dsnt::dsnt_backward(h, w, *dc, &mut d_att.data[k * hw..(k + 1) * hw]);
            }
            let mut d_logits = Tensor::zeros(att.shape);
            let t = self.config.softmax_temperature;
            for k in 0..batch * n {
                let r = k * hw..(k + 1) * hw;
                dsnt::spatial_softmax_backward(&att.data[r.clone()], &d_att.data[r.clone()], t, &mut d_logits.data[r]);
            }
            let d_features = self.head.backward(&d_logits);
            let d_in = self.backbone.backward(d_features, scope.input);
            if let (Some(total), Some(d)) = (d_image.as_mut(), d_in) {
                total.add_assign(&d);
            }
        }
        d_image
    }
}

impl Module for Encoder {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.backbone.visit_params(&child_name(prefix, "backbone"), f);
        self.head.visit_params(&child_name(prefix, "attention"), f);
        self.edge.visit_params(&child_name(prefix, "edge"), f);
    }
}

/// View over just the attention branch (backbone + head) of an encoder.
pub struct AttentionBranch<'a>(pub &'a mut Encoder);

impl Module for AttentionBranch<'_> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.0.backbone.visit_params(&child_name(prefix, "backbone"), f);
        self.0.head.visit_params(&child_name(prefix, "attention"), f);
    }
}

/// View over just the edge classifier of an encoder.
pub struct EdgeBranch<'a>(pub &'a mut Encoder);

impl Module for EdgeBranch<'_> {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.0.edge.visit_params(&child_name(prefix, "edge"), f);
    }
}
