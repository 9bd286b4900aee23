//! Scoring predicted graphs against the manifest's ground truth.

use graphae_core::encoder::PredictedGraph;
use graphae_core::metrics::{evaluate_graph, EvalCounts, EvalReport, MetricConfig};
use graphae_core::model::{AutoEncoder, BaselineModel};
use graphae_core::nn::Mode;
use graphae_core::shapes::Split;
use graphae_core::Tensor;

use crate::checkpoint::LoadedModel;
use crate::dataset::Manifest;
use crate::error::Result;

/// Anything that maps a batch of images to graphs.
pub trait GraphPredictor {
    fn n_max(&self) -> usize;
    fn predict(&mut self, images: &Tensor) -> Result<Vec<PredictedGraph>>;
}

impl GraphPredictor for AutoEncoder {
    fn n_max(&self) -> usize {
        self.config.encoder.n_max
    }

    fn predict(&mut self, images: &Tensor) -> Result<Vec<PredictedGraph>> {
        Ok(self.encoder.forward(images, Mode::Eval)?.graphs())
    }
}

impl GraphPredictor for BaselineModel {
    fn n_max(&self) -> usize {
        self.encoder.config.n_max
    }

    fn predict(&mut self, images: &Tensor) -> Result<Vec<PredictedGraph>> {
        Ok(self.encoder.forward(images, Mode::Eval)?.graphs())
    }
}

impl GraphPredictor for LoadedModel {
    fn n_max(&self) -> usize {
        match self {
            LoadedModel::SelfSupervised(m) => m.n_max(),
            LoadedModel::Baseline(m) => m.n_max(),
        }
    }

    fn predict(&mut self, images: &Tensor) -> Result<Vec<PredictedGraph>> {
        match self {
            LoadedModel::SelfSupervised(m) => m.predict(images),
            LoadedModel::Baseline(m) => m.predict(images),
        }
    }
}

/// Scores `indices` of the manifest in batches; counts are micro-averaged.
pub fn evaluate_indices(
    model: &mut dyn GraphPredictor,
    data: &Manifest,
    indices: &[usize],
    cfg: &MetricConfig,
    batch_size: usize,
) -> Result<EvalReport> {
    let mut counts = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(batch_size.max(1)) {
        let batch = data.load_batch(chunk, model.n_max())?;
        let graphs = model.predict(&batch.images)?;
        for (g, &i) in graphs.iter().zip(chunk) {
            let r = &data.records[i];
            counts.push(evaluate_graph(g, &r.node_coords, &r.adjacency, r.canvas_size, cfg));
        }
    }
    Ok(EvalReport::from_counts(counts, *cfg)?)
}

pub fn evaluate_split(
    model: &mut dyn GraphPredictor,
    data: &Manifest,
    split: Split,
    cfg: &MetricConfig,
    batch_size: usize,
    limit: Option<usize>,
) -> Result<EvalReport> {
    let mut indices = data.indices(split);
    if let Some(n) = limit {
        indices.truncate(n);
    }
    evaluate_indices(model, data, &indices, cfg, batch_size)
}

/// Scores the ground-truth graphs themselves; a sanity check of the metric.
pub fn evaluate_oracle(data: &Manifest, split: Split, cfg: &MetricConfig) -> Result<EvalReport> {
    let counts: Vec<EvalCounts> = data
        .indices(split)
        .into_iter()
        .map(|i| {
            let r = &data.records[i];
            let g = PredictedGraph::from_ground_truth(&r.node_coords, &r.adjacency, r.canvas_size);
            evaluate_graph(&g, &r.node_coords, &r.adjacency, r.canvas_size, cfg)
        })
        .collect();
    Ok(EvalReport::from_counts(counts, *cfg)?)
}
