//! `{ "nodes": [[x, y], ...], "adjacency": [[...], ...] }` in normalized
//! coordinates, as read by the `render` command.

use std::path::Path;

use graphae_core::decoder::{draw_coarse, DrawConfig, TemplateBank};
use graphae_core::encoder::PredictedGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<[f64; 2]>,
    /// Square; entries are edge probabilities (or 0/1).
    pub adjacency: Vec<Vec<f64>>,
}

impl GraphJson {
    pub fn from_prediction(g: &PredictedGraph) -> Self {
        let n = g.n_max();
        GraphJson {
            nodes: g.node_coords.iter().map(|c| [c[0] as f64, c[1] as f64]).collect(),
            adjacency: (0..n).map(|i| (0..n).map(|j| g.prob(i, j) as f64).collect()).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let g: GraphJson = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        let n = g.nodes.len();
        if g.adjacency.len() != n || g.adjacency.iter().any(|row| row.len() != n) {
            return Err(Error::format(path, format!("adjacency must be {n}x{n}")));
        }
        Ok(g)
    }

    /// Coarse drawing of the graph on a `cfg.canvas_size²` canvas.
    pub fn draw(&self, cfg: &DrawConfig) -> Vec<f64> {
        let probs: Vec<f64> = self.adjacency.iter().flatten().copied().collect();
        draw_coarse(&self.nodes, &probs, &TemplateBank::default(), cfg).image
    }
}
