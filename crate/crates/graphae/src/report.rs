//! Result tables and qualitative image grids.
//!
//! `render_report` writes `metrics.json` (every [`RunResult`]) and
//! `table.csv` (one row per result, metrics in percent). Grids have eight
//! 128 px panels per sample: input, ground-truth graph, coarse and refined
//! reconstructions, the predicted graph as an image and as a matrix, and
//! the baseline's graph as an image and as a matrix.

use std::fmt::Write as _;
use std::path::Path;

use graphae_core::encoder::PredictedGraph;
use graphae_core::model::{AutoEncoder, BaselineModel};
use graphae_core::nn::Mode;
use graphae_core::shapes::render_segments;

use crate::dataset::Manifest;
use crate::error::{Error, Result};
use crate::experiment::RunResult;
use crate::image_io;

pub const GRID_COLUMNS: usize = 8;

pub fn render_report(results: &[RunResult], out_dir: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    std::fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let path = out_dir.join("metrics.json");
    let json = serde_json::to_string_pretty(results).expect("results serialize");
    std::fs::write(&path, json).map_err(Error::io(&path))?;
    let path = out_dir.join("table.csv");
    std::fs::write(&path, results_table(results)).map_err(Error::io(&path))
}

pub fn results_table(results: &[RunResult]) -> String {
    let mut csv = String::from(
        "label,n_max,runs,failed,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,f1_mean_with_failures,f1_std_with_failures\n",
    );
    for r in results {
        let s = &r.summary;
        let w = &r.summary_with_failures;
        let pct = |v: f64| format!("{:.2}", 100.0 * v);
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.label,
            r.config.n_max(),
            s.runs,
            r.failed,
            pct(s.precision.mean),
            pct(s.precision.std),
            pct(s.recall.mean),
            pct(s.recall.std),
            pct(s.f1.mean),
            pct(s.f1.std),
            pct(w.f1.mean),
            pct(w.f1.std),
        )
        .unwrap();
    }
    csv
}

const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
];

/// One RGB panel, `size²` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub size: usize,
    pub rgb: Vec<u8>,
}

impl Panel {
    pub fn blank(size: usize) -> Self {
        Panel {
            size,
            rgb: vec![0; size * size * 3],
        }
    }

    pub fn gray(data: &[f32], size: usize) -> Self {
        Panel {
            size,
            rgb: data.iter().flat_map(|&v| [image_io::to_byte(v); 3]).collect(),
        }
    }

    fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let i = (y * self.size + x) * 3;
        self.rgb[i..i + 3].copy_from_slice(&c);
    }
}

/// Edges at or above `threshold` as white strokes, nodes as colored dots.
/// `nodes` are pixel coordinates; `probs` is row-major `n²`.
pub fn graph_panel(nodes: &[[f64; 2]], probs: &[f64], threshold: f64, size: usize) -> Panel {
    let n = nodes.len();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| probs[i * n + j] >= threshold)
        .collect();
    let mut panel = Panel::gray(&render_segments(nodes, &edges, size, 2.0), size);
    for (k, p) in nodes.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for dy in -2i64..=2 {
            for dx in -2i64..=2 {
                if dx * dx + dy * dy > 5 {
                    continue;
                }
                let (x, y) = (p[0].round() as i64 + dx, p[1].round() as i64 + dy);
                if (0..size as i64).contains(&x) && (0..size as i64).contains(&y) {
                    panel.put(x as usize, y as usize, color);
                }
            }
        }
    }
    panel
}

/// Adjacency probabilities as gray blocks, with row colors matching the
/// node dots of [`graph_panel`].
pub fn matrix_panel(probs: &[f64], n: usize, size: usize) -> Panel {
    let mut panel = Panel::blank(size);
    let margin = size / 16;
    let cell = (size - margin) / n.max(1);
    for y in 0..size {
        for x in 0..size {
            let color = if x < margin && y >= margin && (y - margin) / cell < n {
                PALETTE[((y - margin) / cell) % PALETTE.len()]
            } else if y < margin && x >= margin && (x - margin) / cell < n {
                PALETTE[((x - margin) / cell) % PALETTE.len()]
            } else if x >= margin && y >= margin {
                let (i, j) = ((y - margin) / cell, (x - margin) / cell);
                if i < n && j < n {
                    let edge = (x - margin).is_multiple_of(cell) || (y - margin).is_multiple_of(cell);
                    if edge {
                        [64; 3]
                    } else {
                        [image_io::to_byte(probs[i * n + j] as f32); 3]
                    }
                } else {
                    [0; 3]
                }
            } else {
                [0; 3]
            };
            panel.put(x, y, color);
        }
    }
    panel
}

/// Lays rows of panels out left to right, top to bottom.
pub fn compose_grid(rows: &[Vec<Panel>]) -> (Vec<u8>, usize, usize) {
    let size = rows.first().and_then(|r| r.first()).map_or(0, |p| p.size);
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let (w, h) = (cols * size, rows.len() * size);
    let mut rgb = vec![0u8; w * h * 3];
    for (r, row) in rows.iter().enumerate() {
        for (c, p) in row.iter().enumerate() {
            for y in 0..size {
                let dst = ((r * size + y) * w + c * size) * 3;
                rgb[dst..dst + size * 3].copy_from_slice(&p.rgb[y * size * 3..(y + 1) * size * 3]);
            }
        }
    }
    (rgb, w, h)
}

fn graph_pixels(g: &PredictedGraph, size: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let nodes = g
        .node_coords
        .iter()
        .map(|c| {
            [
                graphae_core::coords::norm_to_pixel(c[0] as f64, size),
                graphae_core::coords::norm_to_pixel(c[1] as f64, size),
            ]
        })
        .collect();
    (nodes, g.adjacency_probs.iter().map(|&p| p as f64).collect())
}

/// Eight-panel rows for the given samples. Baseline panels stay black when
/// no baseline model is given.
pub fn grid_rows(
    model: &mut AutoEncoder,
    mut baseline: Option<&mut BaselineModel>,
    data: &Manifest,
    indices: &[usize],
    threshold: f64,
) -> Result<Vec<Vec<Panel>>> {
    let n_max = model.config.encoder.n_max;
    let batch = data.load_batch(indices, n_max)?;
    let size = batch.images.h();
    let rec = model.reconstruct(&batch.images, Mode::Eval)?;
    let base_graphs = match baseline.as_mut() {
        Some(b) => Some(b.encoder.forward(&batch.images, Mode::Eval)?.graphs()),
        None => None,
    };
    let mut rows = Vec::with_capacity(indices.len());
    for (k, &i) in indices.iter().enumerate() {
        let r = &data.records[i];
        let gt_probs: Vec<f64> = r.adjacency.iter().flatten().map(|&a| a as f64).collect();
        let (nodes, probs) = graph_pixels(&rec.encoded.graph(k), size);
        let mut row = vec![
            Panel::gray(batch.images.sample(k), size),
            graph_panel(&r.node_coords, &gt_probs, 0.5, size),
            Panel::gray(rec.decoded.coarse.sample(k), size),
            Panel::gray(rec.decoded.refined.sample(k), size),
            graph_panel(&nodes, &probs, threshold, size),
            matrix_panel(&probs, n_max, size),
        ];
        match &base_graphs {
            Some(gs) => {
                let (bn, bp) = graph_pixels(&gs[k], size);
                row.push(graph_panel(&bn, &bp, threshold, size));
                row.push(matrix_panel(&bp, bn.len(), size));
            }
            None => {
                row.push(Panel::blank(size));
                row.push(Panel::blank(size));
            }
        }
        debug_assert_eq!(row.len(), GRID_COLUMNS);
        rows.push(row);
    }
    Ok(rows)
}

/// Writes `grid.png` with one row per sample into `out_dir`.
pub fn write_grid(rows: &[Vec<Panel>], out_dir: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyResults);
    }
    std::fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let (rgb, w, h) = compose_grid(rows);
    image_io::write_rgb(&out_dir.join("grid.png"), &rgb, w, h)
}
