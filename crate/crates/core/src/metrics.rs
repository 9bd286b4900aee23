//! Triplet-based graph evaluation: every predicted edge becomes a
//! `<node, connected, node>` triplet that must land within a pixel tolerance
//! of a ground-truth edge at both ends.

use alloc::vec;
use alloc::vec::Vec;

use crate::coords::norm_to_pixel;
use crate::encoder::PredictedGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MetricConfig {
    pub threshold: f64,
    pub tol: f64,
    pub merge_radius: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            threshold: 0.5,
            tol: 8.0,
            merge_radius: 8.0,
        }
    }
}

/// An undirected "connected" relation between two pixel positions.
/// Endpoints are stored in lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Triplet {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub prob: f64,
}

impl Triplet {
    pub fn new(p: [f64; 2], q: [f64; 2], prob: f64) -> Self {
        if lex_le(p, q) {
            Triplet { a: p, b: q, prob }
        } else {
            Triplet { a: q, b: p, prob }
        }
    }

    /// Larger of the two endpoint distances under the better endpoint pairing.
    pub fn distance(&self, other: &Triplet) -> f64 {
        let straight = dist(self.a, other.a).max(dist(self.b, other.b));
        let crossed = dist(self.a, other.b).max(dist(self.b, other.a));
        straight.min(crossed)
    }
}

fn lex_le(p: [f64; 2], q: [f64; 2]) -> bool {
    p[0] < q[0] || (p[0] == q[0] && p[1] <= q[1])
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
    num_traits::Float::sqrt(dx * dx + dy * dy)
}

/// One triplet per unordered pair with probability at or above `threshold`.
pub fn extract_triplets(graph: &PredictedGraph, threshold: f64, image_size: usize) -> Vec<Triplet> {
    let n = graph.n_max();
    let px: Vec<[f64; 2]> = graph
        .node_coords
        .iter()
        .map(|c| {
            [
                norm_to_pixel(c[0] as f64, image_size),
                norm_to_pixel(c[1] as f64, image_size),
            ]
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = graph.prob(i, j) as f64;
            if p >= threshold {
                out.push(Triplet::new(px[i], px[j], p));
            }
        }
    }
    out
}

/// Ground-truth triplets straight from pixel coordinates and a 0/1 adjacency.
pub fn gt_triplets(coords_px: &[[f64; 2]], adjacency: &[Vec<u8>]) -> Vec<Triplet> {
    let mut out = Vec::new();
    for i in 0..coords_px.len() {
        for j in i + 1..coords_px.len() {
            if adjacency[i][j] != 0 {
                out.push(Triplet::new(coords_px[i], coords_px[j], 1.0));
            }
        }
    }
    out
}

fn dedup_order(a: &Triplet, b: &Triplet) -> core::cmp::Ordering {
    b.prob
        .total_cmp(&a.prob)
        .then(a.a[0].total_cmp(&b.a[0]))
        .then(a.a[1].total_cmp(&b.a[1]))
        .then(a.b[0].total_cmp(&b.b[0]))
        .then(a.b[1].total_cmp(&b.b[1]))
}

/// Greedy suppression: walk triplets by descending probability (ties by
/// coordinates) and drop any whose endpoints are both within `merge_radius`
/// of an already kept triplet.
pub fn dedup(triplets: &[Triplet], merge_radius: f64) -> Vec<Triplet> {
    let mut sorted = triplets.to_vec();
    sorted.sort_by(dedup_order);
    let mut kept: Vec<Triplet> = Vec::with_capacity(sorted.len());
    for t in sorted {
        if kept.iter().all(|k| k.distance(&t) > merge_radius) {
            kept.push(t);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalCounts {
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
}

impl EvalCounts {
    pub fn add(&mut self, other: EvalCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Maximum bipartite matching between predicted and ground-truth triplets,
/// where a pair is matchable when both endpoints are within `tol`.
pub fn match_triplets(pred: &[Triplet], gt: &[Triplet], tol: f64) -> EvalCounts {
    let edges: Vec<Vec<usize>> = pred
        .iter()
        .map(|p| (0..gt.len()).filter(|&g| p.distance(&gt[g]) <= tol).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; gt.len()];
    let mut tp = 0;
    for p in 0..pred.len() {
        let mut seen = vec![false; gt.len()];
        if augment(p, &edges, &mut owner, &mut seen) {
            tp += 1;
        }
    }
    EvalCounts {
        tp,
        fp: pred.len() - tp,
        fn_: gt.len() - tp,
    }
}

fn augment(p: usize, edges: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &g in &edges[p] {
        if seen[g] {
            continue;
        }
        seen[g] = true;
        if owner[g].is_none() || augment(owner[g].unwrap(), edges, owner, seen) {
            owner[g] = Some(p);
            return true;
        }
    }
    false
}

/// Counts for one sample: extract, dedup, match.
pub fn evaluate_graph(
    graph: &PredictedGraph,
    gt_coords_px: &[[f64; 2]],
    gt_adjacency: &[Vec<u8>],
    image_size: usize,
    cfg: &MetricConfig,
) -> EvalCounts {
    let pred = dedup(&extract_triplets(graph, cfg.threshold, image_size), cfg.merge_radius);
    match_triplets(&pred, &gt_triplets(gt_coords_px, gt_adjacency), cfg.tol)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub totals: EvalCounts,
    pub per_sample: Vec<EvalCounts>,
    pub config: MetricConfig,
}

impl EvalReport {
    /// Micro-average: counts are summed over samples before taking ratios.
    pub fn from_counts(per_sample: Vec<EvalCounts>, config: MetricConfig) -> Result<Self> {
        if per_sample.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut totals = EvalCounts::default();
        for c in &per_sample {
            totals.add(*c);
        }
        Ok(EvalReport {
            precision: totals.precision(),
            recall: totals.recall(),
            f1: totals.f1(),
            totals,
            per_sample,
            config,
        })
    }
}
