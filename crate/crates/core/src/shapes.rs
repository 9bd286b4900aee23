//! Synthetic line drawings with exact graph ground truth.
//!
//! A canonical line, triangle or rectangle in the unit square is pushed
//! through a random affine map (scale, rotation, shear, translation) and
//! stroked onto a black canvas with anti-aliased white capsules.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ShapeKind {
    Line,
    Triangle,
    Rectangle,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Line, ShapeKind::Triangle, ShapeKind::Rectangle];

    pub fn vertex_count(self) -> usize {
        self.canonical_vertices().len()
    }

    /// Vertices in the unit square, listed in drawing order.
    pub fn canonical_vertices(self) -> &'static [[f64; 2]] {
        match self {
            ShapeKind::Line => &[[0.25, 0.5], [0.75, 0.5]],
            ShapeKind::Triangle => &[[0.5, 0.25], [0.75, 0.7], [0.25, 0.7]],
            ShapeKind::Rectangle => &[[0.25, 0.3], [0.75, 0.3], [0.75, 0.7], [0.25, 0.7]],
        }
    }

    /// Undirected edges `(i, j)` with `i < j`. Rectangles have no diagonals.
    pub fn edges(self) -> &'static [(usize, usize)] {
        match self {
            ShapeKind::Line => &[(0, 1)],
            ShapeKind::Triangle => &[(0, 1), (1, 2), (0, 2)],
            ShapeKind::Rectangle => &[(0, 1), (1, 2), (2, 3), (0, 3)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Line => "line",
            ShapeKind::Triangle => "triangle",
            ShapeKind::Rectangle => "rectangle",
        }
    }
}

/// Generation parameters. Distances are in pixels, scale is relative to the
/// canvas side.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ShapeConfig {
    pub canvas_size: usize,
    pub stroke_width: f64,
    pub scale: (f64, f64),
    pub shear: (f64, f64),
    pub margin: f64,
    pub min_vertex_distance: f64,
    pub max_attempts: usize,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            canvas_size: 128,
            stroke_width: 2.0,
            scale: (0.5, 1.0),
            shear: (-0.3, 0.3),
            margin: 6.0,
            min_vertex_distance: 12.0,
            max_attempts: 100,
        }
    }
}

/// Decomposed affine parameters; see [`AffineParams::matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub scale: f64,
    pub rotation: f64,
    pub shear: f64,
    /// Pixel position the unit-square center lands on.
    pub translation: [f64; 2],
}

impl AffineParams {
    /// Scale 1, no rotation or shear, unit square centered on the canvas.
    pub fn identity(canvas_size: usize) -> Self {
        let c = (canvas_size as f64 - 1.0) / 2.0;
        AffineParams {
            scale: 1.0,
            rotation: 0.0,
            shear: 0.0,
            translation: [c, c],
        }
    }

    /// 2x3 matrix mapping unit-square points to pixel coordinates:
    /// `p = s * W * R(theta) * Shear(k) * (v - (0.5, 0.5)) + t`.
    pub fn matrix(&self, canvas_size: usize) -> [[f64; 3]; 2] {
        let (sin, cos) = Float::sin_cos(self.rotation);
        let s = self.scale * canvas_size as f64;
        let k = self.shear;
        // R * Sh = [[cos, cos*k - sin], [sin, sin*k + cos]]
        let m = [[s * cos, s * (cos * k - sin)], [s * sin, s * (sin * k + cos)]];
        let tx = self.translation[0] - 0.5 * (m[0][0] + m[0][1]);
        let ty = self.translation[1] - 0.5 * (m[1][0] + m[1][1]);
        [[m[0][0], m[0][1], tx], [m[1][0], m[1][1], ty]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub canonical_vertices: Vec<[f64; 2]>,
    pub affine: [[f64; 3]; 2],
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, affine: [[f64; 3]; 2]) -> Self {
        ShapeSpec {
            kind,
            canonical_vertices: kind.canonical_vertices().to_vec(),
            affine,
        }
    }

    /// Transformed vertices in pixel coordinates.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let a = &self.affine;
        self.canonical_vertices
            .iter()
            .map(|v| {
                [
                    a[0][0] * v[0] + a[0][1] * v[1] + a[0][2],
                    a[1][0] * v[0] + a[1][1] * v[1] + a[1][2],
                ]
            })
            .collect()
    }

    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        let n = self.canonical_vertices.len();
        let mut adj = vec![vec![0u8; n]; n];
        for &(i, j) in self.kind.edges() {
            adj[i][j] = 1;
            adj[j][i] = 1;
        }
        adj
    }
}

/// Draws a kind uniformly, then its affine placement.
pub fn sample_shape<R: Rng>(rng: &mut R, config: &ShapeConfig) -> Result<ShapeSpec> {
    let kind = ShapeKind::ALL[rng.random_range(0..3)];
    sample_shape_of(kind, rng, config)
}

/// Rejection-samples an affine placement of `kind` that keeps every vertex
/// inside the canvas margin and all vertices at least
/// `min_vertex_distance` apart.
pub fn sample_shape_of<R: Rng>(kind: ShapeKind, rng: &mut R, config: &ShapeConfig) -> Result<ShapeSpec> {
    let w = config.canvas_size as f64;
    let lo_edge = config.margin;
    let hi_edge = w - 1.0 - config.margin;
    for _ in 0..config.max_attempts {
        let scale = rng.random_range(config.scale.0..=config.scale.1);
        let rotation = rng.random_range(0.0..2.0 * PI);
        let shear = rng.random_range(config.shear.0..=config.shear.1);
        let u_x: f64 = rng.random();
        let u_y: f64 = rng.random();
        let centered = AffineParams {
            scale,
            rotation,
            shear,
            translation: [0.0, 0.0],
        };
        let offsets = ShapeSpec::new(kind, centered.matrix(config.canvas_size)).vertices();
        let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for o in &offsets {
            for d in 0..2 {
                min[d] = min[d].min(o[d]);
                max[d] = max[d].max(o[d]);
            }
        }
        let range_x = (lo_edge - min[0], hi_edge - max[0]);
        let range_y = (lo_edge - min[1], hi_edge - max[1]);
        if range_x.0 > range_x.1 || range_y.0 > range_y.1 {
            continue;
        }
        let params = AffineParams {
            translation: [
                range_x.0 + u_x * (range_x.1 - range_x.0),
                range_y.0 + u_y * (range_y.1 - range_y.0),
            ],
            ..centered
        };
        let spec = ShapeSpec::new(kind, params.matrix(config.canvas_size));
        if min_pairwise_distance(&spec.vertices()).0 >= config.min_vertex_distance {
            return Ok(spec);
        }
    }
    Err(Error::SamplingExhausted {
        attempts: config.max_attempts,
    })
}

fn min_pairwise_distance(v: &[[f64; 2]]) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let d = Float::hypot(v[i][0] - v[j][0], v[i][1] - v[j][1]);
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    best
}

/// A rasterized drawing with its graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub kind: ShapeKind,
    pub canvas_size: usize,
    /// Row-major `canvas_size²` intensities, each exactly `k / 255`.
    pub image: Vec<f32>,
    /// Pixel coordinates `(x, y)`.
    pub node_coords: Vec<[f64; 2]>,
    pub adjacency: Vec<Vec<u8>>,
}

impl GraphSample {
    pub fn node_count(&self) -> usize {
        self.node_coords.len()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        edge_list(&self.adjacency)
    }

    /// Pads the graph to `n_max` slots with a validity mask.
    pub fn padded(&self, n_max: usize) -> PaddedGraph {
        PaddedGraph::new(&self.node_coords, &self.adjacency, n_max)
    }
}

pub fn edge_list(adjacency: &[Vec<u8>]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (i, row) in adjacency.iter().enumerate() {
        for (j, &a) in row.iter().enumerate().skip(i + 1) {
            if a != 0 {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Fixed-size graph arrays used by batched training code.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedGraph {
    pub n_max: usize,
    pub coords: Vec<[f64; 2]>,
    /// Row-major `n_max²`.
    pub adjacency: Vec<u8>,
    pub mask: Vec<u8>,
}

impl PaddedGraph {
    pub fn new(coords: &[[f64; 2]], adjacency: &[Vec<u8>], n_max: usize) -> Self {
        assert!(coords.len() <= n_max, "graph has more nodes than n_max");
        let mut padded = PaddedGraph {
            n_max,
            coords: vec![[0.0; 2]; n_max],
            adjacency: vec![0; n_max * n_max],
            mask: vec![0; n_max],
        };
        for (i, c) in coords.iter().enumerate() {
            padded.coords[i] = *c;
            padded.mask[i] = 1;
            for (j, &a) in adjacency[i].iter().enumerate() {
                padded.adjacency[i * n_max + j] = a;
            }
        }
        padded
    }

    pub fn node_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m != 0).count()
    }
}

/// Strokes a spec onto a black canvas.
pub fn rasterize(spec: &ShapeSpec, canvas_size: usize, stroke_width: f64) -> Result<GraphSample> {
    let vertices = spec.vertices();
    let (d, a, b) = min_pairwise_distance(&vertices);
    if d < stroke_width {
        return Err(Error::DegenerateShape { a, b, distance: d });
    }
    let image = render_segments(&vertices, spec.kind.edges(), canvas_size, stroke_width);
    Ok(GraphSample {
        kind: spec.kind,
        canvas_size,
        image,
        node_coords: vertices,
        adjacency: spec.adjacency(),
    })
}

/// Anti-aliased union of capsule strokes, quantized to 8-bit levels.
///
/// Coverage of a pixel at distance `d` from the nearest segment is
/// `clamp(w/2 + 1/2 - d, 0, 1)`.
pub fn render_segments(
    vertices: &[[f64; 2]],
    edges: &[(usize, usize)],
    canvas_size: usize,
    stroke_width: f64,
) -> Vec<f32> {
    let mut coverage = vec![0.0f64; canvas_size * canvas_size];
    let reach = stroke_width / 2.0 + 0.5;
    for &(i, j) in edges {
        let (p, q) = (vertices[i], vertices[j]);
        let x0 = (p[0].min(q[0]) - reach).floor().max(0.0) as usize;
        let y0 = (p[1].min(q[1]) - reach).floor().max(0.0) as usize;
        let x1 = ((p[0].max(q[0]) + reach).ceil().max(0.0) as usize).min(canvas_size - 1);
        let y1 = ((p[1].max(q[1]) + reach).ceil().max(0.0) as usize).min(canvas_size - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = point_segment_distance([x as f64, y as f64], p, q);
                let c = (reach - d).clamp(0.0, 1.0);
                let px = &mut coverage[y * canvas_size + x];
                *px = px.max(c);
            }
        }
    }
    coverage.into_iter().map(quantize).collect()
}

/// Rounds an intensity to the nearest `k / 255`.
pub fn quantize(v: f64) -> f32 {
    let k = Float::round(v.clamp(0.0, 1.0) * 255.0);
    k as f32 / 255.0
}

pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Float::hypot(p[0] - (a[0] + t * dx), p[1] - (a[1] + t * dy))
}

/// Deterministic dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    /// 90 / 5 / 5 by a hash of the sample index.
    pub fn of_index(index: u64) -> Split {
        match splitmix64(index ^ 0x5EED_5EED_5EED_5EED) % 100 {
            0..=89 => Split::Train,
            90..=94 => Split::Val,
            _ => Split::Test,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// SplitMix64 finalizer; used to derive independent per-sample seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sample `index` in a dataset generated from `dataset_seed`.
pub fn sample_seed(dataset_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(dataset_seed) ^ index)
}

/// Regenerates one sample from its per-sample seed.
pub fn generate_sample(seed: u64, config: &ShapeConfig) -> Result<GraphSample> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let spec = sample_shape(&mut rng, config)?;
    rasterize(&spec, config.canvas_size, config.stroke_width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_affine_keeps_line_horizontal() {
        let spec = ShapeSpec::new(ShapeKind::Line, AffineParams::identity(128).matrix(128));
        let v = spec.vertices();
        assert_eq!(v.len(), 2);
        assert!((v[0][1] - v[1][1]).abs() < 1e-12);
        assert!((v[0][0] - 31.5).abs() < 1e-9 && (v[1][0] - 95.5).abs() < 1e-9);
    }

    #[test]
    fn rectangle_is_a_four_cycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = sample_shape_of(ShapeKind::Rectangle, &mut rng, &ShapeConfig::default()).unwrap();
        assert_eq!(spec.vertices().len(), 4);
        let adj = spec.adjacency();
        for row in &adj {
            assert_eq!(row.iter().map(|&a| a as usize).sum::<usize>(), 2);
        }
        assert_eq!(adj[0][2], 0);
        assert_eq!(adj[1][3], 0);
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let cfg = ShapeConfig::default();
        let a = sample_shape(&mut ChaCha8Rng::seed_from_u64(42), &cfg).unwrap();
        let b = sample_shape(&mut ChaCha8Rng::seed_from_u64(42), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_vertices_respect_margin_and_spacing() {
        let cfg = ShapeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let spec = sample_shape(&mut rng, &cfg).unwrap();
            let v = spec.vertices();
            for p in &v {
                assert!(p[0] >= 6.0 - 1e-9 && p[0] <= 121.0 + 1e-9);
                assert!(p[1] >= 6.0 - 1e-9 && p[1] <= 121.0 + 1e-9);
            }
            assert!(min_pairwise_distance(&v).0 >= 12.0);
        }
    }

    #[test]
    fn impossible_ranges_exhaust_the_reject_loop() {
        let cfg = ShapeConfig {
            margin: 70.0,
            ..ShapeConfig::default()
        };
        let err = sample_shape(&mut ChaCha8Rng::seed_from_u64(0), &cfg).unwrap_err();
        assert_eq!(err, Error::SamplingExhausted { attempts: 100 });
    }

    #[test]
    fn line_raster_lights_segment_and_leaves_corners_dark() {
        let spec = ShapeSpec::new(ShapeKind::Line, AffineParams::identity(128).matrix(128));
        let s = rasterize(&spec, 128, 2.0).unwrap();
        let row = 63.5f64;
        // the segment runs along y = 63.5, between rows 63 and 64
        for x in 32..95 {
            assert!(s.image[63 * 128 + x] > 0.99, "x={x}");
            assert!(s.image[64 * 128 + x] > 0.99);
        }
        assert!(row > 0.0);
        for &(x, y) in &[(0usize, 0usize), (127, 0), (0, 127), (127, 127)] {
            assert_eq!(s.image[y * 128 + x], 0.0);
        }
    }

    #[test]
    fn triangle_has_three_edges_above_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = sample_shape_of(ShapeKind::Triangle, &mut rng, &ShapeConfig::default()).unwrap();
        let s = rasterize(&spec, 128, 2.0).unwrap();
        let upper: u32 = (0..3)
            .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
            .map(|(i, j)| s.adjacency[i][j] as u32)
            .sum();
        assert_eq!(upper, 3);
        for i in 0..3 {
            assert_eq!(s.adjacency[i][i], 0);
            for j in 0..3 {
                assert_eq!(s.adjacency[i][j], s.adjacency[j][i]);
            }
        }
    }

    #[test]
    fn coincident_vertices_are_rejected() {
        let mut spec = ShapeSpec::new(ShapeKind::Line, AffineParams::identity(128).matrix(128));
        spec.canonical_vertices[1] = spec.canonical_vertices[0];
        assert!(matches!(rasterize(&spec, 128, 2.0), Err(Error::DegenerateShape { .. })));
    }

    #[test]
    fn lit_pixels_stay_near_ground_truth_edges() {
        let cfg = ShapeConfig::default();
        for seed in 0..40 {
            let s = generate_sample(seed, &cfg).unwrap();
            for y in 0..128 {
                for x in 0..128 {
                    if s.image[y * 128 + x] == 0.0 {
                        continue;
                    }
                    let d = s
                        .edges()
                        .iter()
                        .map(|&(i, j)| point_segment_distance([x as f64, y as f64], s.node_coords[i], s.node_coords[j]))
                        .fold(f64::INFINITY, f64::min);
                    assert!(d <= cfg.stroke_width, "seed {seed}: lit pixel {d} px from every edge");
                }
            }
            let rerendered = render_segments(&s.node_coords, &s.edges(), 128, cfg.stroke_width);
            assert_eq!(rerendered, s.image);
        }
    }

    #[test]
    fn image_values_are_exact_byte_levels() {
        let s = generate_sample(3, &ShapeConfig::default()).unwrap();
        for v in &s.image {
            let k = (*v * 255.0).round();
            assert_eq!(k / 255.0, *v);
        }
    }

    #[test]
    #[allow(clippy::erasing_op, clippy::identity_op)]
    fn padded_rectangle_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = sample_shape_of(ShapeKind::Rectangle, &mut rng, &ShapeConfig::default()).unwrap();
        let s = rasterize(&spec, 128, 2.0).unwrap();
        let p = s.padded(6);
        assert_eq!(p.mask, vec![1, 1, 1, 1, 0, 0]);
        assert_eq!(p.adjacency[0 * 6 + 1], 1);
        assert_eq!(p.adjacency[4 * 6 + 5], 0);
    }

    #[test]
    fn kind_frequencies_are_uniform_within_three_sigma() {
        let cfg = ShapeConfig::default();
        let n = 3000usize;
        let mut counts = [0usize; 3];
        for i in 0..n as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(11, i));
            let kind = sample_shape(&mut rng, &cfg).unwrap().kind;
            counts[kind as usize] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn split_proportions() {
        let mut counts = [0usize; 3];
        for i in 0..20000u64 {
            counts[Split::of_index(i) as usize] += 1;
        }
        assert!((counts[0] as f64 / 20000.0 - 0.90).abs() < 0.01, "{counts:?}");
        assert!((counts[1] as f64 / 20000.0 - 0.05).abs() < 0.01);
        assert!((counts[2] as f64 / 20000.0 - 0.05).abs() < 0.01);
    }
}
