//! Differentiable drawing: every node pair warps the edge template between
//! its endpoints, scaled by the pair's connection probability, and the
//! strokes are summed onto one canvas.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::TemplateBank;
use crate::coords::{norm_to_pixel, pixel_per_norm};
use crate::sampling::bilinear;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DrawConfig {
    pub canvas_size: usize,
    pub stroke_width: f64,
    /// Pairs whose endpoints are closer than this (pixels) are not drawn.
    pub min_length: f64,
}

impl Default for DrawConfig {
    fn default() -> Self {
        DrawConfig {
            canvas_size: 128,
            stroke_width: 2.0,
            min_length: 2.0,
        }
    }
}

/// Canvas before (`raw`) and after clamping to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Drawing<T> {
    pub raw: Vec<T>,
    pub image: Vec<T>,
}

/// Geometry of one warped stroke.
struct Stroke<T> {
    a: [T; 2],
    d: [T; 2],
    len: T,
    /// Canvas pixel window `[x0, x1] x [y0, y1]` that can receive ink.
    window: [usize; 4],
}

fn stroke<T: Float>(a_norm: [T; 2], b_norm: [T; 2], bank: &TemplateBank, cfg: &DrawConfig) -> Option<Stroke<T>> {
    let size = cfg.canvas_size;
    let a = [norm_to_pixel(a_norm[0], size), norm_to_pixel(a_norm[1], size)];
    let b = [norm_to_pixel(b_norm[0], size), norm_to_pixel(b_norm[1], size)];
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if !(len >= T::from(cfg.min_length).unwrap()) {
        return None;
    }
    let normal_scale = T::from(cfg.stroke_width / bank.thickness).unwrap();
    let along = len / T::from(bank.anchor_length()).unwrap();
    let reach = T::from(bank.height as f64).unwrap() * normal_scale.max(along) + T::from(2.0).unwrap();
    let lim = T::from(size - 1).unwrap();
    let clampi = |v: T| v.max(T::zero()).min(lim).to_usize().unwrap_or(0);
    let window = [
        clampi((a[0].min(b[0]) - reach).floor()),
        clampi((a[0].max(b[0]) + reach).ceil()),
        clampi((a[1].min(b[1]) - reach).floor()),
        clampi((a[1].max(b[1]) + reach).ceil()),
    ];
    Some(Stroke { a, d, len, window })
}

/// Template coordinates of canvas point `r` (relative to the first endpoint).
#[inline]
fn to_template<T: Float>(r: [T; 2], d: [T; 2], len: T, lt: T, anchor: [T; 2], normal_scale: T) -> (T, T, T, T) {
    let dot = r[0] * d[0] + r[1] * d[1];
    let cross = d[0] * r[1] - d[1] * r[0];
    let qx = anchor[0] + lt * dot / (len * len);
    let qy = anchor[1] + cross / (normal_scale * len);
    (qx, qy, dot, cross)
}

/// `coords` are normalized node positions, `probs` the row-major `n x n`
/// adjacency probabilities; only pairs `i < j` are drawn.
pub fn draw_coarse<T: Float>(coords: &[[T; 2]], probs: &[T], bank: &TemplateBank, cfg: &DrawConfig) -> Drawing<T> {
    let n = coords.len();
    let size = cfg.canvas_size;
    let tpl = bank.values::<T>();
    let lt = T::from(bank.anchor_length()).unwrap();
    let anchor = [
        T::from(bank.anchors[0][0]).unwrap(),
        T::from(bank.anchors[0][1]).unwrap(),
    ];
    let normal_scale = T::from(cfg.stroke_width / bank.thickness).unwrap();
    let mut raw = vec![T::zero(); size * size];
    for i in 0..n {
        for j in i + 1..n {
            let p = probs[i * n + j];
            if p == T::zero() {
                continue;
            }
            let Some(s) = stroke(coords[i], coords[j], bank, cfg) else {
                continue;
            };
            for y in s.window[2]..=s.window[3] {
                for x in s.window[0]..=s.window[1] {
                    let r = [T::from(x).unwrap() - s.a[0], T::from(y).unwrap() - s.a[1]];
                    let (qx, qy, _, _) = to_template(r, s.d, s.len, lt, anchor, normal_scale);
                    let v = bilinear(&tpl, bank.height, bank.width, qx, qy).0;
                    raw[y * size + x] = raw[y * size + x] + p * v;
                }
            }
        }
    }
    let image = raw.iter().map(|v| v.max(T::zero()).min(T::one())).collect();
    Drawing { raw, image }
}

/// Gradients of `sum(d_image * image)` with respect to normalized
/// coordinates and to the full `n x n` probability matrix (only `i < j`
/// entries are non-zero).
pub fn draw_coarse_backward<T: Float>(
    coords: &[[T; 2]],
    probs: &[T],
    bank: &TemplateBank,
    cfg: &DrawConfig,
    raw: &[T],
    d_image: &[T],
) -> (Vec<[T; 2]>, Vec<T>) {
    let n = coords.len();
    let size = cfg.canvas_size;
    let tpl = bank.values::<T>();
    let lt = T::from(bank.anchor_length()).unwrap();
    let anchor = [
        T::from(bank.anchors[0][0]).unwrap(),
        T::from(bank.anchors[0][1]).unwrap(),
    ];
    let normal_scale = T::from(cfg.stroke_width / bank.thickness).unwrap();
    let two = T::from(2.0).unwrap();
    // clamp passes gradient on the closed interval [0, 1]
    let d_raw: Vec<T> = raw
        .iter()
        .zip(d_image)
        .map(|(&r, &g)| if r >= T::zero() && r <= T::one() { g } else { T::zero() })
        .collect();
    let mut d_coords = vec![[T::zero(); 2]; n];
    let mut d_probs = vec![T::zero(); n * n];
    let scale = pixel_per_norm::<T>(size);
    for i in 0..n {
        for j in i + 1..n {
            let p = probs[i * n + j];
            let Some(s) = stroke(coords[i], coords[j], bank, cfg) else {
                continue;
            };
            let (d, len) = (s.d, s.len);
            let len2 = len * len;
            let mut dp = T::zero();
            let mut dr_acc = [T::zero(); 2];
            let mut dd_acc = [T::zero(); 2];
            for y in s.window[2]..=s.window[3] {
                for x in s.window[0]..=s.window[1] {
                    let g = d_raw[y * size + x];
                    if g == T::zero() {
                        continue;
                    }
                    let r = [T::from(x).unwrap() - s.a[0], T::from(y).unwrap() - s.a[1]];
                    let (qx, qy, dot, cross) = to_template(r, d, len, lt, anchor, normal_scale);
                    let (v, dvdqx, dvdqy) = bilinear(&tpl, bank.height, bank.width, qx, qy);
                    dp = dp + g * v;
                    let gx = g * p * dvdqx;
                    let gy = g * p * dvdqy;
                    if gx == T::zero() && gy == T::zero() {
                        continue;
                    }
                    // qx = A + lt (r·d) / |d|²
                    let k = lt / len2;
                    let dqx_dr = [k * d[0], k * d[1]];
                    let dqx_dd = [
                        k * (r[0] - two * dot * d[0] / len2),
                        k * (r[1] - two * dot * d[1] / len2),
                    ];
                    // qy = A + (d × r) / (s |d|)
                    let m = T::one() / (normal_scale * len);
                    let dqy_dr = [-d[1] * m, d[0] * m];
                    let dqy_dd = [r[1] * m - cross * d[0] * m / len2, -r[0] * m - cross * d[1] * m / len2];
                    for c in 0..2 {
                        dr_acc[c] = dr_acc[c] + gx * dqx_dr[c] + gy * dqy_dr[c];
                        dd_acc[c] = dd_acc[c] + gx * dqx_dd[c] + gy * dqy_dd[c];
                    }
                }
            }
            d_probs[i * n + j] = d_probs[i * n + j] + dp;
            for c in 0..2 {
                // r = p - a, d = b - a
                d_coords[i][c] = d_coords[i][c] - (dr_acc[c] + dd_acc[c]) * scale;
                d_coords[j][c] = d_coords[j][c] + dd_acc[c] * scale;
            }
        }
    }
    (d_coords, d_probs)
}
