//! Pairwise edge ROIs: every ordered node pair spans an axis-aligned box that
//! is resampled from the input image to a fixed-size patch.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::coords::{norm_to_pixel, pixel_per_norm};
use crate::sampling::{bilinear, bilinear_scatter};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiConfig {
    /// Patch side in samples.
    pub size: usize,
    /// Boxes narrower than this (in image pixels) are widened about their center.
    pub min_side: f64,
}

impl Default for RoiConfig {
    fn default() -> Self {
        RoiConfig {
            size: 16,
            min_side: 8.0,
        }
    }
}

/// Box extent along one axis with derivatives of `(lo, hi)` with respect to
/// the two endpoint coordinates.
#[derive(Debug, Clone, Copy)]
struct Extent<T> {
    lo: T,
    hi: T,
    /// `[dlo/da, dlo/db, dhi/da, dhi/db]`
    jac: [T; 4],
}

fn extent<T: Float>(a: T, b: T, min_side: T) -> Extent<T> {
    let (one, zero, half) = (T::one(), T::zero(), T::from(0.5).unwrap());
    let (lo, hi, jac) = if a <= b {
        (a, b, [one, zero, zero, one])
    } else {
        (b, a, [zero, one, one, zero])
    };
    if hi - lo >= min_side {
        return Extent { lo, hi, jac };
    }
    let c = (a + b) * half;
    Extent {
        lo: c - min_side * half,
        hi: c + min_side * half,
        jac: [half, half, half, half],
    }
}

/// Resamples one box. Sample `k` along an axis sits at
/// `lo + (k + 1/2) / size * (hi - lo)`.
fn sample_box<T: Float>(image: &[T], h: usize, w: usize, ex: &Extent<T>, ey: &Extent<T>, size: usize, out: &mut [T]) {
    let n = T::from(size).unwrap();
    for r in 0..size {
        let ty = (T::from(r).unwrap() + T::from(0.5).unwrap()) / n;
        let y = ey.lo + ty * (ey.hi - ey.lo);
        for c in 0..size {
            let tx = (T::from(c).unwrap() + T::from(0.5).unwrap()) / n;
            let x = ex.lo + tx * (ex.hi - ex.lo);
            out[r * size + c] = bilinear(image, h, w, x, y).0;
        }
    }
}

/// Patches for all `n²` ordered pairs of normalized node coordinates, laid
/// out pair-major (`i * n + j`), each `size x size`.
pub fn build_edge_rois<T: Float>(coords: &[[T; 2]], image: &[T], image_size: usize, cfg: &RoiConfig) -> Vec<T> {
    let n = coords.len();
    let s2 = cfg.size * cfg.size;
    let mut patches = vec![T::zero(); n * n * s2];
    let min_side = T::from(cfg.min_side).unwrap();
    for i in 0..n {
        for j in 0..n {
            let (ex, ey) = pair_extents(coords[i], coords[j], image_size, min_side);
            let out = &mut patches[(i * n + j) * s2..(i * n + j + 1) * s2];
            sample_box(image, image_size, image_size, &ex, &ey, cfg.size, out);
        }
    }
    patches
}

fn pair_extents<T: Float>(a: [T; 2], b: [T; 2], size: usize, min_side: T) -> (Extent<T>, Extent<T>) {
    let ax = norm_to_pixel(a[0], size);
    let ay = norm_to_pixel(a[1], size);
    let bx = norm_to_pixel(b[0], size);
    let by = norm_to_pixel(b[1], size);
    (extent(ax, bx, min_side), extent(ay, by, min_side))
}

/// Accumulates gradients of the patches into `d_coords` (normalized) and,
/// when given, into `d_image`.
pub fn build_edge_rois_backward<T: Float>(
    coords: &[[T; 2]],
    image: &[T],
    image_size: usize,
    cfg: &RoiConfig,
    d_patches: &[T],
    d_coords: &mut [[T; 2]],
    mut d_image: Option<&mut [T]>,
) {
    let n = coords.len();
    let s2 = cfg.size * cfg.size;
    let size = T::from(cfg.size).unwrap();
    let half = T::from(0.5).unwrap();
    let min_side = T::from(cfg.min_side).unwrap();
    let scale = pixel_per_norm::<T>(image_size);
    for i in 0..n {
        for j in 0..n {
            let (ex, ey) = pair_extents(coords[i], coords[j], image_size, min_side);
            let g = &d_patches[(i * n + j) * s2..(i * n + j + 1) * s2];
            // gradient w.r.t. (x_lo, x_hi, y_lo, y_hi)
            let (mut dxl, mut dxh, mut dyl, mut dyh) = (T::zero(), T::zero(), T::zero(), T::zero());
            for r in 0..cfg.size {
                let ty = (T::from(r).unwrap() + half) / size;
                let y = ey.lo + ty * (ey.hi - ey.lo);
                for c in 0..cfg.size {
                    let gv = g[r * cfg.size + c];
                    if gv == T::zero() {
                        continue;
                    }
                    let tx = (T::from(c).unwrap() + half) / size;
                    let x = ex.lo + tx * (ex.hi - ex.lo);
                    let (_, dvdx, dvdy) = bilinear(image, image_size, image_size, x, y);
                    dxl = dxl + gv * dvdx * (T::one() - tx);
                    dxh = dxh + gv * dvdx * tx;
                    dyl = dyl + gv * dvdy * (T::one() - ty);
                    dyh = dyh + gv * dvdy * ty;
                    if let Some(di) = d_image.as_deref_mut() {
                        bilinear_scatter(di, image_size, image_size, x, y, gv);
                    }
                }
            }
            let dax = dxl * ex.jac[0] + dxh * ex.jac[2];
            let dbx = dxl * ex.jac[1] + dxh * ex.jac[3];
            let day = dyl * ey.jac[0] + dyh * ey.jac[2];
            let dby = dyl * ey.jac[1] + dyh * ey.jac[3];
            d_coords[i][0] = d_coords[i][0] + dax * scale;
            d_coords[i][1] = d_coords[i][1] + day * scale;
            d_coords[j][0] = d_coords[j][0] + dbx * scale;
            d_coords[j][1] = d_coords[j][1] + dby * scale;
        }
    }
}
