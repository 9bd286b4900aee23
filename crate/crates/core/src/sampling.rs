//! Bilinear sampling of single-channel rasters with zero padding, plus the
//! derivative of the sample with respect to its position.

use num_traits::Float;

/// Value at continuous pixel position `(x, y)` together with `dv/dx` and
/// `dv/dy`. Pixel centers sit on integer coordinates.
#[inline]
pub fn bilinear<T: Float>(img: &[T], h: usize, w: usize, x: T, y: T) -> (T, T, T) {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (ix, iy) = (
        x0.to_isize().unwrap_or(isize::MIN / 2),
        y0.to_isize().unwrap_or(isize::MIN / 2),
    );
    let at = |xx: isize, yy: isize| -> T {
        if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
            T::zero()
        } else {
            img[yy as usize * w + xx as usize]
        }
    };
    let v00 = at(ix, iy);
    let v10 = at(ix + 1, iy);
    let v01 = at(ix, iy + 1);
    let v11 = at(ix + 1, iy + 1);
    let one = T::one();
    let top = v00 + (v10 - v00) * fx;
    let bottom = v01 + (v11 - v01) * fx;
    let value = top + (bottom - top) * fy;
    let dx = (one - fy) * (v10 - v00) + fy * (v11 - v01);
    let dy = bottom - top;
    (value, dx, dy)
}

/// Adds `g` times the bilinear weights at `(x, y)` into `grad`.
#[inline]
pub fn bilinear_scatter<T: Float>(grad: &mut [T], h: usize, w: usize, x: T, y: T, g: T) {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (ix, iy) = (
        x0.to_isize().unwrap_or(isize::MIN / 2),
        y0.to_isize().unwrap_or(isize::MIN / 2),
    );
    let one = T::one();
    for (dx, dy, wgt) in [
        (0, 0, (one - fx) * (one - fy)),
        (1, 0, fx * (one - fy)),
        (0, 1, (one - fx) * fy),
        (1, 1, fx * fy),
    ] {
        let (xx, yy) = (ix + dx, iy + dy);
        if xx >= 0 && yy >= 0 && xx < w as isize && yy < h as isize {
            let idx = yy as usize * w + xx as usize;
            grad[idx] = grad[idx] + g * wgt;
        }
    }
}
