//! Coordinate conventions shared by the rasterizer, DSNT, ROI boxes and the
//! drawing module.
//!
//! Pixel `j` has its center at pixel coordinate `j` and covers
//! `[j - 0.5, j + 0.5]`. Normalized coordinates span `[-1, 1]` across the
//! whole raster, so the center of pixel `j` in a raster of width `W` sits at
//! `(2j + 1) / W - 1`.

use num_traits::Float;

#[inline]
pub fn pixel_to_norm<T: Float>(pixel: T, size: usize) -> T {
    let two = T::one() + T::one();
    (two * pixel + T::one()) / T::from(size).unwrap() - T::one()
}

#[inline]
pub fn norm_to_pixel<T: Float>(norm: T, size: usize) -> T {
    let two = T::one() + T::one();
    ((norm + T::one()) * T::from(size).unwrap() - T::one()) / two
}

/// d(pixel)/d(norm).
#[inline]
pub fn pixel_per_norm<T: Float>(size: usize) -> T {
    T::from(size).unwrap() / (T::one() + T::one())
}
