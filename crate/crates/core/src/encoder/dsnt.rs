//! Spatial softmax and the differentiable spatial-to-numerical transform.

use alloc::vec::Vec;

use num_traits::Float;

/// Softmax over every cell of one attention channel.
pub fn spatial_softmax<T: Float>(logits: &[T], temperature: T, out: &mut [T]) {
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let mut sum = T::zero();
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = ((l - max) / temperature).exp();
        sum = sum + *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

/// Gradient with respect to the logits given `d_probs`.
pub fn spatial_softmax_backward<T: Float>(probs: &[T], d_probs: &[T], temperature: T, d_logits: &mut [T]) {
    let dot = probs.iter().zip(d_probs).fold(T::zero(), |acc, (&p, &g)| acc + p * g);
    for ((d, &p), &g) in d_logits.iter_mut().zip(probs).zip(d_probs) {
        *d = p * (g - dot) / temperature;
    }
}

/// Pixel-center coordinates along one axis: `(2j + 1) / size - 1`.
pub fn coordinate_template<T: Float>(size: usize) -> Vec<T> {
    (0..size)
        .map(|j| crate::coords::pixel_to_norm(T::from(j).unwrap(), size))
        .collect()
}

/// Expected `(x, y)` of a normalized `h x w` probability map.
pub fn dsnt<T: Float>(probs: &[T], h: usize, w: usize) -> [T; 2] {
    let xs = coordinate_template::<T>(w);
    let ys = coordinate_template::<T>(h);
    let (mut x, mut y) = (T::zero(), T::zero());
    for (r, row) in probs.chunks_exact(w).enumerate() {
        let mut row_mass = T::zero();
        for (c, &p) in row.iter().enumerate() {
            x = x + p * xs[c];
            row_mass = row_mass + p;
        }
        y = y + row_mass * ys[r];
    }
    [x, y]
}

/// Accumulates `d_coord · ∂coord/∂p` into `d_probs`.
pub fn dsnt_backward<T: Float>(h: usize, w: usize, d_coord: [T; 2], d_probs: &mut [T]) {
    let xs = coordinate_template::<T>(w);
    let ys = coordinate_template::<T>(h);
    for (r, row) in d_probs.chunks_exact_mut(w).enumerate() {
        for (c, d) in row.iter_mut().enumerate() {
            *d = *d + d_coord[0] * xs[c] + d_coord[1] * ys[r];
        }
    }
}
