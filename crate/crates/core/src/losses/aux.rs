//! Penalty on attention channels that pile onto the same cells.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// `mean_cells(ReLU(Σ_c m_c / max(m_c) - 1)²)` over `channels` maps stored
/// back to back in `maps`.
pub fn overlap_penalty<T: Float>(maps: &[T], channels: usize) -> Result<T> {
    Ok(overlap_penalty_with_grad(maps, channels, false)?.0)
}

pub fn overlap_penalty_with_grad<T: Float>(maps: &[T], channels: usize, with_grad: bool) -> Result<(T, Vec<T>)> {
    let cells = maps.len() / channels;
    let mut peaks = Vec::with_capacity(channels);
    for (c, m) in maps.chunks_exact(cells).enumerate() {
        let (arg, max) = m.iter().enumerate().fold(
            (0, T::neg_infinity()),
            |(ai, av), (i, &v)| if v > av { (i, v) } else { (ai, av) },
        );
        if !(max > T::zero()) {
            return Err(Error::EmptyChannel { channel: c });
        }
        peaks.push((arg, max));
    }
    let mut excess = vec![T::zero(); cells];
    for (m, &(_, max)) in maps.chunks_exact(cells).zip(&peaks) {
        for (e, &v) in excess.iter_mut().zip(m) {
            *e = *e + v / max;
        }
    }
    let n = T::from(cells).unwrap();
    let mut total = T::zero();
    for e in excess.iter_mut() {
        *e = (*e - T::one()).max(T::zero());
        total = total + *e * *e;
    }
    let value = total / n;
    if !with_grad {
        return Ok((value, Vec::new()));
    }
    // d/d(normalized cell) = 2 ReLU(S - 1) / cells
    let two = T::from(2.0).unwrap();
    let g_norm: Vec<T> = excess.iter().map(|&e| two * e / n).collect();
    let mut grad = vec![T::zero(); maps.len()];
    for (c, (m, &(arg, max))) in maps.chunks_exact(cells).zip(&peaks).enumerate() {
        let gc = &mut grad[c * cells..(c + 1) * cells];
        let mut through_max = T::zero();
        for i in 0..cells {
            gc[i] = g_norm[i] / max;
            through_max = through_max + g_norm[i] * m[i];
        }
        gc[arg] = gc[arg] - through_max / (max * max);
    }
    Ok((value, grad))
}

/// Applies the penalty only to samples that reconstruct worse than the
/// batch mean (strictly below).
pub fn aux_loss<T: Float>(maps: &[T], channels: usize, similarity: T, batch_mean: T) -> Result<T> {
    if similarity < batch_mean {
        overlap_penalty(maps, channels)
    } else {
        Ok(T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_one_hot_channels_on_two_by_two() {
        let maps = [1.0f64, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        // Σ = 2 at the shared cell: (2 - 1)² / 4 cells
        assert_eq!(overlap_penalty(&maps, 2).unwrap(), 0.25);
    }

    #[test]
    fn disjoint_peaks_cost_nothing() {
        let maps = [1.0f64, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(overlap_penalty(&maps, 3).unwrap(), 0.0);
    }

    #[test]
    fn condition_is_strict() {
        let maps = [1.0f64, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        assert_eq!(aux_loss(&maps, 2, 0.7, 0.7).unwrap(), 0.0);
        assert_eq!(aux_loss(&maps, 2, 0.8, 0.7).unwrap(), 0.0);
        assert_eq!(aux_loss(&maps, 2, 0.6, 0.7).unwrap(), 0.25);
    }

    #[test]
    fn empty_channel_is_a_contract_violation() {
        let maps = [0.5f64, 0.5, 0.0, 0.0];
        assert_eq!(overlap_penalty(&maps, 2), Err(Error::EmptyChannel { channel: 1 }));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let maps = [0.4f64, 0.3, 0.2, 0.1, 0.35, 0.25, 0.3, 0.1, 0.05, 0.5, 0.3, 0.15];
        let (_, g) = overlap_penalty_with_grad(&maps, 3, true).unwrap();
        let eps = 1e-7;
        for i in 0..maps.len() {
            let mut p = maps;
            p[i] += eps;
            let mut m = maps;
            m[i] -= eps;
            let fd = (overlap_penalty(&p, 3).unwrap() - overlap_penalty(&m, 3).unwrap()) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-6, "{i}: {fd} vs {}", g[i]);
        }
    }
}
