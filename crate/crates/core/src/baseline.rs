//! Supervision for the fully supervised counterpart: Gaussian node heatmaps
//! for the attention branch and an order-aligned adjacency target for the
//! edge classifier.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{shape_err, Result};

/// Heatmap-cell position of a pixel coordinate when `image_size` pixels are
/// pooled into `map_size` cells.
pub fn pixel_to_cell(pixel: f64, image_size: usize, map_size: usize) -> f64 {
    (pixel + 0.5) * map_size as f64 / image_size as f64 - 0.5
}

/// Sum of unit-peak Gaussians (std `sigma` cells), one per node, on a
/// `map_size²` grid.
pub fn gt_heatmap(coords_px: &[[f64; 2]], image_size: usize, map_size: usize, sigma: f64) -> Vec<f64> {
    let centers: Vec<[f64; 2]> = coords_px
        .iter()
        .map(|c| {
            [
                pixel_to_cell(c[0], image_size, map_size),
                pixel_to_cell(c[1], image_size, map_size),
            ]
        })
        .collect();
    let mut map = vec![0.0; map_size * map_size];
    for y in 0..map_size {
        for x in 0..map_size {
            map[y * map_size + x] = centers
                .iter()
                .map(|c| {
                    let (dx, dy) = (x as f64 - c[0], y as f64 - c[1]);
                    Float::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
                })
                .sum();
        }
    }
    map
}

/// MSE between the channel sum of max-normalized attention maps and the
/// target heatmap, with its gradient w.r.t. the maps.
pub fn node_loss_with_grad<T: Float>(maps: &[T], channels: usize, gt: &[T]) -> Result<(T, Vec<T>)> {
    let cells = gt.len();
    if maps.len() != channels * cells {
        return Err(shape_err(channels * cells, maps.len()));
    }
    let peaks: Vec<(usize, T)> = maps
        .chunks_exact(cells)
        .map(|m| {
            m.iter().enumerate().fold(
                (0, T::neg_infinity()),
                |(ai, av), (i, &v)| if v > av { (i, v) } else { (ai, av) },
            )
        })
        .collect();
    let mut sum = vec![T::zero(); cells];
    for (m, &(_, max)) in maps.chunks_exact(cells).zip(&peaks) {
        let inv = if max > T::zero() { T::one() / max } else { T::zero() };
        for (s, &v) in sum.iter_mut().zip(m) {
            *s = *s + v * inv;
        }
    }
    let n = T::from(cells).unwrap();
    let two = T::from(2.0).unwrap();
    let resid: Vec<T> = sum.iter().zip(gt).map(|(&s, &g)| s - g).collect();
    let loss = resid.iter().fold(T::zero(), |acc, &r| acc + r * r) / n;
    let g_sum: Vec<T> = resid.iter().map(|&r| two * r / n).collect();
    let mut grad = vec![T::zero(); maps.len()];
    for (c, (m, &(arg, max))) in maps.chunks_exact(cells).zip(&peaks).enumerate() {
        if !(max > T::zero()) {
            continue;
        }
        let gc = &mut grad[c * cells..(c + 1) * cells];
        let mut through_max = T::zero();
        for i in 0..cells {
            gc[i] = g_sum[i] / max;
            through_max = through_max + g_sum[i] * m[i];
        }
        gc[arg] = gc[arg] - through_max / (max * max);
    }
    Ok((loss, grad))
}

pub fn node_loss<T: Float>(maps: &[T], channels: usize, gt: &[T]) -> Result<T> {
    Ok(node_loss_with_grad(maps, channels, gt)?.0)
}

/// Ground-truth adjacency re-expressed in predicted slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// For each predicted slot, the ground-truth node assigned to it.
    pub slot_to_gt: Vec<Option<usize>>,
    /// Row-major `n_max²` 0/1 targets.
    pub adjacency: Vec<f32>,
    /// Row-major `n_max²`; true where both slots carry a ground-truth node.
    pub mask: Vec<bool>,
}

/// Minimum-cost injection of ground-truth nodes (rows) into predicted slots
/// (columns) by Euclidean distance; returns the slot of every gt node.
pub fn assign_nodes(pred: &[[f64; 2]], gt: &[[f64; 2]]) -> Vec<usize> {
    let cost: Vec<Vec<f64>> = gt
        .iter()
        .map(|g| {
            pred.iter()
                .map(|p| Float::sqrt((p[0] - g[0]) * (p[0] - g[0]) + (p[1] - g[1]) * (p[1] - g[1])))
                .collect()
        })
        .collect();
    if pred.len() <= 4 {
        exhaustive_assignment(&cost, pred.len())
    } else {
        hungarian(&cost, pred.len())
    }
}

/// Tries every injection; fine for four slots (at most 24 candidates).
pub fn exhaustive_assignment(cost: &[Vec<f64>], slots: usize) -> Vec<usize> {
    fn go(
        row: usize,
        cost: &[Vec<f64>],
        used: &mut [bool],
        cur: &mut Vec<usize>,
        acc: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if row == cost.len() {
            if acc < best.0 {
                *best = (acc, cur.clone());
            }
            return;
        }
        for s in 0..used.len() {
            if !used[s] {
                used[s] = true;
                cur.push(s);
                go(row + 1, cost, used, cur, acc + cost[row][s], best);
                cur.pop();
                used[s] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    go(0, cost, &mut vec![false; slots], &mut Vec::new(), 0.0, &mut best);
    best.1
}

/// Hungarian algorithm with potentials for `rows <= cols`.
pub fn hungarian(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let rows = cost.len();
    // 1-based arrays; column 0 is the virtual start
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Assigns gt nodes to predicted slots (both in normalized coordinates) and
/// permutes the gt adjacency into slot order.
pub fn align_adjacency(pred_coords: &[[f32; 2]], gt_coords: &[[f64; 2]], gt_adjacency: &[Vec<u8>]) -> Alignment {
    let n = pred_coords.len();
    let pred: Vec<[f64; 2]> = pred_coords.iter().map(|c| [c[0] as f64, c[1] as f64]).collect();
    let slots = assign_nodes(&pred, gt_coords);
    let mut slot_to_gt = vec![None; n];
    for (g, &s) in slots.iter().enumerate() {
        slot_to_gt[s] = Some(g);
    }
    let mut adjacency = vec![0.0f32; n * n];
    let mut mask = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            if let (true, Some(a), Some(b)) = (i != j, slot_to_gt[i], slot_to_gt[j]) {
                mask[i * n + j] = true;
                adjacency[i * n + j] = gt_adjacency[a][b] as f32;
            }
        }
    }
    Alignment {
        slot_to_gt,
        adjacency,
        mask,
    }
}

pub const BCE_EPS: f64 = 1e-7;

/// Masked binary cross-entropy averaged over valid pairs `i < j`, with the
/// gradient placed on the upper-triangle entries of `probs`.
pub fn edge_loss_with_grad(probs: &[f32], n: usize, target: &[f32], mask: &[bool]) -> (f64, Vec<f32>) {
    let mut grad = vec![0.0f32; probs.len()];
    let valid: Vec<usize> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| i * n + j))
        .filter(|&k| mask[k])
        .collect();
    if valid.is_empty() {
        return (0.0, grad);
    }
    let count = valid.len() as f64;
    let mut loss = 0.0;
    for &k in &valid {
        let raw = probs[k] as f64;
        let p = raw.clamp(BCE_EPS, 1.0 - BCE_EPS);
        let y = target[k] as f64;
        loss -= y * Float::ln(p) + (1.0 - y) * Float::ln(1.0 - p);
        if raw == p {
            grad[k] = ((-y / p + (1.0 - y) / (1.0 - p)) / count) as f32;
        }
    }
    (loss / count, grad)
}

pub fn edge_loss(probs: &[f32], n: usize, target: &[f32], mask: &[bool]) -> f64 {
    edge_loss_with_grad(probs, n, target, mask).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_centered_node_peaks_at_one() {
        // pixel 62 → cell (62.5 / 4) - 0.5 = 15.125; pixel 61.5 → 15.0
        let m = gt_heatmap(&[[61.5, 61.5]], 128, 32, 1.5);
        let arg = (0..m.len()).max_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();
        assert_eq!(arg, 15 * 32 + 15);
        assert!((m[arg] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjacent_nodes_add_analytically() {
        // cells 10 and 11 on row 10
        let px = |c: f64| (c + 0.5) * 4.0 - 0.5;
        let m = gt_heatmap(&[[px(10.0), px(10.0)], [px(11.0), px(10.0)]], 128, 32, 1.5);
        let expected = 1.0 + (-1.0f64 / (2.0 * 2.25)).exp();
        assert!((m[10 * 32 + 10] - expected).abs() < 1e-12);
        assert!((m[10 * 32 + 11] - expected).abs() < 1e-12);
    }

    #[test]
    fn uniform_attention_against_two_peaks() {
        // 4x4 fixture: uniform maps normalize to all ones, summed over 2 channels = 2
        let maps = [1.0f64 / 16.0; 32];
        let mut gt = [0.0f64; 16];
        gt[0] = 1.0;
        gt[15] = 1.0;
        let expected = (2.0 * 1.0 + 14.0 * 4.0) / 16.0;
        assert!((node_loss(&maps, 2, &gt).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn node_loss_gradient_matches_central_differences() {
        let maps = [0.1f64, 0.4, 0.2, 0.3, 0.25, 0.25, 0.45, 0.05];
        let gt = [0.0, 1.0, 0.5, 0.2];
        let (_, g) = node_loss_with_grad(&maps, 2, &gt).unwrap();
        for i in 0..maps.len() {
            let (mut p, mut m) = (maps, maps);
            p[i] += 1e-7;
            m[i] -= 1e-7;
            let fd = (node_loss(&p, 2, &gt).unwrap() - node_loss(&m, 2, &gt).unwrap()) / 2e-7;
            assert!((fd - g[i]).abs() < 1e-6);
        }
    }

    #[test]
    #[allow(clippy::erasing_op, clippy::identity_op)]
    fn permuted_prediction_is_recovered() {
        let gt = [[-0.5, -0.5], [0.5, -0.5], [0.0, 0.5]];
        let adj = vec![vec![0, 1, 0], vec![1, 0, 1], vec![0, 1, 0]];
        let pred = [[0.5f32, -0.5], [0.9, 0.9], [0.0, 0.5], [-0.5, -0.5]];
        let a = align_adjacency(&pred, &gt, &adj);
        assert_eq!(a.slot_to_gt, vec![Some(1), None, Some(2), Some(0)]);
        assert_eq!(a.adjacency[0 * 4 + 2], 1.0);
        assert_eq!(a.adjacency[0 * 4 + 3], 1.0);
        assert_eq!(a.adjacency[2 * 4 + 3], 0.0);
        assert!(!a.mask[1 * 4 + 0] && a.mask[3 * 4 + 2] && !a.mask[0]);
    }

    #[test]
    fn single_node_masks_everything() {
        let a = align_adjacency(&[[0.0f32, 0.0]; 4], &[[0.1, 0.1]], &[vec![0]]);
        assert_eq!(a.slot_to_gt.iter().flatten().count(), 1);
        assert!(a.mask.iter().all(|m| !m));
        assert_eq!(edge_loss(&[0.3; 16], 4, &a.adjacency, &a.mask), 0.0);
    }

    #[test]
    fn bce_fixtures() {
        let mask = [false, true, true, false];
        let target = [0.0, 1.0, 1.0, 0.0];
        assert!((edge_loss(&[0.0, 0.5, 0.5, 0.0], 2, &target, &mask) - 2f64.ln()).abs() < 1e-12);
        // one valid pair i<j: (0,1) with p = 0.8, y = 1
        let l = edge_loss(&[0.0, 0.8, 0.8, 0.0], 2, &target, &mask);
        assert!((l + (0.8f32 as f64).ln()).abs() < 1e-12);
        let exact = edge_loss(&[0.0, 1.0, 1.0, 0.0], 2, &target, &mask);
        assert!(exact < 1e-6);
        // 3 slots, pairs (0,1) y=1 p=0.9 and (1,2) y=0 p=0.2; (0,2) masked
        let mut m3 = [false; 9];
        m3[1] = true;
        m3[5] = true;
        let mut t3 = [0.0f32; 9];
        t3[1] = 1.0;
        let mut p3 = [0.5f32; 9];
        p3[1] = 0.9;
        p3[5] = 0.2;
        let expected = -((0.9f32 as f64).ln() + (1.0 - 0.2f32 as f64).ln()) / 2.0;
        assert!((edge_loss(&p3, 3, &t3, &m3) - expected).abs() < 1e-12);
    }

    #[test]
    fn hungarian_handles_rectangular_costs() {
        let cost = vec![
            vec![4.0, 1.0, 3.0, 9.0, 2.0],
            vec![2.0, 0.0, 5.0, 9.0, 9.0],
            vec![3.0, 2.0, 2.0, 9.0, 9.0],
        ];
        let a = hungarian(&cost, 5);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 4.0);
        let e = exhaustive_assignment(&cost, 5);
        assert_eq!(e.iter().enumerate().map(|(r, &c)| cost[r][c]).sum::<f64>(), 4.0);
    }
}
