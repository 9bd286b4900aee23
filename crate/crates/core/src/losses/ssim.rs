//! SSIM and multi-scale SSIM with gradients with respect to the first image.
//!
//! Gaussian window (valid filtering, no padding), constants
//! `C1 = (0.01 L)²` and `C2 = (0.03 L)²` with dynamic range `L = 1`.
//! Multi-scale SSIM halves both images with 2x2 average pooling between
//! scales, takes the mean contrast-structure term at every scale but the
//! last and the full SSIM at the last, and combines them as a weighted
//! geometric mean (negative terms clipped to zero).

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{shape_err, Error, Result};

/// Standard five-scale weights; shorter pyramids use a renormalized prefix.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

pub fn scale_weights(scales: usize) -> Vec<f64> {
    let w = &MS_SSIM_WEIGHTS[..scales.min(MS_SSIM_WEIGHTS.len())];
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

fn gaussian<T: Float>(cfg: &SsimConfig) -> Vec<T> {
    let half = (cfg.window as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..cfg.window)
        .map(|i| {
            let x = i as f64 - half;
            Float::exp(-x * x / (2.0 * cfg.sigma * cfg.sigma))
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| T::from(v / total).unwrap()).collect()
}

/// Separable valid filtering: `h x w` → `(h - k + 1) x (w - k + 1)`.
fn filter_valid<T: Float>(img: &[T], h: usize, w: usize, k: &[T]) -> Vec<T> {
    let (oh, ow) = (h + 1 - k.len(), w + 1 - k.len());
    let mut tmp = vec![T::zero(); h * ow];
    for y in 0..h {
        let row = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..]).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
    }
    let mut out = vec![T::zero(); oh * ow];
    for y in 0..oh {
        for (t, &kt) in k.iter().enumerate() {
            let src = &tmp[(y + t) * ow..(y + t + 1) * ow];
            for (o, &s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o = *o + kt * s;
            }
        }
    }
    out
}

/// Adjoint of [`filter_valid`].
fn filter_valid_adjoint<T: Float>(g: &[T], h: usize, w: usize, k: &[T]) -> Vec<T> {
    let (oh, ow) = (h + 1 - k.len(), w + 1 - k.len());
    let mut tmp = vec![T::zero(); h * ow];
    for y in 0..oh {
        for (t, &kt) in k.iter().enumerate() {
            let dst = &mut tmp[(y + t) * ow..(y + t + 1) * ow];
            for (d, &s) in dst.iter_mut().zip(&g[y * ow..(y + 1) * ow]) {
                *d = *d + kt * s;
            }
        }
    }
    let mut out = vec![T::zero(); h * w];
    for y in 0..h {
        for x in 0..ow {
            let v = tmp[y * ow + x];
            for (t, &kt) in k.iter().enumerate() {
                out[y * w + x + t] = out[y * w + x + t] + kt * v;
            }
        }
    }
    out
}

fn avg_pool2<T: Float>(img: &[T], h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let q = T::from(0.25).unwrap();
    let mut out = vec![T::zero(); oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out[y * ow + x] = (img[i] + img[i + 1] + img[i + w] + img[i + w + 1]) * q;
        }
    }
    out
}

fn avg_pool2_adjoint<T: Float>(g: &[T], h: usize, w: usize) -> Vec<T> {
    let ow = w / 2;
    let q = T::from(0.25).unwrap();
    let mut out = vec![T::zero(); h * w];
    for y in 0..(h / 2) * 2 {
        for x in 0..ow * 2 {
            out[y * w + x] = g[(y / 2) * ow + x / 2] * q;
        }
    }
    out
}

/// Local statistics and means of one SSIM evaluation.
struct Parts<T> {
    h: usize,
    w: usize,
    mu_a: Vec<T>,
    mu_b: Vec<T>,
    e_aa: Vec<T>,
    e_bb: Vec<T>,
    e_ab: Vec<T>,
    ssim: T,
    cs: T,
}

fn parts<T: Float>(a: &[T], b: &[T], h: usize, w: usize, cfg: &SsimConfig, k: &[T]) -> Parts<T> {
    let sq = |x: &[T], y: &[T]| -> Vec<T> { x.iter().zip(y).map(|(&p, &q)| p * q).collect() };
    let mu_a = filter_valid(a, h, w, k);
    let mu_b = filter_valid(b, h, w, k);
    let e_aa = filter_valid(&sq(a, a), h, w, k);
    let e_bb = filter_valid(&sq(b, b), h, w, k);
    let e_ab = filter_valid(&sq(a, b), h, w, k);
    let c1 = T::from(cfg.k1 * cfg.k1).unwrap();
    let c2 = T::from(cfg.k2 * cfg.k2).unwrap();
    let two = T::from(2.0).unwrap();
    let (mut ssim, mut cs) = (T::zero(), T::zero());
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let l = (two * ma * mb + c1) / (ma * ma + mb * mb + c1);
        let s_ab = e_ab[i] - ma * mb;
        let c = (two * s_ab + c2) / (e_aa[i] - ma * ma + e_bb[i] - mb * mb + c2);
        ssim = ssim + l * c;
        cs = cs + c;
    }
    let count = T::from(mu_a.len()).unwrap();
    Parts {
        h,
        w,
        mu_a,
        mu_b,
        e_aa,
        e_bb,
        e_ab,
        ssim: ssim / count,
        cs: cs / count,
    }
}

/// Gradient w.r.t. `a` of `coef_ssim * mean(ssim map) + coef_cs * mean(cs map)`.
fn parts_grad<T: Float>(p: &Parts<T>, a: &[T], b: &[T], cfg: &SsimConfig, k: &[T], coef_ssim: T, coef_cs: T) -> Vec<T> {
    let c1 = T::from(cfg.k1 * cfg.k1).unwrap();
    let c2 = T::from(cfg.k2 * cfg.k2).unwrap();
    let two = T::from(2.0).unwrap();
    let count = T::from(p.mu_a.len()).unwrap();
    let (cs_w, ss_w) = (coef_cs / count, coef_ssim / count);
    let n = p.mu_a.len();
    let (mut g_mu, mut g_aa, mut g_ab) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    for i in 0..n {
        let (ma, mb) = (p.mu_a[i], p.mu_b[i]);
        let a1 = two * ma * mb + c1;
        let b1 = ma * ma + mb * mb + c1;
        let a2 = two * (p.e_ab[i] - ma * mb) + c2;
        let b2 = p.e_aa[i] - ma * ma + p.e_bb[i] - mb * mb + c2;
        let l = a1 / b1;
        let cs = a2 / b2;
        let dl_dmu = two * mb / b1 - a1 * two * ma / (b1 * b1);
        let dcs_dmu = -two * mb / b2 + two * ma * a2 / (b2 * b2);
        let dcs_daa = -a2 / (b2 * b2);
        let dcs_dab = two / b2;
        g_mu[i] = ss_w * (cs * dl_dmu + l * dcs_dmu) + cs_w * dcs_dmu;
        g_aa[i] = ss_w * l * dcs_daa + cs_w * dcs_daa;
        g_ab[i] = ss_w * l * dcs_dab + cs_w * dcs_dab;
    }
    let (h, w) = (p.h, p.w);
    let t_mu = filter_valid_adjoint(&g_mu, h, w, k);
    let t_aa = filter_valid_adjoint(&g_aa, h, w, k);
    let t_ab = filter_valid_adjoint(&g_ab, h, w, k);
    (0..h * w)
        .map(|i| t_mu[i] + two * a[i] * t_aa[i] + b[i] * t_ab[i])
        .collect()
}

fn check(a_len: usize, b_len: usize, h: usize, w: usize, window: usize) -> Result<()> {
    if a_len != h * w || b_len != h * w {
        return Err(shape_err([h, w], [a_len, b_len]));
    }
    if h.min(w) < window {
        return Err(Error::ImageTooSmall { size: h.min(w), window });
    }
    Ok(())
}

pub fn ssim<T: Float>(a: &[T], b: &[T], h: usize, w: usize, cfg: &SsimConfig) -> Result<T> {
    check(a.len(), b.len(), h, w, cfg.window)?;
    Ok(parts(a, b, h, w, cfg, &gaussian(cfg)).ssim)
}

pub fn ssim_with_grad<T: Float>(a: &[T], b: &[T], h: usize, w: usize, cfg: &SsimConfig) -> Result<(T, Vec<T>)> {
    check(a.len(), b.len(), h, w, cfg.window)?;
    let k = gaussian(cfg);
    let p = parts(a, b, h, w, cfg, &k);
    let g = parts_grad(&p, a, b, cfg, &k, T::one(), T::zero());
    Ok((p.ssim, g))
}

pub fn ms_ssim<T: Float>(a: &[T], b: &[T], h: usize, w: usize, scales: usize, cfg: &SsimConfig) -> Result<T> {
    Ok(ms_ssim_impl(a, b, h, w, scales, cfg, false)?.0)
}

pub fn ms_ssim_with_grad<T: Float>(
    a: &[T],
    b: &[T],
    h: usize,
    w: usize,
    scales: usize,
    cfg: &SsimConfig,
) -> Result<(T, Vec<T>)> {
    ms_ssim_impl(a, b, h, w, scales, cfg, true)
}

fn ms_ssim_impl<T: Float>(
    a: &[T],
    b: &[T],
    h: usize,
    w: usize,
    scales: usize,
    cfg: &SsimConfig,
    with_grad: bool,
) -> Result<(T, Vec<T>)> {
    if scales == 0 || scales > MS_SSIM_WEIGHTS.len() {
        return Err(Error::Config(alloc::format!(
            "ms-ssim scales must be in 1..=5, got {scales}"
        )));
    }
    let div = 1 << (scales - 1);
    check(a.len(), b.len(), h, w, 1)?;
    if (h / div).min(w / div) < cfg.window {
        return Err(Error::ImageTooSmall {
            size: (h / div).min(w / div),
            window: cfg.window,
        });
    }
    let k = gaussian(cfg);
    let weights: Vec<T> = scale_weights(scales).into_iter().map(|v| T::from(v).unwrap()).collect();
    let mut pyramid: Vec<(Vec<T>, Vec<T>, usize, usize)> = Vec::with_capacity(scales);
    pyramid.push((a.to_vec(), b.to_vec(), h, w));
    for _ in 1..scales {
        let (pa, pb, ph, pw) = pyramid.last().unwrap();
        let next = (avg_pool2(pa, *ph, *pw), avg_pool2(pb, *ph, *pw), ph / 2, pw / 2);
        pyramid.push(next);
    }
    let all_parts: Vec<Parts<T>> = pyramid
        .iter()
        .map(|(pa, pb, ph, pw)| parts(pa, pb, *ph, *pw, cfg, &k))
        .collect();
    let values: Vec<T> = all_parts
        .iter()
        .enumerate()
        .map(|(j, p)| if j + 1 == scales { p.ssim } else { p.cs }.max(T::zero()))
        .collect();
    let value = values
        .iter()
        .zip(&weights)
        .fold(T::one(), |acc, (&v, &wt)| acc * v.powf(wt));
    if !with_grad {
        return Ok((value, Vec::new()));
    }
    if value <= T::zero() {
        return Ok((value, vec![T::zero(); h * w]));
    }
    // back to front: gradient at the coarsest scale, then pooled upward
    let mut grad: Option<Vec<T>> = None;
    for j in (0..scales).rev() {
        let coef = value * weights[j] / values[j];
        let (pa, pb, ph, pw) = &pyramid[j];
        let (cs_coef, ss_coef) = if j + 1 == scales {
            (T::zero(), coef)
        } else {
            (coef, T::zero())
        };
        let mut g = parts_grad(&all_parts[j], pa, pb, cfg, &k, ss_coef, cs_coef);
        if let Some(coarser) = grad.take() {
            for (gi, ci) in g.iter_mut().zip(avg_pool2_adjoint(&coarser, *ph, *pw)) {
                *gi = *gi + ci;
            }
        }
        grad = Some(g);
    }
    Ok((value, grad.unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(h: usize, w: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..h * w)
            .map(|_| {
                s = crate::shapes::splitmix64(s);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    #[test]
    fn identity_and_symmetry() {
        let cfg = SsimConfig::default();
        let a = pattern(32, 32, 1);
        let b = pattern(32, 32, 2);
        assert!((ssim(&a, &a, 32, 32, &cfg).unwrap() - 1.0).abs() < 1e-12);
        let ab = ssim(&a, &b, 32, 32, &cfg).unwrap();
        let ba = ssim(&b, &a, 32, 32, &cfg).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn black_versus_white_is_near_zero() {
        let cfg = SsimConfig::default();
        let z = vec![0.0f64; 256];
        let o = vec![1.0f64; 256];
        let v = ssim(&z, &o, 16, 16, &cfg).unwrap();
        // luminance C1 / (1 + C1), contrast-structure C2 / C2
        assert!((v - 1e-4 / (1.0 + 1e-4)).abs() < 1e-12);
        assert!(v <= 0.01);
    }

    #[test]
    fn filter_adjoint_identity() {
        let k = gaussian::<f64>(&SsimConfig::default());
        let x = pattern(20, 17, 3);
        let g = pattern(10, 7, 4);
        let lhs: f64 = filter_valid(&x, 20, 17, &k).iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = filter_valid_adjoint(&g, 20, 17, &k)
            .iter()
            .zip(&x)
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_central_differences() {
        let cfg = SsimConfig::default();
        let a = pattern(32, 32, 5);
        let b: Vec<f64> = pattern(32, 32, 6)
            .iter()
            .zip(&a)
            .map(|(n, x)| 0.6 * x + 0.4 * n)
            .collect();
        let (_, g1) = ssim_with_grad(&a, &b, 32, 32, &cfg).unwrap();
        let (_, g2) = ms_ssim_with_grad(&a, &b, 32, 32, 2, &SsimConfig { window: 7, ..cfg }).unwrap();
        let eps = 1e-6;
        for idx in [0usize, 77, 300, 529, 1023] {
            let mut ap = a.clone();
            ap[idx] += eps;
            let mut am = a.clone();
            am[idx] -= eps;
            let fd1 = (ssim(&ap, &b, 32, 32, &cfg).unwrap() - ssim(&am, &b, 32, 32, &cfg).unwrap()) / (2.0 * eps);
            assert!(
                (fd1 - g1[idx]).abs() <= 1e-3 * fd1.abs().max(1e-6),
                "ssim[{idx}] {fd1} vs {}",
                g1[idx]
            );
            let c7 = SsimConfig { window: 7, ..cfg };
            let fd2 =
                (ms_ssim(&ap, &b, 32, 32, 2, &c7).unwrap() - ms_ssim(&am, &b, 32, 32, 2, &c7).unwrap()) / (2.0 * eps);
            assert!(
                (fd2 - g2[idx]).abs() <= 1e-3 * fd2.abs().max(1e-6),
                "ms[{idx}] {fd2} vs {}",
                g2[idx]
            );
        }
    }

    #[test]
    fn too_small_for_the_pyramid() {
        let a = vec![0.0f64; 64 * 64];
        let err = ms_ssim(&a, &a, 64, 64, 4, &SsimConfig::default()).unwrap_err();
        assert_eq!(err, Error::ImageTooSmall { size: 8, window: 11 });
    }

    #[test]
    fn renormalized_weights_sum_to_one() {
        let w = scale_weights(4);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((w[0] - 0.0448 / 0.8668).abs() < 1e-12);
    }
}
