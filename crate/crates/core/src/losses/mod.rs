//! Reconstruction loss, the conditional attention-overlap loss, and their
//! weighted sum.

pub mod aux;
pub mod ssim;

use alloc::vec::Vec;

use num_traits::Float;

pub use aux::{aux_loss, overlap_penalty, overlap_penalty_with_grad};
pub use ssim::{ms_ssim, ms_ssim_with_grad, ssim, ssim_with_grad, SsimConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Similarity {
    MsSsim,
    Ssim,
}

/// Which decoder output the reconstruction loss compares to the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Target {
    Refined,
    Coarse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LossConfig {
    pub lambda_aux: f64,
    pub similarity: Similarity,
    pub target: Target,
    pub ms_ssim_scales: usize,
    pub window: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_aux: 1.0,
            similarity: Similarity::MsSsim,
            target: Target::Refined,
            ms_ssim_scales: 4,
            window: 11,
        }
    }
}

impl LossConfig {
    pub fn validate(&self, image_size: usize) -> Result<()> {
        if !(self.lambda_aux >= 0.0) {
            return Err(Error::Config(alloc::format!(
                "lambda_aux must be >= 0, got {}",
                self.lambda_aux
            )));
        }
        let coarsest = match self.similarity {
            Similarity::MsSsim => image_size >> self.ms_ssim_scales.saturating_sub(1),
            Similarity::Ssim => image_size,
        };
        if coarsest < self.window {
            return Err(Error::ImageTooSmall {
                size: coarsest,
                window: self.window,
            });
        }
        Ok(())
    }

    pub fn ssim_config(&self) -> SsimConfig {
        SsimConfig {
            window: self.window,
            ..SsimConfig::default()
        }
    }
}

/// Configured similarity of `pred` to `input` and its gradient w.r.t. `pred`.
pub fn similarity_with_grad<T: Float>(pred: &[T], input: &[T], size: usize, cfg: &LossConfig) -> Result<(T, Vec<T>)> {
    match cfg.similarity {
        Similarity::MsSsim => ms_ssim_with_grad(pred, input, size, size, cfg.ms_ssim_scales, &cfg.ssim_config()),
        Similarity::Ssim => ssim_with_grad(pred, input, size, size, &cfg.ssim_config()),
    }
}

pub fn similarity<T: Float>(pred: &[T], input: &[T], size: usize, cfg: &LossConfig) -> Result<T> {
    match cfg.similarity {
        Similarity::MsSsim => ms_ssim(pred, input, size, size, cfg.ms_ssim_scales, &cfg.ssim_config()),
        Similarity::Ssim => ssim(pred, input, size, size, &cfg.ssim_config()),
    }
}

/// `1 - similarity`, so identical images cost zero.
pub fn main_loss<T: Float>(pred: &[T], input: &[T], size: usize, cfg: &LossConfig) -> Result<T> {
    Ok(T::one() - similarity(pred, input, size, cfg)?)
}

pub fn total_loss(main: f64, aux: f64, cfg: &LossConfig) -> f64 {
    main + cfg.lambda_aux * aux
}

#[cfg(test)]
mod tests {
    use super::*;
    #[test]
    fn total_is_weighted_sum() {
        let mut cfg = LossConfig::default();
        assert!((total_loss(0.3, 0.1, &cfg) - 0.4).abs() < 1e-12);
        cfg.lambda_aux = 0.0;
        assert_eq!(total_loss(0.3, 0.1, &cfg), 0.3);
    }

    #[test]
    fn identical_images_cost_zero_and_loss_stays_in_range() {
        let cfg = LossConfig::default();
        let a: Vec<f64> = (0..128 * 128).map(|i| ((i * 31) % 17) as f64 / 16.0).collect();
        assert!(main_loss(&a, &a, 128, &cfg).unwrap().abs() < 1e-12);
        let inv: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
        let l = main_loss(&a, &inv, 128, &cfg).unwrap();
        assert!((0.0..=2.0).contains(&l));
        let ssim_cfg = LossConfig {
            similarity: Similarity::Ssim,
            ..cfg
        };
        let l2 = main_loss(&a, &inv, 128, &ssim_cfg).unwrap();
        assert!((0.0..=2.0).contains(&l2));
    }

    #[test]
    fn validation() {
        assert!(LossConfig::default().validate(128).is_ok());
        assert!(LossConfig::default().validate(64).is_err());
        let bad = LossConfig {
            lambda_aux: -1.0,
            ..LossConfig::default()
        };
        assert!(bad.validate(128).is_err());
    }
}
