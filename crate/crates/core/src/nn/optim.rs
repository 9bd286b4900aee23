use num_traits::Float;

use super::{Module, Param};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AdamConfig {
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.6,
            beta2: 0.9,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam with bias correction. Moments live on each [`Param`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0 }
    }

    /// Advances the step counter. Call once per optimizer step, before
    /// [`Adam::update`] is applied to the participating modules.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    pub fn update<M: Module + ?Sized>(&self, module: &mut M, lr: f32) {
        let c = self.config;
        let t = self.step.max(1) as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        module.visit_params("", &mut |_, p: &mut Param| {
            if !p.trainable {
                return;
            }
            if p.first_moment.len() != p.len() {
                p.first_moment = alloc::vec![0.0; p.len()];
                p.second_moment = alloc::vec![0.0; p.len()];
            }
            for i in 0..p.len() {
                let g = p.grad[i] + c.weight_decay * p.value[i];
                let m = c.beta1 * p.first_moment[i] + (1.0 - c.beta1) * g;
                let v = c.beta2 * p.second_moment[i] + (1.0 - c.beta2) * g * g;
                p.first_moment[i] = m;
                p.second_moment[i] = v;
                p.value[i] -= lr * (m / bc1) / (Float::sqrt(v / bc2) + c.eps);
            }
        });
    }
}

/// Step schedule: `initial` until `decay_epoch` (1-based), then
/// `initial * decay_factor` for the remaining epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LrSchedule {
    pub initial: f32,
    pub epochs: usize,
    pub decay_epoch: usize,
    pub decay_factor: f32,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::self_supervised()
    }
}

impl LrSchedule {
    pub fn self_supervised() -> Self {
        LrSchedule {
            initial: 5e-4,
            epochs: 30,
            decay_epoch: 21,
            decay_factor: 0.1,
        }
    }

    pub fn baseline() -> Self {
        LrSchedule {
            initial: 3e-4,
            epochs: 15,
            decay_epoch: 11,
            decay_factor: 0.1,
        }
    }

    /// Learning rate for a 1-based epoch.
    pub fn lr(&self, epoch: usize) -> f32 {
        if epoch >= self.decay_epoch {
            self.initial * self.decay_factor
        } else {
            self.initial
        }
    }
}
