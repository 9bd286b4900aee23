#![allow(dead_code)]

use std::path::Path;

use graphae::config::ExperimentConfig;
use graphae::core::encoder::EncoderConfig;
use graphae::core::nn::LrSchedule;

/// A narrow network and a short schedule so whole runs take seconds.
pub fn tiny_config(data_dir: &Path, epochs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        n_seeds: 1,
        train_samples: Some(8),
        val_samples: Some(4),
        eval_batch_size: 8,
        ..ExperimentConfig::default()
    };
    cfg.data.dir = data_dir.to_path_buf();
    cfg.model.encoder = EncoderConfig {
        stem_channels: 8,
        block_channels: [16, 8],
        head_channels: 8,
        edge_hidden: 8,
        ..EncoderConfig::default()
    };
    cfg.model.decoder.refine_channels = 4;
    cfg.optimizer.batch_size = 4;
    cfg.baseline.node_epochs = 1;
    cfg.schedule = Some(LrSchedule {
        initial: 5e-4,
        epochs,
        decay_epoch: epochs,
        decay_factor: 0.1,
    });
    cfg
}
