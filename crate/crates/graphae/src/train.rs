//! Epoch loops for the self-supervised model and the supervised baseline.

use std::path::{Path, PathBuf};
use std::time::Instant;

use graphae_core::model::{AutoEncoder, BaselineModel, BaselineStage};
use graphae_core::nn::{Adam, Module};
use graphae_core::shapes::Split;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, CheckpointMeta};
use crate::config::{ExperimentConfig, RunMode};
use crate::dataset::Manifest;
use crate::error::{Error, Result};
use crate::eval::{evaluate_split, GraphPredictor};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f32,
    /// Mean training loss over the epoch's batches.
    pub loss: f64,
    /// Reconstruction part (self-supervised) or node/edge loss (baseline).
    pub main: f64,
    pub aux: f64,
    pub stage: Option<String>,
    pub val: Option<ValScore>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochLog>,
    pub checkpoint: PathBuf,
}

fn shuffled_train(cfg: &ExperimentConfig, data: &Manifest, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx = data.indices(Split::Train);
    idx.shuffle(rng);
    if let Some(n) = cfg.train_samples {
        idx.truncate(n);
    }
    idx
}

fn validate(cfg: &ExperimentConfig, model: &mut dyn GraphPredictor, data: &Manifest) -> Result<Option<ValScore>> {
    if cfg.val_samples == Some(0) || data.indices(Split::Val).is_empty() {
        return Ok(None);
    }
    let r = evaluate_split(
        model,
        data,
        Split::Val,
        &cfg.metrics,
        cfg.eval_batch_size,
        cfg.val_samples,
    )?;
    Ok(Some(ValScore {
        precision: r.precision,
        recall: r.recall,
        f1: r.f1,
    }))
}

fn write_history(out_dir: &Path, history: &[EpochLog]) -> Result<()> {
    let path = out_dir.join(HISTORY_FILE);
    let json = serde_json::to_string_pretty(history).expect("history serializes");
    std::fs::write(&path, json).map_err(Error::io(path))
}

fn meta(cfg: &ExperimentConfig, mode: RunMode, epoch: usize, seed: u64) -> CheckpointMeta {
    CheckpointMeta {
        mode,
        epoch,
        seed,
        model: cfg.model.clone(),
        baseline: cfg.baseline,
    }
}

/// Trains the auto-encoder from scratch with `seed`, writing
/// `model.ckpt` (after every epoch) and `history.json` into `out_dir`.
///
/// A non-finite loss stops the run; the checkpoint of the last completed
/// epoch (or the initial weights) stays on disk.
pub fn train_self_supervised(
    cfg: &ExperimentConfig,
    data: &Manifest,
    seed: u64,
    out_dir: &Path,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<(AutoEncoder, TrainOutcome)> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = AutoEncoder::new(cfg.model.clone(), &mut rng)?;
    let mut adam = Adam::new(cfg.optimizer.adam);
    let schedule = cfg.schedule();
    let ckpt = out_dir.join(CHECKPOINT_FILE);
    checkpoint::save(&ckpt, &meta(cfg, RunMode::SelfSupervised, 0, seed), &mut model)?;
    let mut history = Vec::new();
    for epoch in 1..=schedule.epochs {
        let start = Instant::now();
        let lr = schedule.lr(epoch);
        let order = shuffled_train(cfg, data, &mut rng);
        let (mut loss, mut main, mut aux, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.optimizer.batch_size) {
            let batch = data.load_batch(chunk, cfg.n_max())?;
            let stats = match model.train_step(&batch.images, &mut adam, lr) {
                Ok(s) => s,
                Err(graphae_core::Error::NonFinite { step }) => {
                    write_history(out_dir, &history)?;
                    return Err(Error::Diverged {
                        epoch,
                        step,
                        last_good: ckpt,
                    });
                }
                Err(e) => return Err(e.into()),
            };
            loss += stats.loss;
            main += stats.main;
            aux += stats.aux;
            batches += 1;
        }
        let n = batches.max(1) as f64;
        let val = validate(cfg, &mut model, data)?;
        checkpoint::save(&ckpt, &meta(cfg, RunMode::SelfSupervised, epoch, seed), &mut model)?;
        let log = EpochLog {
            epoch,
            lr,
            loss: loss / n,
            main: main / n,
            aux: aux / n,
            stage: None,
            val,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        history.push(log);
        write_history(out_dir, &history)?;
    }
    Ok((
        model,
        TrainOutcome {
            history,
            checkpoint: ckpt,
        },
    ))
}

/// Baseline schedule: node heatmap supervision for the first
/// `baseline.node_epochs` epochs, then edge supervision with the attention
/// branch frozen.
pub fn train_baseline(
    cfg: &ExperimentConfig,
    data: &Manifest,
    seed: u64,
    out_dir: &Path,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<(BaselineModel, TrainOutcome)> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = BaselineModel::new(cfg.model.encoder.clone(), cfg.baseline, &mut rng);
    let mut adam = Adam::new(cfg.optimizer.adam);
    let schedule = cfg.schedule();
    let ckpt = out_dir.join(CHECKPOINT_FILE);
    checkpoint::save(&ckpt, &meta(cfg, RunMode::Baseline, 0, seed), &mut model)?;
    let mut history = Vec::new();
    for epoch in 1..=schedule.epochs {
        let start = Instant::now();
        let lr = schedule.lr(epoch);
        let stage = cfg.baseline.stage(epoch);
        let order = shuffled_train(cfg, data, &mut rng);
        let (mut loss, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.optimizer.batch_size) {
            let batch = data.load_batch(chunk, cfg.n_max())?;
            match model.train_step(stage, &batch.images, &batch.targets, &mut adam, lr) {
                Ok(l) => loss += l,
                Err(graphae_core::Error::NonFinite { step }) => {
                    write_history(out_dir, &history)?;
                    return Err(Error::Diverged {
                        epoch,
                        step,
                        last_good: ckpt,
                    });
                }
                Err(e) => return Err(e.into()),
            }
            batches += 1;
        }
        let n = batches.max(1) as f64;
        let val = validate(cfg, &mut model, data)?;
        checkpoint::save(&ckpt, &meta(cfg, RunMode::Baseline, epoch, seed), &mut model)?;
        let log = EpochLog {
            epoch,
            lr,
            loss: loss / n,
            main: loss / n,
            aux: 0.0,
            stage: Some(
                match stage {
                    BaselineStage::Nodes => "nodes",
                    BaselineStage::Edges => "edges",
                }
                .to_string(),
            ),
            val,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        history.push(log);
        write_history(out_dir, &history)?;
    }
    Ok((
        model,
        TrainOutcome {
            history,
            checkpoint: ckpt,
        },
    ))
}

/// Sum of squared gradients over every parameter the visitor reaches.
pub fn grad_norm_sq<M: Module + ?Sized>(module: &mut M) -> f64 {
    let mut total = 0.0;
    module.visit_params("", &mut |_, p| total += p.grad_norm_sq());
    total
}
