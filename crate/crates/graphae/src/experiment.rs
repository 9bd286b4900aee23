//! Multi-seed runs and the ablation grids.

use std::path::Path;

use graphae_core::losses::{Similarity, Target};
use graphae_core::metrics::EvalReport;
use graphae_core::shapes::Split;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, RunMode};
use crate::dataset::Manifest;
use crate::error::{Error, Result};
use crate::eval::evaluate_split;
use crate::train::{train_baseline, train_self_supervised, EpochLog};

pub const RESULT_FILE: &str = "result.json";
pub const TEST_REPORT_FILE: &str = "test_report.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Population standard deviation (divides by the number of runs).
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MetricStats {
    if values.is_empty() {
        return MetricStats { mean: 0.0, std: 0.0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MetricStats { mean, std: var.sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub precision: MetricStats,
    pub recall: MetricStats,
    pub f1: MetricStats,
}

impl Aggregate {
    /// Failed runs (`None`) count as zero when `count_failures` is set and
    /// are skipped otherwise.
    pub fn over(reports: &[Option<&EvalReport>], count_failures: bool) -> Self {
        let picked: Vec<(f64, f64, f64)> = reports
            .iter()
            .filter_map(|r| match r {
                Some(r) => Some((r.precision, r.recall, r.f1)),
                None if count_failures => Some((0.0, 0.0, 0.0)),
                None => None,
            })
            .collect();
        let col = |f: fn(&(f64, f64, f64)) -> f64| mean_std(&picked.iter().map(f).collect::<Vec<_>>());
        Aggregate {
            runs: picked.len(),
            precision: col(|t| t.0),
            recall: col(|t| t.1),
            f1: col(|t| t.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    #[serde(flatten)]
    pub status: RunStatus,
    pub history: Vec<EpochLog>,
    pub test: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub label: String,
    pub config: ExperimentConfig,
    pub runs: Vec<SeedRun>,
    /// Completed runs only.
    pub summary: Aggregate,
    /// Failed runs scored as zero.
    pub summary_with_failures: Aggregate,
    pub failed: usize,
    pub std_kind: String,
    /// Set when fewer than two runs completed; the std is then 0 and says
    /// nothing about seed variance.
    pub single_seed_caveat: bool,
}

impl RunResult {
    pub fn from_runs(label: impl Into<String>, config: ExperimentConfig, runs: Vec<SeedRun>) -> Self {
        let reports: Vec<Option<&EvalReport>> = runs.iter().map(|r| r.test.as_ref()).collect();
        let summary = Aggregate::over(&reports, false);
        let summary_with_failures = Aggregate::over(&reports, true);
        let failed = runs.iter().filter(|r| r.status != RunStatus::Completed).count();
        RunResult {
            label: label.into(),
            config,
            single_seed_caveat: summary.runs < 2,
            runs,
            summary,
            summary_with_failures,
            failed,
            std_kind: "population".to_string(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("result serializes");
        std::fs::write(path, json).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

/// Trains and tests one seed. Training failures are returned as a failed
/// run rather than an error; I/O problems still abort.
pub fn run_one(
    cfg: &ExperimentConfig,
    data: &Manifest,
    seed: u64,
    out_dir: &Path,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<SeedRun> {
    let outcome = match cfg.mode {
        RunMode::SelfSupervised => train_self_supervised(cfg, data, seed, out_dir, on_epoch).and_then(|(mut m, o)| {
            let r = evaluate_split(&mut m, data, Split::Test, &cfg.metrics, cfg.eval_batch_size, None)?;
            Ok((o, r))
        }),
        RunMode::Baseline => train_baseline(cfg, data, seed, out_dir, on_epoch).and_then(|(mut m, o)| {
            let r = evaluate_split(&mut m, data, Split::Test, &cfg.metrics, cfg.eval_batch_size, None)?;
            Ok((o, r))
        }),
    };
    match outcome {
        Ok((o, report)) => {
            let path = out_dir.join(TEST_REPORT_FILE);
            std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes"))
                .map_err(Error::io(&path))?;
            Ok(SeedRun {
                seed,
                status: RunStatus::Completed,
                history: o.history,
                test: Some(report),
            })
        }
        Err(e @ (Error::Diverged { .. } | Error::Core(_))) => {
            let history_path = out_dir.join(crate::train::HISTORY_FILE);
            let history = std::fs::read_to_string(history_path)
                .ok()
                .and_then(|t| serde_json::from_str(&t).ok())
                .unwrap_or_default();
            Ok(SeedRun {
                seed,
                status: RunStatus::Failed { reason: e.to_string() },
                history,
                test: None,
            })
        }
        Err(e) => Err(e),
    }
}

/// Runs seeds `cfg.seed .. cfg.seed + cfg.n_seeds`, each in `seed-<s>/`,
/// and writes `result.json`.
pub fn run_seeds(
    label: &str,
    cfg: &ExperimentConfig,
    data: &Manifest,
    out_dir: &Path,
    on_epoch: &mut dyn FnMut(u64, &EpochLog),
) -> Result<RunResult> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    cfg.save(&out_dir.join("config.toml"))?;
    let mut runs = Vec::with_capacity(cfg.n_seeds);
    for seed in cfg.seed..cfg.seed + cfg.n_seeds as u64 {
        let dir = out_dir.join(format!("seed-{seed}"));
        runs.push(run_one(cfg, data, seed, &dir, &mut |log| on_epoch(seed, log))?);
    }
    let result = RunResult::from_runs(label, cfg.clone(), runs);
    result.save(&out_dir.join(RESULT_FILE))?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Nodes,
    Losses,
}

/// Rows of an ablation grid as `(label, config)` pairs.
pub fn ablation_configs(which: Ablation, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    let mut base = base.clone();
    base.mode = RunMode::SelfSupervised;
    match which {
        Ablation::Nodes => [4usize, 5, 6, 8]
            .into_iter()
            .map(|n| {
                let mut c = base.clone();
                c.model.encoder.n_max = n;
                (format!("n_max={n}"), c)
            })
            .collect(),
        Ablation::Losses => [
            ("aux+ms_ssim@refined", true, Similarity::MsSsim, Target::Refined),
            ("no_aux+ms_ssim@refined", false, Similarity::MsSsim, Target::Refined),
            ("aux+ssim@refined", true, Similarity::Ssim, Target::Refined),
            ("aux+ms_ssim@coarse", true, Similarity::MsSsim, Target::Coarse),
            ("aux+ssim@coarse", true, Similarity::Ssim, Target::Coarse),
        ]
        .into_iter()
        .map(|(label, aux, sim, target)| {
            let mut c = base.clone();
            let weight = if base.model.loss.lambda_aux > 0.0 {
                base.model.loss.lambda_aux
            } else {
                1.0
            };
            c.model.loss.lambda_aux = if aux { weight } else { 0.0 };
            c.model.loss.similarity = sim;
            c.model.loss.target = target;
            (label.to_string(), c)
        })
        .collect(),
    }
}

/// Runs every row of an ablation grid into `out_dir/<label>/`.
pub fn run_ablation(
    which: Ablation,
    base: &ExperimentConfig,
    data: &Manifest,
    out_dir: &Path,
    on_epoch: &mut dyn FnMut(&str, u64, &EpochLog),
) -> Result<Vec<RunResult>> {
    let mut results = Vec::new();
    for (label, cfg) in ablation_configs(which, base) {
        let dir = out_dir.join(label.replace(['@', '+', '='], "_"));
        results.push(run_seeds(&label, &cfg, data, &dir, &mut |s, l| on_epoch(&label, s, l))?);
    }
    Ok(results)
}
