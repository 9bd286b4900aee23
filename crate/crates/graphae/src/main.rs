use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use graphae::checkpoint::{self, LoadedModel};
use graphae::config::{ExperimentConfig, RunMode};
use graphae::dataset::{generate_dataset, Manifest};
use graphae::eval::evaluate_split;
use graphae::experiment::{run_ablation, run_seeds, Ablation, RunResult, RESULT_FILE};
use graphae::graph_json::GraphJson;
use graphae::image_io;
use graphae::report::{grid_rows, render_report, write_grid};
use graphae::train::EpochLog;
use graphae_core::decoder::DrawConfig;
use graphae_core::shapes::{ShapeConfig, Split};

#[derive(Parser)]
#[command(name = "graphae", version, about = "Self-supervised image-to-graph auto-encoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichArg {
    Nodes,
    Losses,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a shape dataset (PNG images plus manifest.jsonl).
    GenData {
        #[arg(long, default_value_t = 50_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        canvas: usize,
        #[arg(long, default_value_t = 2.0)]
        stroke: f64,
    },
    /// Train the self-supervised model for every configured seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        /// Override the first seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of seeds.
        #[arg(long)]
        n_seeds: Option<usize>,
    },
    /// Train the supervised baseline for every configured seed.
    TrainBaseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs/baseline")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_seeds: Option<usize>,
    },
    /// Score a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, default_value_t = 8.0)]
        tol: f64,
        #[arg(long)]
        merge_radius: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an ablation grid (node budget or loss variants).
    Ablate {
        #[arg(long, value_enum)]
        which: WhichArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs/ablation")]
        out: PathBuf,
    },
    /// Collect result.json files into tables, optionally with image grids.
    RenderReport {
        /// result.json files or run directories containing one.
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Self-supervised checkpoint for the image grid.
        #[arg(long, requires = "data")]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        baseline_ckpt: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        samples: usize,
    },
    /// Draw a graph JSON file onto a canvas.
    Render {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        canvas: usize,
    },
}

fn print_epoch(prefix: &str, seed: u64, log: &EpochLog) {
    let val = log.val.map(|v| format!(" val_f1 {:.4}", v.f1)).unwrap_or_default();
    let stage = log.stage.as_deref().map(|s| format!(" [{s}]")).unwrap_or_default();
    eprintln!(
        "{prefix}seed {seed} epoch {:>3}{stage} lr {:.1e} loss {:.5}{val} ({:.0}s)",
        log.epoch, log.lr, log.loss, log.seconds
    );
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    n_seeds: Option<usize>,
    mode: RunMode,
) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.mode = mode;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = n_seeds {
        cfg.n_seeds = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open_data(cfg: &ExperimentConfig) -> anyhow::Result<Manifest> {
    let m = Manifest::load(&cfg.data.dir)
        .with_context(|| format!("dataset {} (create it with gen-data)", cfg.data.dir.display()))?;
    if m.is_empty() {
        bail!("dataset {} is empty", cfg.data.dir.display());
    }
    Ok(m)
}

fn train(cfg: ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    let data = open_data(&cfg)?;
    let result = run_seeds("default", &cfg, &data, out, &mut |s, l| print_epoch("", s, l))?;
    print_summary(&result);
    Ok(())
}

fn print_summary(r: &RunResult) {
    let s = &r.summary;
    println!(
        "{}: precision {:.1}±{:.1} recall {:.1}±{:.1} f1 {:.1}±{:.1} over {} runs ({} failed){}",
        r.label,
        100.0 * s.precision.mean,
        100.0 * s.precision.std,
        100.0 * s.recall.mean,
        100.0 * s.recall.std,
        100.0 * s.f1.mean,
        100.0 * s.f1.std,
        s.runs,
        r.failed,
        if r.single_seed_caveat {
            " [single run: std not meaningful]"
        } else {
            ""
        }
    );
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenData {
            n,
            seed,
            out,
            canvas,
            stroke,
        } => {
            let cfg = ShapeConfig {
                canvas_size: canvas,
                stroke_width: stroke,
                ..ShapeConfig::default()
            };
            let m = generate_dataset(n, seed, &out, &cfg)?;
            let count = |s| m.indices(s).len();
            println!(
                "wrote {} samples to {} (train {}, val {}, test {})",
                m.len(),
                out.display(),
                count(Split::Train),
                count(Split::Val),
                count(Split::Test)
            );
        }
        Command::Train {
            config,
            out,
            seed,
            n_seeds,
        } => train(load_config(&config, seed, n_seeds, RunMode::SelfSupervised)?, &out)?,
        Command::TrainBaseline {
            config,
            out,
            seed,
            n_seeds,
        } => train(load_config(&config, seed, n_seeds, RunMode::Baseline)?, &out)?,
        Command::Eval {
            ckpt,
            data,
            split,
            tol,
            merge_radius,
            threshold,
            out,
        } => {
            let (_, mut model) = checkpoint::load(&ckpt)?;
            let data = Manifest::load(&data)?;
            let metrics = graphae_core::metrics::MetricConfig {
                threshold,
                tol,
                merge_radius: merge_radius.unwrap_or(tol),
            };
            let report = evaluate_split(&mut model, &data, split.into(), &metrics, 32, None)?;
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => std::fs::write(&p, json).with_context(|| p.display().to_string())?,
                None => println!("{json}"),
            }
            eprintln!(
                "precision {:.4} recall {:.4} f1 {:.4}",
                report.precision, report.recall, report.f1
            );
        }
        Command::Ablate { which, config, out } => {
            let cfg = load_config(&config, None, None, RunMode::SelfSupervised)?;
            let data = open_data(&cfg)?;
            let which = match which {
                WhichArg::Nodes => Ablation::Nodes,
                WhichArg::Losses => Ablation::Losses,
            };
            let results = run_ablation(which, &cfg, &data, &out, &mut |label, s, l| {
                print_epoch(&format!("{label} "), s, l)
            })?;
            render_report(&results, &out)?;
            results.iter().for_each(print_summary);
        }
        Command::RenderReport {
            results,
            out,
            ckpt,
            baseline_ckpt,
            data,
            samples,
        } => {
            let loaded = results
                .iter()
                .map(|p| {
                    let file = if p.is_dir() { p.join(RESULT_FILE) } else { p.clone() };
                    RunResult::load(&file)
                })
                .collect::<graphae::Result<Vec<_>>>()?;
            render_report(&loaded, &out)?;
            if let (Some(ckpt), Some(data)) = (ckpt, data) {
                let LoadedModel::SelfSupervised(mut model) = checkpoint::load(&ckpt)?.1 else {
                    bail!("{} is not a self-supervised checkpoint", ckpt.display());
                };
                let mut baseline = match baseline_ckpt {
                    Some(p) => match checkpoint::load(&p)?.1 {
                        LoadedModel::Baseline(b) => Some(b),
                        LoadedModel::SelfSupervised(_) => bail!("{} is not a baseline checkpoint", p.display()),
                    },
                    None => None,
                };
                let data = Manifest::load(&data)?;
                let mut idx = data.indices(Split::Test);
                idx.truncate(samples);
                let rows = grid_rows(&mut model, baseline.as_mut(), &data, &idx, 0.5)?;
                write_grid(&rows, &out)?;
            }
            println!("report written to {}", out.display());
        }
        Command::Render { graph, out, canvas } => {
            let g = GraphJson::load(&graph)?;
            let cfg = DrawConfig {
                canvas_size: canvas,
                ..DrawConfig::default()
            };
            let img: Vec<f32> = g.draw(&cfg).into_iter().map(|v| v as f32).collect();
            image_io::write_gray(&out, &img, canvas, canvas)?;
        }
    }
    Ok(())
}
