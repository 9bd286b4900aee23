//! End-to-end acceptance checks, one line per criterion.
//!
//! Criteria 4-6 always run. Criteria 1-3 need full-scale multi-seed training:
//! they are scored from finished runs when `GRAPHAE_RESULTS_DIR` points at a
//! directory of `result.json` files, trained from scratch first when
//! `GRAPHAE_ACCEPTANCE_FULL=1` is also set, and skipped otherwise.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use graphae::config::{ExperimentConfig, RunMode};
use graphae::core::decoder::{draw_coarse, DrawConfig, TemplateBank};
use graphae::core::encoder::dsnt::{dsnt, dsnt_backward, spatial_softmax, spatial_softmax_backward};
use graphae::core::encoder::PredictedGraph;
use graphae::core::losses::aux::overlap_penalty;
use graphae::core::losses::ssim::{ms_ssim, ssim, SsimConfig};
use graphae::core::metrics::{dedup, match_triplets, MetricConfig, Triplet};
use graphae::core::nn::{LrSchedule, Mode};
use graphae::core::shapes::{generate_sample, ShapeConfig, Split};
use graphae::dataset::{generate_dataset, Manifest, MANIFEST_FILE};
use graphae::eval::evaluate_oracle;
use graphae::experiment::{run_ablation, run_seeds, Ablation, RunResult, RESULT_FILE};
use graphae::train::train_self_supervised;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Reference F1 (mean, std over seeds, in percent) and the acceptance bands around it.
const OURS_F1: (f64, f64) = (67.9, 5.4);
const BASELINE_F1: (f64, f64) = (61.3, 5.9);
const OURS_BAND_10_SEEDS: (f64, f64) = (62.0, 74.0);
const BASELINE_BAND_10_SEEDS: (f64, f64) = (55.0, 68.0);
const NMAX8_BAND: (f64, f64) = (36.0, 48.0);
const SSIM_COARSE_CEILING: f64 = 35.0;

// Smoke run.
const SMOKE_SAMPLES: usize = 500;
const SMOKE_EPOCHS: usize = 5;
const SMOKE_BATCH: usize = 8;
const SMOKE_HELD_OUT: usize = 16;
const SMOKE_MIN_MS_SSIM: f64 = 0.6;
const SMOKE_MAX_SECONDS: f64 = 15.0 * 60.0;

// Property tolerances.
const SOFTMAX_TOL: f64 = 1e-5;
const DSNT_TOL: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-3;
const DRAW_TOL: f64 = 1e-5;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn report(id: usize, name: &str, outcome: &Outcome) {
    let (tag, detail) = match outcome {
        Outcome::Pass(d) => ("PASS", d),
        Outcome::Fail(d) => ("FAIL", d),
        Outcome::Skip(d) => ("SKIP", d),
    };
    println!("criterion {id} [{tag}] {name}: {detail}");
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// ---------------------------------------------------------------- criteria 1-3

fn collect_results(dir: &Path, out: &mut Vec<RunResult>) -> Result<(), String> {
    let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            collect_results(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == RESULT_FILE) {
            out.push(RunResult::load(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(())
}

fn f1_pct(r: &RunResult) -> f64 {
    100.0 * r.summary.f1.mean
}

fn find<'a>(results: &'a [RunResult], mode: RunMode, labels: &[&str]) -> Option<&'a RunResult> {
    labels
        .iter()
        .find_map(|l| results.iter().find(|r| r.config.mode == mode && r.label == *l))
}

fn band(seeds: usize, strict: (f64, f64), reference: (f64, f64)) -> (f64, f64) {
    if seeds >= 10 {
        strict
    } else {
        (reference.0 - 2.0 * reference.1, reference.0 + 2.0 * reference.1)
    }
}

fn criterion_1(results: &[RunResult]) -> Outcome {
    let ours = find(
        results,
        RunMode::SelfSupervised,
        &["default", "n_max=4", "aux+ms_ssim@refined"],
    );
    let base = find(results, RunMode::Baseline, &["default", "baseline"]);
    let (Some(ours), Some(base)) = (ours, base) else {
        return Outcome::Skip("no self-supervised and baseline result.json found".into());
    };
    let seeds = ours.summary.runs.min(base.summary.runs);
    if seeds < 3 {
        return Outcome::Fail(format!("only {seeds} completed seeds; at least 3 are required"));
    }
    let ob = band(ours.summary.runs, OURS_BAND_10_SEEDS, OURS_F1);
    let bb = band(base.summary.runs, BASELINE_BAND_10_SEEDS, BASELINE_F1);
    let (o, b) = (f1_pct(ours), f1_pct(base));
    check(
        (ob.0..=ob.1).contains(&o) && (bb.0..=bb.1).contains(&b),
        format!(
            "ours {o:.1} over {} seeds (band {:.1}-{:.1}), baseline {b:.1} over {} seeds (band {:.1}-{:.1})",
            ours.summary.runs, ob.0, ob.1, base.summary.runs, bb.0, bb.1
        ),
    )
}

fn criterion_2(results: &[RunResult]) -> Outcome {
    let rows: Option<Vec<f64>> = [4, 5, 6, 8]
        .iter()
        .map(|n| find(results, RunMode::SelfSupervised, &[&format!("n_max={n}")]).map(f1_pct))
        .collect();
    let Some(rows) = rows else {
        return Outcome::Skip("node-budget ablation results not found".into());
    };
    let decreasing = rows.windows(2).all(|w| w[0] > w[1]);
    let last = rows[3];
    check(
        decreasing && (NMAX8_BAND.0..=NMAX8_BAND.1).contains(&last),
        format!(
            "F1 at n_max 4/5/6/8 = {:.1}/{:.1}/{:.1}/{:.1}, n_max=8 band {}-{}",
            rows[0], rows[1], rows[2], rows[3], NMAX8_BAND.0, NMAX8_BAND.1
        ),
    )
}

fn criterion_3(results: &[RunResult]) -> Outcome {
    let labels = [
        "aux+ms_ssim@refined",
        "no_aux+ms_ssim@refined",
        "aux+ssim@refined",
        "aux+ms_ssim@coarse",
        "aux+ssim@coarse",
    ];
    let rows: Option<Vec<f64>> = labels
        .iter()
        .map(|l| find(results, RunMode::SelfSupervised, &[l]).map(f1_pct))
        .collect();
    let Some(f) = rows else {
        return Outcome::Skip("loss ablation results not found".into());
    };
    let ordered = f[0] > f[1] && f[1] > f[3] && f[1] > f[4];
    let ssim_coarse_min = f.iter().all(|&v| f[4] <= v) && f[4] < SSIM_COARSE_CEILING;
    let detail = labels
        .iter()
        .zip(&f)
        .map(|(l, v)| format!("{l} {v:.1}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(ordered && ssim_coarse_min, detail)
}

fn run_full_scale(results_dir: &Path) -> Result<(), String> {
    let cfg = match std::env::var_os("GRAPHAE_ACCEPTANCE_CONFIG") {
        Some(p) => ExperimentConfig::load(Path::new(&p)).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    if !cfg.data.dir.join(MANIFEST_FILE).exists() {
        generate_dataset(cfg.data.n_samples, cfg.data.seed, &cfg.data.dir, &cfg.data.shape)
            .map_err(|e| e.to_string())?;
    }
    let data = Manifest::load(&cfg.data.dir).map_err(|e| e.to_string())?;
    let log =
        &mut |seed: u64, l: &graphae::train::EpochLog| eprintln!("seed {seed} epoch {} loss {:.5}", l.epoch, l.loss);
    let mut ours = cfg.clone();
    ours.mode = RunMode::SelfSupervised;
    run_seeds("default", &ours, &data, &results_dir.join("default"), log).map_err(|e| e.to_string())?;
    let mut base = cfg.clone();
    base.mode = RunMode::Baseline;
    base.schedule = None;
    run_seeds("baseline", &base, &data, &results_dir.join("baseline"), log).map_err(|e| e.to_string())?;
    for (which, dir) in [(Ablation::Nodes, "nodes"), (Ablation::Losses, "losses")] {
        run_ablation(which, &ours, &data, &results_dir.join(dir), &mut |label, seed, l| {
            eprintln!("{label} seed {seed} epoch {} loss {:.5}", l.epoch, l.loss)
        })
        .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn full_scale_outcomes() -> [Outcome; 3] {
    let full = std::env::var("GRAPHAE_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    let dir = std::env::var_os("GRAPHAE_RESULTS_DIR").map(PathBuf::from);
    let dir = match (dir, full) {
        (Some(d), _) => d,
        (None, true) => PathBuf::from("runs/acceptance"),
        (None, false) => {
            let why =
                "needs 10-seed full-scale training; set GRAPHAE_RESULTS_DIR (and GRAPHAE_ACCEPTANCE_FULL=1 to train)";
            return [
                Outcome::Skip(why.into()),
                Outcome::Skip(why.into()),
                Outcome::Skip(why.into()),
            ];
        }
    };
    if full {
        if let Err(e) = run_full_scale(&dir) {
            return [Outcome::Fail(e.clone()), Outcome::Fail(e.clone()), Outcome::Fail(e)];
        }
    }
    let mut results = Vec::new();
    if let Err(e) = collect_results(&dir, &mut results) {
        return [Outcome::Fail(e.clone()), Outcome::Fail(e.clone()), Outcome::Fail(e)];
    }
    [criterion_1(&results), criterion_2(&results), criterion_3(&results)]
}

// ------------------------------------------------------------------ criterion 4

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn softmax_normalization(rng: &mut ChaCha8Rng) -> Check {
    for draw in 0..100 {
        let logits: Vec<f32> = (0..1024).map(|_| rng.random_range(-30.0..30.0)).collect();
        let mut p = vec![0.0f32; 1024];
        spatial_softmax(&logits, 1.0, &mut p);
        let s: f64 = p.iter().map(|&v| v as f64).sum();
        ensure((s - 1.0).abs() <= SOFTMAX_TOL, || {
            format!("softmax draw {draw} sums to {s}")
        })?;
    }
    Ok(())
}

fn dsnt_checks(rng: &mut ChaCha8Rng) -> Check {
    let (h, w) = (32, 32);
    for _ in 0..20 {
        let logits: Vec<f64> = (0..h * w).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut p = vec![0.0; h * w];
        spatial_softmax(&logits, 1.0, &mut p);
        let got = dsnt(&p, h, w);
        let (mut ex, mut ey) = (0.0, 0.0);
        for i in 0..h {
            for j in 0..w {
                ex += p[i * w + j] * ((2 * j + 1) as f64 / w as f64 - 1.0);
                ey += p[i * w + j] * ((2 * i + 1) as f64 / h as f64 - 1.0);
            }
        }
        ensure(
            (got[0] - ex).abs() <= DSNT_TOL && (got[1] - ey).abs() <= DSNT_TOL,
            || format!("dsnt {got:?} vs loop ({ex}, {ey})"),
        )?;
    }
    let (h, w) = (8, 8);
    let logits: Vec<f64> = (0..h * w).map(|_| rng.random_range(-2.0..2.0)).collect();
    let weights = [0.4, -0.9];
    let objective = |l: &[f64]| {
        let mut p = vec![0.0; h * w];
        spatial_softmax(l, 1.0, &mut p);
        let c = dsnt(&p, h, w);
        weights[0] * c[0] + weights[1] * c[1]
    };
    let mut p = vec![0.0; h * w];
    spatial_softmax(&logits, 1.0, &mut p);
    let mut d_p = vec![0.0; h * w];
    dsnt_backward(h, w, weights, &mut d_p);
    let mut grad = vec![0.0; h * w];
    spatial_softmax_backward(&p, &d_p, 1.0, &mut grad);
    for _ in 0..20 {
        let k = rng.random_range(0..h * w);
        let eps = 1e-6;
        let (mut lp, mut lm) = (logits.clone(), logits.clone());
        lp[k] += eps;
        lm[k] -= eps;
        let fd = (objective(&lp) - objective(&lm)) / (2.0 * eps);
        let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-12);
        ensure(rel <= FD_REL_TOL, || {
            format!("dsnt gradient at {k}: fd {fd} analytic {}", grad[k])
        })?;
    }
    Ok(())
}

/// Explicit inverse of the endpoint affine map and a hand-written bilinear
/// lookup, evaluated on every pixel.
fn reference_draw(coords: &[[f64; 2]], probs: &[f64], bank: &TemplateBank, cfg: &DrawConfig) -> Vec<f64> {
    let size = cfg.canvas_size;
    let n = coords.len();
    let to_px = |c: f64| ((c + 1.0) * size as f64 - 1.0) / 2.0;
    let tpl = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= bank.width as isize || y >= bank.height as isize {
            0.0
        } else {
            bank.data[y as usize * bank.width + x as usize]
        }
    };
    let [ax0, ay0] = bank.anchors[0];
    let lt = (bank.anchors[1][0] - ax0).hypot(bank.anchors[1][1] - ay0);
    let ns = cfg.stroke_width / bank.thickness;
    let mut out = vec![0.0; size * size];
    for i in 0..n {
        for j in i + 1..n {
            let a = [to_px(coords[i][0]), to_px(coords[i][1])];
            let d = [to_px(coords[j][0]) - a[0], to_px(coords[j][1]) - a[1]];
            let len = d[0].hypot(d[1]);
            if len < cfg.min_length {
                continue;
            }
            let m = [[d[0] / lt, -ns * d[1] / len], [d[1] / lt, ns * d[0] / len]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            for y in 0..size {
                for x in 0..size {
                    let r = [x as f64 - a[0], y as f64 - a[1]];
                    let qx = ax0 + (m[1][1] * r[0] - m[0][1] * r[1]) / det;
                    let qy = ay0 + (m[0][0] * r[1] - m[1][0] * r[0]) / det;
                    let (fx, fy) = (qx.floor(), qy.floor());
                    let (tx, ty) = (qx - fx, qy - fy);
                    let (ix, iy) = (fx as isize, fy as isize);
                    let v = tpl(ix, iy) * (1.0 - tx) * (1.0 - ty)
                        + tpl(ix + 1, iy) * tx * (1.0 - ty)
                        + tpl(ix, iy + 1) * (1.0 - tx) * ty
                        + tpl(ix + 1, iy + 1) * tx * ty;
                    out[y * size + x] += probs[i * n + j] * v;
                }
            }
        }
    }
    out
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let coords = (0..n)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let mut probs = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let p = rng.random_range(0.0..1.0);
            probs[i * n + j] = p;
            probs[j * n + i] = p;
        }
    }
    (coords, probs)
}

fn drawing_checks(rng: &mut ChaCha8Rng) -> Check {
    let bank = TemplateBank::default();
    let small = DrawConfig {
        canvas_size: 8,
        ..DrawConfig::default()
    };
    for case in 0..100 {
        let (coords, probs) = random_graph(rng, 4);
        let got = draw_coarse(&coords, &probs, &bank, &small).raw;
        let want = reference_draw(&coords, &probs, &bank, &small);
        let worst = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
        ensure(worst <= DRAW_TOL, || format!("draw case {case} deviates by {worst}"))?;
    }
    let cfg = DrawConfig::default();
    for case in 0..20 {
        let (coords, probs) = random_graph(rng, 5);
        let mut perm: Vec<usize> = (0..5).collect();
        perm.shuffle(rng);
        let pc: Vec<[f64; 2]> = perm.iter().map(|&k| coords[k]).collect();
        let pp: Vec<f64> = (0..25).map(|k| probs[perm[k / 5] * 5 + perm[k % 5]]).collect();
        let a = draw_coarse(&coords, &probs, &bank, &cfg).raw;
        let b = draw_coarse(&pc, &pp, &bank, &cfg).raw;
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        ensure(worst <= 1e-12, || format!("edge order changes case {case} by {worst}"))?;
    }
    Ok(())
}

fn similarity_checks(rng: &mut ChaCha8Rng) -> Check {
    let cfg = SsimConfig::default();
    for seed in 0..3 {
        let a: Vec<f64> = generate_sample(seed, &ShapeConfig::default())
            .map_err(|e| e.to_string())?
            .image
            .iter()
            .map(|&v| v as f64)
            .collect();
        let b: Vec<f64> = (0..a.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let s = |x: &[f64], y: &[f64]| ssim(x, y, 128, 128, &cfg).unwrap();
        let m = |x: &[f64], y: &[f64]| ms_ssim(x, y, 128, 128, 4, &cfg).unwrap();
        ensure((s(&a, &a) - 1.0).abs() <= 1e-12, || "ssim(x, x) != 1".into())?;
        ensure((m(&a, &a) - 1.0).abs() <= 1e-12, || "ms_ssim(x, x) != 1".into())?;
        ensure((s(&a, &b) - s(&b, &a)).abs() <= 1e-12, || "ssim not symmetric".into())?;
        ensure((m(&a, &b) - m(&b, &a)).abs() <= 1e-12, || {
            "ms_ssim not symmetric".into()
        })?;
    }
    Ok(())
}

fn aux_checks() -> Check {
    // three one-hot channels on a 3x3 map, peaks in different cells
    let mut disjoint = vec![0.0f64; 27];
    disjoint[0] = 1.0;
    disjoint[9 + 4] = 1.0;
    disjoint[18 + 8] = 1.0;
    let v = overlap_penalty(&disjoint, 3).map_err(|e| e.to_string())?;
    ensure(v == 0.0, || format!("disjoint channels cost {v}"))?;
    // two identical one-hot channels on 2x2: the shared cell sums to 2, so (2-1)^2 / 4 cells
    let dup = [1.0f64, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let v = overlap_penalty(&dup, 2).map_err(|e| e.to_string())?;
    ensure((v - 0.25).abs() <= 1e-15, || {
        format!("duplicate fixture gives {v}, expected 0.25")
    })
}

fn brute_force_matching(pred: &[Triplet], gt: &[Triplet], tol: f64) -> usize {
    fn go(p: usize, pred: &[Triplet], gt: &[Triplet], used: &mut [bool], tol: f64) -> usize {
        if p == pred.len() {
            return 0;
        }
        let mut best = go(p + 1, pred, gt, used, tol);
        for g in 0..gt.len() {
            if !used[g] && pred[p].distance(&gt[g]) <= tol {
                used[g] = true;
                best = best.max(1 + go(p + 1, pred, gt, used, tol));
                used[g] = false;
            }
        }
        best
    }
    go(0, pred, gt, &mut vec![false; gt.len()], tol)
}

fn metric_checks(rng: &mut ChaCha8Rng) -> Check {
    for case in 0..200 {
        let nodes: Vec<[f64; 2]> = (0..4)
            .map(|_| [rng.random_range(0.0..40.0), rng.random_range(0.0..40.0)])
            .collect();
        let (mut gt, mut pred) = (Vec::new(), Vec::new());
        for i in 0..4 {
            for j in i + 1..4 {
                if rng.random_bool(0.6) {
                    gt.push(Triplet::new(nodes[i], nodes[j], 1.0));
                }
                if rng.random_bool(0.6) {
                    let mut jit =
                        |p: [f64; 2]| [p[0] + rng.random_range(-9.0..9.0), p[1] + rng.random_range(-9.0..9.0)];
                    let (a, b) = (jit(nodes[i]), jit(nodes[j]));
                    pred.push(Triplet::new(a, b, 0.9));
                }
            }
        }
        let got = match_triplets(&pred, &gt, 8.0).tp;
        let want = brute_force_matching(&pred, &gt, 8.0);
        ensure(got == want, || {
            format!("matching case {case}: {got} vs brute force {want}")
        })?;
    }
    for case in 0..200 {
        let n = rng.random_range(0..12);
        let ts: Vec<Triplet> = (0..n)
            .map(|_| {
                let mut p = || [rng.random_range(0.0..64.0), rng.random_range(0.0..64.0)];
                let (a, b) = (p(), p());
                Triplet::new(a, b, rng.random_range(0.5..1.0))
            })
            .collect();
        let once = dedup(&ts, 8.0);
        ensure(dedup(&once, 8.0) == once, || {
            format!("dedup not idempotent on case {case}")
        })?;
    }
    Ok(())
}

fn dataset_round_trip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ShapeConfig::default();
    let m = generate_dataset(30, 5, dir.path(), &cfg).map_err(|e| e.to_string())?;
    let loaded = Manifest::load(dir.path()).map_err(|e| e.to_string())?;
    ensure(loaded.records == m.records, || "manifest changed on reload".into())?;
    for (i, r) in loaded.records.iter().enumerate() {
        let fresh = generate_sample(r.seed, &cfg).map_err(|e| e.to_string())?;
        let image = loaded.load_image(i).map_err(|e| e.to_string())?;
        ensure(
            image == fresh.image && r.node_coords == fresh.node_coords && r.adjacency == fresh.adjacency,
            || format!("sample {i} does not round-trip"),
        )?;
    }
    Ok(())
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let checks: [(&str, Check); 7] = [
        ("softmax", softmax_normalization(&mut rng)),
        ("dsnt", dsnt_checks(&mut rng)),
        ("drawing", drawing_checks(&mut rng)),
        ("similarity", similarity_checks(&mut rng)),
        ("aux", aux_checks()),
        ("metrics", metric_checks(&mut rng)),
        ("dataset", dataset_round_trip()),
    ];
    let failures: Vec<String> = checks
        .iter()
        .filter_map(|(name, c)| c.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    if failures.is_empty() {
        Outcome::Pass(format!(
            "all property groups hold ({:.1}s)",
            start.elapsed().as_secs_f64()
        ))
    } else {
        Outcome::Fail(failures.join("; "))
    }
}

// ------------------------------------------------------------------ criterion 5

fn criterion_5() -> Outcome {
    match smoke_run() {
        Ok(o) => o,
        Err(e) => Outcome::Fail(e),
    }
}

fn smoke_run() -> Result<Outcome, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data_dir = dir.path().join("data");
    // enough that the train split alone holds the smoke samples
    let data =
        generate_dataset(SMOKE_SAMPLES * 6 / 5, 0, &data_dir, &ShapeConfig::default()).map_err(|e| e.to_string())?;
    if data.indices(Split::Train).len() < SMOKE_SAMPLES {
        return Err("train split smaller than the smoke sample count".into());
    }
    let mut cfg = ExperimentConfig::default();
    cfg.data.dir = data_dir;
    cfg.optimizer.batch_size = SMOKE_BATCH;
    cfg.train_samples = Some(SMOKE_SAMPLES);
    cfg.val_samples = Some(0);
    cfg.schedule = Some(LrSchedule {
        epochs: SMOKE_EPOCHS,
        ..LrSchedule::self_supervised()
    });
    let (mut model, outcome) = train_self_supervised(&cfg, &data, 0, &dir.path().join("run"), &mut |l| {
        eprintln!("smoke epoch {} loss {:.5} ({:.0}s)", l.epoch, l.loss, l.seconds)
    })
    .map_err(|e| e.to_string())?;
    let losses: Vec<f64> = outcome.history.iter().map(|l| l.loss).collect();
    let decreasing = losses.windows(2).all(|w| w[1] < w[0]);

    let mut held_out: Vec<usize> = data.indices(Split::Val);
    held_out.extend(data.indices(Split::Test));
    held_out.truncate(SMOKE_HELD_OUT);
    let batch = data.load_batch(&held_out, cfg.n_max()).map_err(|e| e.to_string())?;
    let rec = model
        .reconstruct(&batch.images, Mode::Eval)
        .map_err(|e| e.to_string())?;
    let ssim_cfg = SsimConfig::default();
    let score_of = |img: &[f32], b: usize| -> Result<f64, String> {
        let pred: Vec<f64> = img.iter().map(|&v| v as f64).collect();
        let input: Vec<f64> = batch.images.sample(b).iter().map(|&v| v as f64).collect();
        ms_ssim(&pred, &input, 128, 128, 4, &ssim_cfg).map_err(|e| e.to_string())
    };
    let (mut refined, mut coarse, mut from_gt) = (0.0, 0.0, 0.0);
    for (b, &i) in held_out.iter().enumerate() {
        refined += score_of(rec.decoded.refined.sample(b), b)?;
        coarse += score_of(rec.decoded.coarse.sample(b), b)?;
        let r = &data.records[i];
        let g = PredictedGraph::from_ground_truth(&r.node_coords, &r.adjacency, r.canvas_size);
        let drawn = model
            .decoder
            .forward(&g.node_coords, &g.adjacency_probs, g.n_max(), Mode::Eval);
        from_gt += score_of(drawn.refined.sample(0), b)?;
    }
    let n = held_out.len() as f64;
    let (score, coarse, from_gt) = (refined / n, coarse / n, from_gt / n);
    let seconds = start.elapsed().as_secs_f64();
    let loss_text = losses.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>().join(" > ");
    Ok(check(
        decreasing && score > SMOKE_MIN_MS_SSIM && seconds <= SMOKE_MAX_SECONDS,
        format!(
            "epoch losses {loss_text}; held-out MS-SSIM {score:.3} (> {SMOKE_MIN_MS_SSIM}); {seconds:.0}s (<= {SMOKE_MAX_SECONDS:.0}s) \
             [info: coarse image {coarse:.3}, ground-truth graphs through the decoder {from_gt:.3}]"
        ),
    ))
}

// ------------------------------------------------------------------ criterion 6

fn criterion_6() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let result = generate_dataset(3000, 6, dir.path(), &ShapeConfig::default()).and_then(|m| {
        let cfg = MetricConfig {
            tol: 8.0,
            ..MetricConfig::default()
        };
        [Split::Train, Split::Val, Split::Test]
            .into_iter()
            .map(|s| evaluate_oracle(&m, s, &cfg))
            .collect::<graphae::Result<Vec<_>>>()
    });
    match result {
        Ok(reports) => {
            let samples: usize = reports.iter().map(|r| r.per_sample.len()).sum();
            let perfect = reports.iter().all(|r| r.f1 == 1.0);
            check(
                perfect,
                format!("F1 = 1.0 on all splits ({samples} ground-truth graphs, tol 8 px)"),
            )
        }
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

fn main() -> ExitCode {
    let [c1, c2, c3] = full_scale_outcomes();
    let outcomes = [
        (1, "F1 bands, ours and baseline", c1),
        (2, "node budget trend 4 > 5 > 6 > 8", c2),
        (3, "loss ablation ordering", c3),
        (4, "property suite", criterion_4()),
        (5, "smoke training", criterion_5()),
        (6, "oracle F1", criterion_6()),
    ];
    let mut failed = false;
    for (id, name, o) in &outcomes {
        report(*id, name, o);
        failed |= matches!(o, Outcome::Fail(_));
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
