use graphae_core::losses::aux::{aux_loss, overlap_penalty};
use graphae_core::losses::ssim::{ms_ssim, ms_ssim_with_grad, ssim, SsimConfig};
use graphae_core::shapes::{generate_sample, ShapeConfig, ShapeKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn image(seed: u64, side: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..side * side).map(|_| rng.random_range(0.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn ssim_is_one_on_identical_images_and_symmetric(s1 in any::<u64>(), s2 in any::<u64>()) {
        let cfg = SsimConfig::default();
        let (a, b) = (image(s1, 24), image(s2, 24));
        prop_assert!((ssim(&a, &a, 24, 24, &cfg).unwrap() - 1.0).abs() <= 1e-12);
        let ab = ssim(&a, &b, 24, 24, &cfg).unwrap();
        let ba = ssim(&b, &a, 24, 24, &cfg).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(ab <= 1.0);
    }

    #[test]
    fn overlap_penalty_ignores_channel_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, hw) = (5, 36);
        let maps: Vec<f64> = (0..c * hw).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut order: Vec<usize> = (0..c).collect();
        order.shuffle(&mut rng);
        let permuted: Vec<f64> = order.iter().flat_map(|&k| maps[k * hw..(k + 1) * hw].to_vec()).collect();
        let p = overlap_penalty(&maps, c).unwrap();
        let q = overlap_penalty(&permuted, c).unwrap();
        prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
        prop_assert!(p >= 0.0);
    }

    #[test]
    fn aux_term_only_fires_below_the_batch_mean(seed in any::<u64>(), sim in 0.0f64..1.0, mean in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps: Vec<f64> = (0..4 * 16).map(|_| rng.random_range(0.0..1.0)).collect();
        let l = aux_loss(&maps, 4, sim, mean).unwrap();
        if sim < mean {
            prop_assert_eq!(l, overlap_penalty(&maps, 4).unwrap());
        } else {
            prop_assert_eq!(l, 0.0);
        }
    }
}

#[test]
fn ms_ssim_is_one_on_identical_images_and_symmetric() {
    let cfg = SsimConfig::default();
    for seed in 0..4 {
        let a = generate_sample(seed, &ShapeConfig::default()).unwrap().image;
        let a: Vec<f64> = a.iter().map(|&v| v as f64).collect();
        let b = image(seed, 128);
        assert!((ms_ssim(&a, &a, 128, 128, 4, &cfg).unwrap() - 1.0).abs() <= 1e-12);
        let ab = ms_ssim(&a, &b, 128, 128, 4, &cfg).unwrap();
        let ba = ms_ssim(&b, &a, 128, 128, 4, &cfg).unwrap();
        assert!((ab - ba).abs() <= 1e-12);
    }
}

fn shuffled_score(seed: u64, rng: &mut ChaCha8Rng) -> (ShapeKind, f64) {
    let sample = generate_sample(seed, &ShapeConfig::default()).unwrap();
    let a: Vec<f64> = sample.image.iter().map(|&v| v as f64).collect();
    let mut b = a.clone();
    b.shuffle(rng);
    (
        sample.kind,
        ms_ssim(&a, &b, 128, 128, 4, &SsimConfig::default()).unwrap(),
    )
}

#[test]
fn pixel_shuffle_destroys_ms_ssim() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    // sample 0 is a triangle
    let (kind, s) = shuffled_score(0, &mut rng);
    assert_eq!(kind, ShapeKind::Triangle);
    assert!(s < 0.2, "{s}");
    for seed in 1..30 {
        let (kind, s) = shuffled_score(seed, &mut rng);
        // mostly-black windows agree after shuffling, so sparse line drawings keep more score
        let bound = if kind == ShapeKind::Rectangle { 0.2 } else { 0.75 };
        assert!(s < bound, "seed {seed} ({kind:?}): {s}");
    }
}

#[test]
fn four_scale_ms_ssim_gradient_matches_central_differences() {
    let cfg = SsimConfig::default();
    let target: Vec<f64> = generate_sample(2, &ShapeConfig::default())
        .unwrap()
        .image
        .iter()
        .map(|&v| v as f64)
        .collect();
    let noise = image(3, 128);
    let pred: Vec<f64> = target.iter().zip(&noise).map(|(t, n)| 0.7 * t + 0.3 * n).collect();
    let (_, grad) = ms_ssim_with_grad(&pred, &target, 128, 128, 4, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..12 {
        let k = rng.random_range(0..128 * 128);
        let eps = 1e-5;
        let (mut p, mut m) = (pred.clone(), pred.clone());
        p[k] += eps;
        m[k] -= eps;
        let fd = (ms_ssim(&p, &target, 128, 128, 4, &cfg).unwrap() - ms_ssim(&m, &target, 128, 128, 4, &cfg).unwrap())
            / (2.0 * eps);
        let scale = fd.abs().max(grad[k].abs()).max(1e-8);
        assert!(
            (fd - grad[k]).abs() / scale <= 1e-3,
            "pixel {k}: fd {fd} analytic {}",
            grad[k]
        );
    }
}

#[test]
fn disjoint_maps_have_no_overlap() {
    let mut maps = vec![0.0f64; 3 * 9];
    maps[0] = 1.0;
    maps[9 + 4] = 1.0;
    maps[18 + 8] = 1.0;
    assert_eq!(overlap_penalty(&maps, 3).unwrap(), 0.0);
}
