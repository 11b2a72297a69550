//! Distributions of the dataset recipes' random draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use trace_forge::cfa::sample_pattern;
use trace_forge::forgery::{sample_hybrid, sample_pair, DatasetKind};
use trace_forge::jpeg_sim::sample_grid;
use trace_forge::pipeline::sample_common_params;
use trace_forge::raw_model::{sample_noise_pair, NoiseParams};

const DRAWS: usize = 10_000;

/// Two-sided Kolmogorov-Smirnov statistic against U(lo, hi).
fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn chi_square_p(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64)
        .unwrap()
        .cdf(stat)
}

#[test]
fn noise_pair_marginals_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let pairs: Vec<(NoiseParams, NoiseParams)> = (0..DRAWS)
        .map(|_| sample_noise_pair(&mut rng).unwrap())
        .collect();
    // 1% critical value of the KS statistic
    let critical = 1.63 / (DRAWS as f64).sqrt();
    let (a_lo, a_hi) = NoiseParams::A_RANGE;
    let (b_lo, b_hi) = NoiseParams::B_RANGE;
    for (name, xs, lo, hi) in [
        (
            "A0",
            pairs.iter().map(|p| p.0.a).collect::<Vec<_>>(),
            a_lo,
            a_hi,
        ),
        ("A1", pairs.iter().map(|p| p.1.a).collect(), a_lo, a_hi),
        ("B0", pairs.iter().map(|p| p.0.b).collect(), b_lo, b_hi),
    ] {
        let d = ks_uniform(xs, lo, hi);
        assert!(d < critical, "{name}: D = {d}");
    }
    assert!(pairs.iter().all(|(p, q)| (q.a - p.a) * (q.b - p.b) > 0.0));
}

#[test]
fn patterns_and_grids_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut patterns = [0usize; 4];
    let mut grids = [0usize; 64];
    for _ in 0..DRAWS {
        patterns[sample_pattern(&mut rng).index()] += 1;
        let (gx, gy) = sample_grid(&mut rng, None);
        grids[gx as usize + 8 * gy as usize] += 1;
    }
    assert!(chi_square_p(&patterns) > 0.001, "{patterns:?}");
    assert!(chi_square_p(&grids) > 0.001);
}

#[test]
fn independent_grids_differ_sixty_three_times_in_sixty_four() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let differ = (0..DRAWS)
        .filter(|_| sample_grid(&mut rng, None) != sample_grid(&mut rng, None))
        .count();
    assert!((differ as f64 / DRAWS as f64 - 63.0 / 64.0).abs() < 0.005);
}

#[test]
fn hybrid_stage_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (mut no_jpeg, mut noise_changed, mut cfa_changed) = (0, 0, 0);
    for _ in 0..DRAWS {
        let common = sample_common_params(&mut rng);
        let (c0, c1) = sample_hybrid(&common, &mut rng).unwrap();
        no_jpeg += usize::from(c0.jpeg == c1.jpeg);
        noise_changed += usize::from(c0.noise != c1.noise);
        cfa_changed += usize::from(c0.cfa_pattern != c1.cfa_pattern || c0.demosaic != c1.demosaic);
    }
    let rate = |n: usize| n as f64 / DRAWS as f64;
    assert!((rate(no_jpeg) - 1.0 / 6.0).abs() < 0.02);
    assert!((rate(noise_changed) - 5.0 / 6.0).abs() < 0.02);
    assert!((rate(cfa_changed) - 5.0 / 6.0).abs() < 0.02);
}

#[test]
fn specific_recipes_keep_their_trace_distinct() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..2_000 {
        let common = sample_common_params(&mut rng);
        let (q0, q1) = sample_pair(DatasetKind::JpegQuality, &common, &mut rng).unwrap();
        assert_ne!(q0.jpeg.unwrap().quality, q1.jpeg.unwrap().quality);
        let (g0, g1) = sample_pair(DatasetKind::JpegGrid, &common, &mut rng).unwrap();
        let (j0, j1) = (g0.jpeg.unwrap(), g1.jpeg.unwrap());
        assert_eq!(j0.quality, j1.quality);
        assert_ne!(j0.grid, j1.grid);
        let (p0, p1) = sample_pair(DatasetKind::CfaGrid, &common, &mut rng).unwrap();
        assert_ne!(p0.cfa_pattern, p1.cfa_pattern);
        assert_eq!(p0.demosaic, p1.demosaic);
        let (a0, a1) = sample_pair(DatasetKind::CfaAlgo, &common, &mut rng).unwrap();
        assert_ne!(a0.demosaic, a1.demosaic);
    }
}
