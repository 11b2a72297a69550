//! Shape of measured noise curves through white balance, gamma and JPEG.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trace_forge::cfa::{CfaPattern, DemosaicAlgo};
use trace_forge::jpeg_sim::JpegParams;
use trace_forge::pipeline::{run_pipeline, PipelineConfig};
use trace_forge::raster_io::{RawPlane, RgbImage};
use trace_forge::raw_model::{add_raw_noise, measure_noise_curve, NoiseParams};
use trace_forge::tone::ToneParams;

fn ramp(w: usize, h: usize) -> RgbImage {
    let mut img = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let v = 255.0 * x as f64 / (w - 1) as f64;
            img.set_pixel(x, y, [v; 3]);
        }
    }
    img
}

fn config(
    noise: Option<NoiseParams>,
    wb: [f64; 3],
    gamma: f64,
    jpeg: Option<JpegParams>,
) -> PipelineConfig {
    PipelineConfig {
        noise,
        cfa_pattern: CfaPattern::new(0, 0),
        demosaic: DemosaicAlgo::Bilinear,
        tone: ToneParams { wb, gamma, k: 1.0 },
        jpeg,
    }
}

/// Noisy and noiseless renders of `reference` through the same stages.
fn render(reference: &RgbImage, cfg: PipelineConfig, seed: u64) -> (RgbImage, RgbImage) {
    let noisy = run_pipeline(reference, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let clean_cfg = PipelineConfig { noise: None, ..cfg };
    let clean = run_pipeline(reference, &clean_cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (noisy, clean)
}

fn channel_std(a: &RgbImage, b: &RgbImage, c: usize) -> f64 {
    let d: Vec<f64> = a.planes[c]
        .iter()
        .zip(&b.planes[c])
        .map(|(x, y)| x - y)
        .collect();
    let m = d.iter().sum::<f64>() / d.len() as f64;
    (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / d.len() as f64).sqrt()
}

#[test]
fn variance_law_recovered_by_least_squares() {
    // sigma^2 = A + B*u sampled on a stepped plane, then an ordinary
    // least-squares line through (u, sample variance)
    let (a, b) = (1.5, 4.0);
    let levels: Vec<f64> = (0..16).map(|i| 8.0 + 15.0 * i as f64).collect();
    let per_level = 20_000;
    let mut data = Vec::with_capacity(levels.len() * per_level);
    for &u in &levels {
        data.extend(std::iter::repeat_n(u, per_level));
    }
    let plane = RawPlane::new(per_level, levels.len(), data).unwrap();
    let noisy = add_raw_noise(
        &plane,
        NoiseParams { a, b },
        &mut ChaCha8Rng::seed_from_u64(9),
    );

    let vars: Vec<f64> = (0..levels.len())
        .map(|row| {
            let xs = &noisy.data[row * per_level..(row + 1) * per_level];
            let m = xs.iter().sum::<f64>() / per_level as f64;
            xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (per_level - 1) as f64
        })
        .collect();
    let n = levels.len() as f64;
    let mx = levels.iter().sum::<f64>() / n;
    let my = vars.iter().sum::<f64>() / n;
    let sxy: f64 = levels
        .iter()
        .zip(&vars)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let sxx: f64 = levels.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    assert!((slope - b).abs() / b < 0.02, "slope {slope}");
    assert!((intercept - a).abs() < 1.5, "intercept {intercept}");
}

#[test]
fn white_balance_scales_channel_noise_by_its_gain() {
    let reference = RgbImage::filled(256, 256, [90.0; 3]);
    let noise = Some(NoiseParams { a: 2.0, b: 3.0 });
    let gains = [1.9, 1.0, 1.35];
    let (plain, plain_clean) = render(&reference, config(noise, [1.0; 3], 1.0, None), 4);
    let (balanced, balanced_clean) = render(&reference, config(noise, gains, 1.0, None), 4);
    for c in 0..3 {
        let ratio =
            channel_std(&balanced, &balanced_clean, c) / channel_std(&plain, &plain_clean, c);
        assert!(
            (ratio / gains[c] - 1.0).abs() < 0.05,
            "channel {c}: {ratio}"
        );
    }
}

#[test]
fn gamma_breaks_curve_monotonicity() {
    let reference = ramp(512, 256);
    let noise = Some(NoiseParams { a: 2.0, b: 6.0 });
    // a bin clearly above some bin on each side of it
    let peaked = |std: &[f64]| {
        (1..std.len()).any(|j| {
            let low = 0.95 * std[j];
            std[..j].iter().any(|&v| v < low) && std[j + 1..].iter().any(|&v| v < low)
        })
    };

    let (linear, linear_clean) = render(&reference, config(noise, [1.0; 3], 1.0, None), 5);
    let before = measure_noise_curve(&linear, &linear_clean, 16).unwrap();
    let pts: Vec<f64> = before.reliable_points(1).iter().map(|p| p.1).collect();
    assert!(pts.len() >= 10);
    assert!(!peaked(&pts) && pts[pts.len() - 1] > pts[0], "{pts:?}");

    let (bent, bent_clean) = render(&reference, config(noise, [1.0; 3], 2.0, None), 5);
    let after = measure_noise_curve(&bent, &bent_clean, 16).unwrap();
    let pts: Vec<f64> = after.reliable_points(1).iter().map(|p| p.1).collect();
    assert!(pts.len() >= 10);
    assert!(peaked(&pts), "{pts:?}");
}

#[test]
fn compression_lowers_measured_noise() {
    let reference = ramp(512, 256);
    let noise = Some(NoiseParams { a: 1.0, b: 4.0 });
    let (raw, clean) = render(&reference, config(noise, [1.4, 1.0, 1.6], 2.2, None), 6);
    let jpeg = Some(JpegParams {
        quality: 75,
        grid: (0, 0),
    });
    let (compressed, _) = render(&reference, config(noise, [1.4, 1.0, 1.6], 2.2, jpeg), 6);
    let before = measure_noise_curve(&raw, &clean, 16).unwrap().mean_std();
    let after = measure_noise_curve(&compressed, &clean, 16)
        .unwrap()
        .mean_std();
    assert!(after < before, "{after} vs {before}");
}
