//! Half-resolution references, signal-dependent sensor noise and noise-curve measurement.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster_io::{RawPlane, RgbImage};

/// Raw noise law `variance = a + b * u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub a: f64,
    pub b: f64,
}

impl NoiseParams {
    pub const A_RANGE: (f64, f64) = (0.0, 2.0);
    pub const B_RANGE: (f64, f64) = (0.0, 6.0);

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Validation(format!(
                "noise parameters must be finite and non-negative, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn variance(&self, u: f64) -> f64 {
        self.a + self.b * u.max(0.0)
    }
}

/// Collapses each 2x2 Bayer quad into one RGB pixel: red and blue samples
/// are taken as is, the two greens are averaged.
///
/// An odd trailing row or column is dropped.
pub fn half_sample(raw: &RawPlane) -> Result<RgbImage> {
    let layout = raw
        .native_cfa
        .ok_or_else(|| Error::Config("raw plane has no declared CFA layout".into()))?;
    let (w, h) = (raw.width / 2, raw.height / 2);
    if w == 0 || h == 0 {
        return Err(Error::Undersized(format!(
            "raw plane {}x{} has no complete Bayer quad",
            raw.width, raw.height
        )));
    }
    let mut out = RgbImage::new(w, h);
    for qy in 0..h {
        for qx in 0..w {
            let mut rgb = [0.0; 3];
            for (ox, oy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let (x, y) = (2 * qx + ox, 2 * qy + oy);
                let v = raw.get(x, y);
                match layout.channel_at(x, y) {
                    1 => rgb[1] += v / 2.0,
                    c => rgb[c] = v,
                }
            }
            out.set_pixel(qx, qy, rgb);
        }
    }
    Ok(out)
}

/// Adds independent Gaussian noise of variance `a + b*u` to every sample.
///
/// Negative intensities count as zero for the variance. The result is not
/// clipped.
pub fn add_raw_noise<R: Rng + ?Sized>(
    mosaic: &RawPlane,
    params: NoiseParams,
    rng: &mut R,
) -> RawPlane {
    let data = mosaic
        .data
        .iter()
        .map(|&u| {
            let sigma = params.variance(u).sqrt();
            let z: f64 = StandardNormal.sample(rng);
            u + sigma * z
        })
        .collect();
    RawPlane {
        width: mosaic.width,
        height: mosaic.height,
        data,
        native_cfa: mosaic.native_cfa,
    }
}

const MAX_NOISE_PAIR_ATTEMPTS: usize = 1000;

/// Draws two noise laws whose variance curves never cross for positive
/// intensities: `a` and `b` move in the same direction between the pair.
pub fn sample_noise_pair<R: Rng + ?Sized>(rng: &mut R) -> Result<(NoiseParams, NoiseParams)> {
    let (a_lo, a_hi) = NoiseParams::A_RANGE;
    let (b_lo, b_hi) = NoiseParams::B_RANGE;
    for _ in 0..MAX_NOISE_PAIR_ATTEMPTS {
        let a0 = rng.random_range(a_lo..a_hi);
        let a1 = rng.random_range(a_lo..a_hi);
        let b0 = rng.random_range(b_lo..b_hi);
        let b1 = rng.random_range(b_lo..b_hi);
        if (a1 - a0) * (b1 - b0) > 0.0 {
            return Ok((NoiseParams { a: a0, b: b0 }, NoiseParams { a: a1, b: b1 }));
        }
    }
    Err(Error::Sampling(format!(
        "no ordered noise pair after {MAX_NOISE_PAIR_ATTEMPTS} attempts"
    )))
}

/// Per-channel residual standard deviation as a function of reference intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCurve {
    pub bin_centers: Vec<f64>,
    /// `std[channel][bin]`
    pub std: [Vec<f64>; 3],
    pub counts: [Vec<usize>; 3],
    pub min_count: usize,
}

impl NoiseCurve {
    /// Default per-bin sample count under which a bin is unreliable.
    pub const DEFAULT_MIN_COUNT: usize = 50;

    pub fn is_reliable(&self, channel: usize, bin: usize) -> bool {
        self.counts[channel][bin] >= self.min_count
    }

    /// Reliable `(center, std)` points of one channel.
    pub fn reliable_points(&self, channel: usize) -> Vec<(f64, f64)> {
        (0..self.bin_centers.len())
            .filter(|&b| self.is_reliable(channel, b))
            .map(|b| (self.bin_centers[b], self.std[channel][b]))
            .collect()
    }

    /// Count-weighted mean standard deviation over reliable bins of all channels.
    pub fn mean_std(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in 0..3 {
            for b in 0..self.bin_centers.len() {
                if self.is_reliable(c, b) {
                    num += self.std[c][b] * self.counts[c][b] as f64;
                    den += self.counts[c][b] as f64;
                }
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}

/// Bins `noisy - reference` by reference intensity over `[0,255]`.
pub fn measure_noise_curve(
    noisy: &RgbImage,
    reference: &RgbImage,
    nbins: usize,
) -> Result<NoiseCurve> {
    measure_noise_curve_with(noisy, reference, nbins, NoiseCurve::DEFAULT_MIN_COUNT)
}

pub fn measure_noise_curve_with(
    noisy: &RgbImage,
    reference: &RgbImage,
    nbins: usize,
    min_count: usize,
) -> Result<NoiseCurve> {
    noisy.check_same_dims(reference)?;
    if nbins == 0 {
        return Err(Error::Config("noise curve needs at least one bin".into()));
    }
    let width = 255.0 / nbins as f64;
    let bin_centers = (0..nbins).map(|b| (b as f64 + 0.5) * width).collect();
    let mut std: [Vec<f64>; 3] = Default::default();
    let mut counts: [Vec<usize>; 3] = Default::default();
    for c in 0..3 {
        let mut n = vec![0usize; nbins];
        let mut sum = vec![0.0; nbins];
        let mut sum2 = vec![0.0; nbins];
        for (&r, &v) in reference.planes[c].iter().zip(&noisy.planes[c]) {
            let b = ((r / width).floor().max(0.0) as usize).min(nbins - 1);
            let d = v - r;
            n[b] += 1;
            sum[b] += d;
            sum2[b] += d * d;
        }
        std[c] = (0..nbins)
            .map(|b| {
                if n[b] < 2 {
                    return 0.0;
                }
                let m = sum[b] / n[b] as f64;
                ((sum2[b] / n[b] as f64 - m * m).max(0.0) * n[b] as f64 / (n[b] - 1) as f64).sqrt()
            })
            .collect();
        counts[c] = n;
    }
    Ok(NoiseCurve {
        bin_centers,
        std,
        counts,
        min_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::CfaPattern;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn half_sample_preserves_constants() {
        let raw = RawPlane::filled(8, 6, 77.0).with_cfa(CfaPattern::new(1, 1));
        let out = half_sample(&raw).unwrap();
        assert_eq!(out.dims(), (4, 3));
        assert!(out.planes.iter().flatten().all(|&v| v == 77.0));
    }

    #[test]
    fn half_sample_reads_rggb_quad() {
        let raw = RawPlane::new(2, 2, vec![10.0, 20.0, 40.0, 30.0])
            .unwrap()
            .with_cfa(CfaPattern::new(0, 0));
        let out = half_sample(&raw).unwrap();
        assert_eq!(out.pixel(0, 0), [10.0, 30.0, 30.0]);
    }

    #[test]
    fn half_sample_averages_checkerboard_green() {
        // greens alternate 0/50 inside every quad
        let mut raw = RawPlane::filled(6, 4, 99.0).with_cfa(CfaPattern::new(0, 0));
        for y in 0..4 {
            for x in 0..6 {
                if (x + y) % 2 == 1 {
                    raw.data[y * 6 + x] = if y % 2 == 0 { 0.0 } else { 50.0 };
                }
            }
        }
        let out = half_sample(&raw).unwrap();
        assert!(out.planes[1].iter().all(|&g| g == 25.0));
    }

    #[test]
    fn half_sample_drops_odd_edges_and_needs_layout() {
        let raw = RawPlane::filled(5, 3, 1.0);
        assert!(matches!(half_sample(&raw), Err(Error::Config(_))));
        let out = half_sample(&raw.with_cfa(CfaPattern::new(0, 1))).unwrap();
        assert_eq!(out.dims(), (2, 1));
    }

    #[test]
    fn zero_noise_is_identity() {
        let raw = RawPlane::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = add_raw_noise(&raw, NoiseParams::new(0.0, 0.0).unwrap(), &mut rng);
        assert_eq!(out.data, raw.data);
    }

    #[test]
    fn noise_variance_follows_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let plane = RawPlane::filled(1000, 100, 100.0);
        let out = add_raw_noise(&plane, NoiseParams::new(2.0, 6.0).unwrap(), &mut rng);
        let v = variance(&out.data);
        assert!((v / 602.0 - 1.0).abs() < 0.02, "variance {v}");

        let plane = RawPlane::filled(1000, 100, 0.0);
        let out = add_raw_noise(&plane, NoiseParams::new(2.0, 0.0).unwrap(), &mut rng);
        let v = variance(&out.data);
        assert!((v / 2.0 - 1.0).abs() < 0.03, "variance {v}");
    }

    #[test]
    fn noise_is_seed_reproducible() {
        let plane = RawPlane::filled(64, 64, 50.0);
        let p = NoiseParams::new(1.0, 3.0).unwrap();
        let a = add_raw_noise(&plane, p, &mut ChaCha8Rng::seed_from_u64(9));
        let b = add_raw_noise(&plane, p, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn noise_pairs_are_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let (p0, p1) = sample_noise_pair(&mut rng).unwrap();
            assert!((p1.a - p0.a) * (p1.b - p0.b) > 0.0);
            assert!(p0 != p1);
            for u in [0.5, 10.0, 128.0, 255.0] {
                assert!((p1.variance(u) - p0.variance(u)).signum() == (p1.a - p0.a).signum());
            }
        }
    }

    #[test]
    fn identical_images_give_flat_zero_curve() {
        let img = RgbImage::filled(16, 16, [30.0, 60.0, 90.0]);
        let curve = measure_noise_curve(&img, &img, 8).unwrap();
        assert!(curve.std.iter().flatten().all(|&s| s == 0.0));
    }

    #[test]
    fn curve_rejects_dimension_mismatch() {
        let a = RgbImage::new(4, 4);
        let b = RgbImage::new(4, 5);
        assert!(matches!(
            measure_noise_curve(&a, &b, 4),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
