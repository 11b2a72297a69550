//! JPEG grid detection by counting null DCT coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{windowed_heatmap, Window};
use crate::error::{Error, Result};
use crate::jpeg_sim::cosine_basis;
use crate::raster_io::{Heatmap, RgbImage};

/// AC coefficients below this magnitude count as null.
pub const ZERO_THRESHOLD: f64 = 0.5;
/// The best origin must beat the others by this many standard deviations.
pub const SIGNIFICANCE_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ZeroProbeParams {
    pub window: Window,
}

#[derive(Debug, Clone)]
pub struct ZeroProbe {
    /// Most likely grid origin, `None` when no origin stands out.
    pub grid: Option<(u8, u8)>,
    /// Mean null-coefficient count per block for each origin, indexed `gx + 8 * gy`.
    pub counts: [f64; 64],
    /// How far the best origin is above the other 63, in standard deviations,
    /// on whichever of null counts and lattice coherence stands out more.
    pub z: f64,
    pub heatmap: Heatmap,
}

/// Sum of `f` over the 63 AC luma coefficients of the block whose top-left
/// pixel is `(x, y)`, for every `x <= w-8`, `y <= h-8`. Row-major, width `w-7`.
fn ac_statistic(luma: &[f64], w: usize, h: usize, f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let c = cosine_basis();
    let cw = w - 7;
    // horizontal 1-D transforms of every 8-sample run
    let rows: Vec<[f64; 8]> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let line = &luma[y * w..(y + 1) * w];
            (0..cw)
                .map(move |x| std::array::from_fn(|u| (0..8).map(|i| c[u][i] * line[x + i]).sum()))
        })
        .collect();
    let f = &f;
    (0..h - 7)
        .into_par_iter()
        .flat_map_iter(|y| {
            let rows = &rows;
            (0..cw).map(move |x| {
                let mut total = 0.0;
                for v in 0..8 {
                    for u in 0..8 {
                        if u == 0 && v == 0 {
                            continue;
                        }
                        let coef: f64 = (0..8).map(|j| c[v][j] * rows[(y + j) * cw + x][u]).sum();
                        total += f(coef);
                    }
                }
                total
            })
        })
        .collect()
}

/// Null AC coefficient count of the luma block whose top-left pixel is
/// `(x, y)`, for every `x <= w-8`, `y <= h-8`. Row-major, width `w-7`.
pub fn null_counts(luma: &[f64], w: usize, h: usize) -> Vec<u8> {
    ac_statistic(
        luma,
        w,
        h,
        |c| if c.abs() < ZERO_THRESHOLD { 1.0 } else { 0.0 },
    )
    .into_iter()
    .map(|n| n as u8)
    .collect()
}

/// Integer-lattice coherence `sum cos(2 pi c)` of the AC coefficients. Every
/// quantization step is an integer, so dequantized coefficients sit on the
/// integer lattice at the true grid even when none of them is null.
fn lattice_coherence(luma: &[f64], w: usize, h: usize) -> Vec<f64> {
    ac_statistic(luma, w, h, |c| (std::f64::consts::TAU * c).cos())
}

/// Mean null count per origin over the block positions in a rectangle.
fn origin_means<T: Copy + Into<f64>>(
    counts: &[T],
    cw: usize,
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
) -> [f64; 64] {
    let mut sum = [0f64; 64];
    let mut n = [0u64; 64];
    for y in y0..y1 {
        for x in x0..x1 {
            let o = (x % 8) + 8 * (y % 8);
            sum[o] += counts[y * cw + x].into();
            n[o] += 1;
        }
    }
    std::array::from_fn(|o| if n[o] == 0 { 0.0 } else { sum[o] / n[o] as f64 })
}

fn argmax(t: &[f64; 64]) -> usize {
    // ties resolve to the smallest index
    (0..64).fold(0, |best, i| if t[i] > t[best] { i } else { best })
}

/// Best origin and its z-score against the other 63.
fn standout(t: &[f64; 64]) -> (usize, f64) {
    let best = argmax(t);
    let others: Vec<f64> = (0..64).filter(|&i| i != best).map(|i| t[i]).collect();
    let mean = others.iter().sum::<f64>() / others.len() as f64;
    let sd =
        (others.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (others.len() - 1) as f64).sqrt();
    let excess = t[best] - mean;
    let z = if sd > 0.0 {
        excess / sd
    } else if excess > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    (best, z)
}

/// Estimates the JPEG grid origin and maps regions whose locally dominant
/// origin differs from the global one.
///
/// Each window scores `(Z_local - Z_global) / Z_local`, where `Z_local` is
/// the null count of the window's best origin and `Z_global` that of the
/// image-wide best origin inside the same window.
pub fn zero_grid_probe(image: &RgbImage, params: ZeroProbeParams) -> Result<ZeroProbe> {
    let (w, h) = image.dims();
    if w < 64 || h < 64 {
        return Err(Error::Undersized(format!(
            "zero probe needs at least 64x64 pixels, got {w}x{h}"
        )));
    }
    let luma = image.luminance();
    let counts = null_counts(&luma, w, h);
    let cw = w - 7;
    let totals = origin_means(&counts, cw, 0, 0, cw, h - 7);
    let (mut best, mut z) = standout(&totals);
    // near full quality few coefficients are null; lattice coherence still
    // reveals the grid there
    let coherence = origin_means(&lattice_coherence(&luma, w, h), cw, 0, 0, cw, h - 7);
    let (b, zc) = standout(&coherence);
    if zc > z {
        (best, z) = (b, zc);
    }
    let grid = (z > SIGNIFICANCE_Z).then_some(((best % 8) as u8, (best / 8) as u8));

    let heatmap = windowed_heatmap(w, h, params.window, |x0, y0, x1, y1| {
        // block positions whose top-left lies in the window
        let t = origin_means(&counts, cw, x0, y0, x1.min(cw), y1.min(h - 7));
        let local = t[argmax(&t)];
        if local <= 0.0 {
            0.0
        } else {
            (local - t[best]) / local
        }
    });
    Ok(ZeroProbe {
        grid,
        counts: totals,
        z,
        heatmap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg_sim::{compress_decompress, dct2_block, JpegParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fast_counts_match_direct_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (w, h) = (20, 13);
        let luma: Vec<f64> = (0..w * h).map(|_| rng.random_range(-2.0..2.0)).collect();
        let counts = null_counts(&luma, w, h);
        for y in 0..h - 7 {
            for x in 0..w - 7 {
                let block: [f64; 64] = std::array::from_fn(|k| luma[(y + k / 8) * w + x + k % 8]);
                let coefs = dct2_block(&block);
                let direct = coefs[1..].iter().filter(|c| c.abs() < 0.5).count();
                assert_eq!(counts[y * (w - 7) + x] as usize, direct);
            }
        }
    }

    #[test]
    fn undersized_rejected() {
        let img = RgbImage::new(63, 100);
        assert!(matches!(
            zero_grid_probe(&img, ZeroProbeParams::default()),
            Err(Error::Undersized(_))
        ));
    }

    #[test]
    fn constant_image_has_no_grid() {
        let img = RgbImage::filled(64, 64, [90.0; 3]);
        let p = zero_grid_probe(&img, ZeroProbeParams::default()).unwrap();
        assert_eq!(p.grid, None);
        assert!(p.heatmap.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn finds_grid_on_compressed_texture() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut img = RgbImage::new(128, 128);
        for p in img.planes.iter_mut() {
            p.iter_mut()
                .for_each(|v| *v = rng.random_range(40.0..200.0));
        }
        let out = compress_decompress(
            &img,
            JpegParams {
                quality: 80,
                grid: (5, 2),
            },
        )
        .unwrap();
        let p = zero_grid_probe(&out.image.quantized(), ZeroProbeParams::default()).unwrap();
        assert_eq!(p.grid, Some((5, 2)));
    }

    #[test]
    fn finds_grid_at_full_quality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut img = RgbImage::new(128, 128);
        for p in img.planes.iter_mut() {
            p.iter_mut()
                .for_each(|v| *v = rng.random_range(40.0..200.0));
        }
        let out = compress_decompress(
            &img,
            JpegParams {
                quality: 100,
                grid: (3, 6),
            },
        )
        .unwrap();
        let p = zero_grid_probe(&out.image.quantized(), ZeroProbeParams::default()).unwrap();
        assert_eq!(p.grid, Some((3, 6)));
    }

    #[test]
    fn uncompressed_noise_has_no_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut img = RgbImage::new(128, 128);
        for p in img.planes.iter_mut() {
            p.iter_mut()
                .for_each(|v| *v = rng.random_range(40.0..200.0f64).round());
        }
        let p = zero_grid_probe(&img, ZeroProbeParams::default()).unwrap();
        assert_eq!(p.grid, None);
    }
}
