//! Local noise-level inconsistency from the finest diagonal Haar band.

use serde::{Deserialize, Serialize};

use crate::raster_io::{Heatmap, RgbImage};

/// Median absolute deviation of a standard normal.
pub const MAD_TO_SIGMA: f64 = 0.6745;
/// Floor applied before taking logarithms of levels and estimates.
const LOG_FLOOR: f64 = 1e-3;

/// What a block's noise estimate is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseReference {
    /// The image-wide median estimate.
    Median,
    /// A per-channel power law `sigma = c * level^d` fitted robustly
    /// (Theil-Sen in log-log space) to all blocks. Signal-dependent noise
    /// seen through a gamma curve follows such a law, so residuals isolate
    /// blocks whose noise is off for their brightness.
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProbeParams {
    /// Side of the non-overlapping estimation blocks; rounded down to even.
    pub block: usize,
    pub reference: NoiseReference,
}

impl Default for NoiseProbeParams {
    fn default() -> Self {
        Self {
            block: 32,
            reference: NoiseReference::PowerLaw,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseProbe {
    pub blocks_x: usize,
    pub blocks_y: usize,
    /// Noise standard deviation per block averaged over channels, row-major.
    pub estimates: Vec<f64>,
    /// Absolute robust z-score of each block's deviation from the reference,
    /// spread over the block's pixels.
    pub heatmap: Heatmap,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-channel MAD noise estimate of one block from every 2x2 diagonal
/// difference, with the block's mean level per channel.
fn block_sigma(image: &RgbImage, x0: usize, y0: usize, x1: usize, y1: usize) -> [(f64, f64); 3] {
    let w = image.width;
    std::array::from_fn(|c| {
        let plane = &image.planes[c];
        let mut hh = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 - 1 {
            for x in x0..x1 - 1 {
                let a = plane[y * w + x];
                let b = plane[y * w + x + 1];
                let c = plane[(y + 1) * w + x];
                let d = plane[(y + 1) * w + x + 1];
                hh.push(((a - b - c + d) / 2.0).abs());
            }
        }
        let level = (y0..y1)
            .map(|y| plane[y * w + x0..y * w + x1].iter().sum::<f64>())
            .sum::<f64>()
            / ((x1 - x0) * (y1 - y0)) as f64;
        (median(&mut hh) / MAD_TO_SIGMA, level)
    })
}

/// Theil-Sen fit `y = i + s*x`; a flat line through the median when every
/// `x` coincides.
fn theil_sen(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut slopes = Vec::with_capacity(x.len() * x.len() / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[j] - x[i];
            if dx.abs() > 1e-9 {
                slopes.push((y[j] - y[i]) / dx);
            }
        }
    }
    let s = median(&mut slopes);
    let mut icepts: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - s * a).collect();
    (median(&mut icepts), s)
}

/// Estimates the noise level of every block and scores its deviation from
/// the reference. Trailing pixels that do not fill a block join the last
/// block of their row or column.
pub fn noise_probe(image: &RgbImage, params: NoiseProbeParams) -> NoiseProbe {
    let (w, h) = image.dims();
    let block = (params.block.max(2) / 2) * 2;
    let bx = (w / block).max(1);
    let by = (h / block).max(1);
    let span = |i: usize, n: usize, count: usize| {
        let start = i * block;
        let end = if i + 1 == count { n } else { start + block };
        (start.min(n), end)
    };
    let mut per_channel = Vec::with_capacity(bx * by);
    for j in 0..by {
        let (y0, y1) = span(j, h, by);
        for i in 0..bx {
            let (x0, x1) = span(i, w, bx);
            per_channel.push(if x1 - x0 < 2 || y1 - y0 < 2 {
                [(0.0, 0.0); 3]
            } else {
                block_sigma(image, x0, y0, x1, y1)
            });
        }
    }
    let estimates: Vec<f64> = per_channel
        .iter()
        .map(|b| b.iter().map(|(s, _)| s).sum::<f64>() / 3.0)
        .collect();

    let residuals: Vec<f64> = match params.reference {
        NoiseReference::Median => {
            let mut sorted = estimates.clone();
            let med = median(&mut sorted);
            estimates.iter().map(|e| e - med).collect()
        }
        NoiseReference::PowerLaw => {
            let ln = |v: f64| v.max(LOG_FLOOR).ln();
            let mut r = vec![0.0; per_channel.len()];
            for c in 0..3 {
                let x: Vec<f64> = per_channel.iter().map(|b| ln(b[c].1)).collect();
                let y: Vec<f64> = per_channel.iter().map(|b| ln(b[c].0)).collect();
                let (icept, slope) = theil_sen(&x, &y);
                for k in 0..r.len() {
                    r[k] += (y[k] - icept - slope * x[k]) / 3.0;
                }
            }
            r
        }
    };
    let mut sorted = residuals.clone();
    let centre = median(&mut sorted);
    let mut dev: Vec<f64> = residuals.iter().map(|r| (r - centre).abs()).collect();
    let scale = 1.4826 * median(&mut dev);
    let z: Vec<f64> = residuals
        .iter()
        .map(|r| {
            let d = (r - centre).abs();
            if scale > 0.0 {
                d / scale
            } else if d > 0.0 {
                // fewer than half the blocks deviate; flag them at unit strength
                1.0
            } else {
                0.0
            }
        })
        .collect();

    let mut values = vec![0.0f32; w * h];
    for j in 0..by {
        let (y0, y1) = span(j, h, by);
        for i in 0..bx {
            let (x0, x1) = span(i, w, bx);
            let v = z[j * bx + i] as f32;
            for y in y0..y1 {
                values[y * w + x0..y * w + x1].fill(v);
            }
        }
    }
    NoiseProbe {
        blocks_x: bx,
        blocks_y: by,
        estimates,
        heatmap: Heatmap {
            width: w,
            height: h,
            values,
        },
    }
}
