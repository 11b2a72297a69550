//! Lightweight trace detectors used to check that generated forgeries carry
//! the trace they were built with.
//!
//! All probes are deterministic. Each returns a heatmap (higher means more
//! likely forged) and, where it makes sense, a global estimate of the trace.

mod cfa;
mod noise;
mod zero;

pub use cfa::{cfa_probe, CfaProbe, CfaProbeParams};
pub use noise::{noise_probe, NoiseProbe, NoiseProbeParams, NoiseReference};
pub use zero::{null_counts, zero_grid_probe, ZeroProbe, ZeroProbeParams};

use serde::{Deserialize, Serialize};

use crate::raster_io::Heatmap;

/// Sliding localization window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub size: usize,
    pub stride: usize,
}

impl Default for Window {
    fn default() -> Self {
        Self {
            size: 64,
            stride: 32,
        }
    }
}

/// Window origins along an axis of length `n`; the last window is flush
/// with the far edge.
fn starts(n: usize, size: usize, stride: usize) -> Vec<usize> {
    if n <= size {
        return vec![0];
    }
    let mut s: Vec<usize> = (0..=n - size).step_by(stride.max(1)).collect();
    if *s.last().unwrap() != n - size {
        s.push(n - size);
    }
    s
}

/// Averages a per-window score over every window covering each pixel.
fn windowed_heatmap<F>(width: usize, height: usize, win: Window, mut score: F) -> Heatmap
where
    F: FnMut(usize, usize, usize, usize) -> f64,
{
    let mut sum = vec![0.0f64; width * height];
    let mut cover = vec![0u32; width * height];
    let (ww, wh) = (win.size.min(width), win.size.min(height));
    for &y0 in &starts(height, win.size, win.stride) {
        for &x0 in &starts(width, win.size, win.stride) {
            let s = score(x0, y0, x0 + ww, y0 + wh);
            for y in y0..y0 + wh {
                for x in x0..x0 + ww {
                    sum[y * width + x] += s;
                    cover[y * width + x] += 1;
                }
            }
        }
    }
    Heatmap {
        width,
        height,
        values: sum
            .iter()
            .zip(&cover)
            .map(|(s, &c)| if c == 0 { 0.0 } else { (s / c as f64) as f32 })
            .collect(),
    }
}
