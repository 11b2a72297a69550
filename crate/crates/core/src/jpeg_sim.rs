//! The lossy core of baseline JPEG: colour transform, 8x8 DCT-II,
//! quality-scaled quantization and reconstruction. No entropy coding and
//! no chroma subsampling; the result is a pixel image plus the quantized
//! coefficient indices.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster_io::RgbImage;

pub const QUALITY_RANGE: (u8, u8) = (75, 100);

/// Quality factor and block-grid origin. Block boundaries fall on columns
/// `x = grid.0 (mod 8)` and rows `y = grid.1 (mod 8)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JpegParams {
    pub quality: u8,
    pub grid: (u8, u8),
}

pub type Block = [f64; 64];

#[rustfmt::skip]
const LUMA_BASE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

#[rustfmt::skip]
const CHROMA_BASE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// Quantization step tables, row-major by (vertical, horizontal) frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTables {
    pub luma: [u16; 64],
    pub chroma: [u16; 64],
}

/// IJG quality scaling of the Annex K base tables.
pub fn quant_tables(quality: u8) -> Result<QuantTables> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Validation(format!(
            "JPEG quality {quality} outside 1..=100"
        )));
    }
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let scaled =
        |base: &[u16; 64]| base.map(|b| ((b as u32 * scale + 50) / 100).clamp(1, 255) as u16);
    Ok(QuantTables {
        luma: scaled(&LUMA_BASE),
        chroma: scaled(&CHROMA_BASE),
    })
}

pub(crate) fn cosine_basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let alpha = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = alpha * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        m
    })
}

/// Orthonormal separable 8x8 DCT-II. Input is row-major samples (`y*8+x`),
/// output row-major coefficients (`v*8+u`).
pub fn dct2_block(block: &Block) -> Block {
    let c = cosine_basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| c[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| c[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

pub fn idct2_block(coefs: &Block) -> Block {
    let c = cosine_basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|v| c[v][y] * coefs[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|u| c[u][x] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

// JFIF full-range BT.601
const RGB_TO_YCC: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [-0.168_736, -0.331_264, 0.5],
    [0.5, -0.418_688, -0.081_312],
];

fn ycc_to_rgb() -> &'static [[f64; 3]; 3] {
    static INV: OnceLock<[[f64; 3]; 3]> = OnceLock::new();
    INV.get_or_init(|| invert3(&RGB_TO_YCC))
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *v = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    inv
}

/// Quantized coefficient indices of every block, per YCbCr channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVolume {
    pub blocks_x: usize,
    pub blocks_y: usize,
    /// Replicated columns/rows inserted before the image to realize the grid.
    pub pad_left: usize,
    pub pad_top: usize,
    /// `channels[c][by * blocks_x + bx][v*8+u]`
    pub channels: [Vec<[i32; 64]>; 3],
}

impl CoefficientVolume {
    /// Fraction of AC indices equal to zero over all luma blocks.
    pub fn luma_zero_ac_fraction(&self) -> f64 {
        let blocks = &self.channels[0];
        let zeros: usize = blocks
            .iter()
            .map(|b| b[1..].iter().filter(|&&q| q == 0).count())
            .sum();
        zeros as f64 / (blocks.len() * 63).max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct JpegOutput {
    pub image: RgbImage,
    pub coefficients: CoefficientVolume,
}

/// Compresses and decompresses `image` in memory.
pub fn compress_decompress(image: &RgbImage, params: JpegParams) -> Result<JpegOutput> {
    let tables = quant_tables(params.quality)?;
    if params.grid.0 > 7 || params.grid.1 > 7 {
        return Err(Error::Validation(format!(
            "JPEG grid {:?} outside 0..8",
            params.grid
        )));
    }
    let (w, h) = image.dims();
    if w == 0 || h == 0 {
        return Err(Error::Undersized("empty image".into()));
    }
    let pad_left = (8 - params.grid.0 as usize) % 8;
    let pad_top = (8 - params.grid.1 as usize) % 8;
    let blocks_x = (w + pad_left).div_ceil(8);
    let blocks_y = (h + pad_top).div_ceil(8);

    let ycc: [Vec<f64>; 3] = std::array::from_fn(|c| {
        let m = RGB_TO_YCC[c];
        (0..w * h)
            .map(|i| {
                m[0] * image.planes[0][i] + m[1] * image.planes[1][i] + m[2] * image.planes[2][i]
            })
            .collect()
    });

    let mut decoded: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; w * h]);
    let mut volume: [Vec<[i32; 64]>; 3] = Default::default();
    for c in 0..3 {
        let table = if c == 0 { &tables.luma } else { &tables.chroma };
        // Cb/Cr are centred on zero already; shift luma only
        let shift = if c == 0 { 128.0 } else { 0.0 };
        let src = &ycc[c];
        let dst = &mut decoded[c];
        let mut blocks = Vec::with_capacity(blocks_x * blocks_y);
        for by in 0..blocks_y {
            for bx in 0..blocks_x {
                let mut block = [0.0; 64];
                for j in 0..8 {
                    let sy = (by * 8 + j).saturating_sub(pad_top).min(h - 1);
                    for i in 0..8 {
                        let sx = (bx * 8 + i).saturating_sub(pad_left).min(w - 1);
                        block[j * 8 + i] = src[sy * w + sx] - shift;
                    }
                }
                let coefs = dct2_block(&block);
                let mut indices = [0i32; 64];
                let mut dequant = [0.0; 64];
                for k in 0..64 {
                    let step = table[k] as f64;
                    let q = (coefs[k] / step).round();
                    indices[k] = q as i32;
                    dequant[k] = q * step;
                }
                let rec = idct2_block(&dequant);
                for j in 0..8 {
                    let py = by * 8 + j;
                    if py < pad_top || py - pad_top >= h {
                        continue;
                    }
                    for i in 0..8 {
                        let px = bx * 8 + i;
                        if px < pad_left || px - pad_left >= w {
                            continue;
                        }
                        dst[(py - pad_top) * w + (px - pad_left)] = rec[j * 8 + i] + shift;
                    }
                }
                blocks.push(indices);
            }
        }
        volume[c] = blocks;
    }

    // Cb/Cr carry the +128 offset in the usual convention; it cancels here
    let inv = ycc_to_rgb();
    let planes: [Vec<f64>; 3] = std::array::from_fn(|c| {
        let m = inv[c];
        (0..w * h)
            .map(|i| m[0] * decoded[0][i] + m[1] * decoded[1][i] + m[2] * decoded[2][i])
            .collect()
    });
    Ok(JpegOutput {
        image: RgbImage::from_planes(w, h, planes)?,
        coefficients: CoefficientVolume {
            blocks_x,
            blocks_y,
            pad_left,
            pad_top,
            channels: volume,
        },
    })
}

pub fn sample_quality<R: Rng + ?Sized>(rng: &mut R) -> u8 {
    rng.random_range(QUALITY_RANGE.0..=QUALITY_RANGE.1)
}

/// Uniform over the other 25 admissible qualities.
pub fn sample_quality_excluding<R: Rng + ?Sized>(rng: &mut R, exclude: u8) -> u8 {
    let (lo, hi) = QUALITY_RANGE;
    if !(lo..=hi).contains(&exclude) {
        return sample_quality(rng);
    }
    let q = rng.random_range(lo..hi);
    if q >= exclude {
        q + 1
    } else {
        q
    }
}

/// Uniform over the 64 grid origins, or over the 63 others when `exclude` is set.
pub fn sample_grid<R: Rng + ?Sized>(rng: &mut R, exclude: Option<(u8, u8)>) -> (u8, u8) {
    let idx = match exclude {
        None => rng.random_range(0..64u8),
        Some((ex, ey)) => {
            let skip = ex + 8 * ey;
            let i = rng.random_range(0..63u8);
            if i >= skip {
                i + 1
            } else {
                i
            }
        }
    };
    (idx % 8, idx / 8)
}

/// Quality uniform in `[75,100]`; grid uniform, or forced away from `avoid_grid`.
pub fn sample_jpeg<R: Rng + ?Sized>(rng: &mut R, avoid_grid: Option<(u8, u8)>) -> JpegParams {
    let quality = sample_quality(rng);
    let grid = sample_grid(rng, avoid_grid);
    JpegParams { quality, grid }
}

/// Peak signal-to-noise ratio over all channels, peak 255.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    a.check_same_dims(b)?;
    let n = (3 * a.len()) as f64;
    let mse = (0..3)
        .flat_map(|c| {
            a.planes[c]
                .iter()
                .zip(&b.planes[c])
                .map(|(x, y)| (x - y).powi(2))
        })
        .sum::<f64>()
        / n;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    })
}
