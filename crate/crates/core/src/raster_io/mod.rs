//! In-memory raster types and their portable on-disk encodings.
//!
//! Every intensity in the pipeline is an `f64` on the nominal `[0, 255]`
//! scale. Values may leave that range mid-pipeline (noise, white balance);
//! clipping happens only when an image is quantized for export.

mod pfm;
mod pnm;

pub use pfm::{decode_pfm, encode_pfm, read_heatmap_pfm, write_heatmap_pfm};
pub use pnm::{
    decode_mask_pgm, decode_pgm16, decode_ppm8, encode_mask_pgm, encode_ppm8, read_mask_pgm,
    read_pgm16, read_ppm8, write_mask_pgm, write_pgm16, write_ppm8,
};

use crate::cfa::CfaPattern;
use crate::error::{Error, Result};

/// Rounds half away from zero, then clips to the 8-bit range.
pub fn quantize_u8(v: f64) -> u8 {
    // f64::round already rounds half away from zero
    let r = v.round();
    if r.is_nan() || r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}

/// Single-channel linear sensor plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    /// Bayer layout of an ingested plane, if known.
    pub native_cfa: Option<CfaPattern>,
}

impl RawPlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Validation(format!(
                "raw plane data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            native_cfa: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
            native_cfa: None,
        }
    }

    pub fn with_cfa(mut self, pattern: CfaPattern) -> Self {
        self.native_cfa = Some(pattern);
        self
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Channel index into an [`RgbImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Red = 0,
    Green = 1,
    Blue = 2,
}

/// Three-plane colour image, planar storage.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub planes: [Vec<f64>; 3],
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            planes: [vec![rgb[0]; n], vec![rgb[1]; n], vec![rgb[2]; n]],
        }
    }

    pub fn from_planes(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(Error::Validation(format!(
                "colour planes do not all match {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    /// Replicates a single plane into all three channels.
    pub fn from_gray(plane: &RawPlane) -> Self {
        Self {
            width: plane.width,
            height: plane.height,
            planes: [plane.data.clone(), plane.data.clone(), plane.data.clone()],
        }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.planes[c][y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        self.planes[c][y * self.width + x] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = y * self.width + x;
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = y * self.width + x;
        for (c, v) in rgb.into_iter().enumerate() {
            self.planes[c][i] = v;
        }
    }

    /// Export quantization: round half away from zero and clip every sample to `[0,255]`.
    pub fn quantized(&self) -> RgbImage {
        let planes = self
            .planes
            .clone()
            .map(|p| p.into_iter().map(|v| quantize_u8(v) as f64).collect());
        RgbImage {
            width: self.width,
            height: self.height,
            planes,
        }
    }

    /// BT.601 luma.
    pub fn luminance(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                0.299 * self.planes[0][i] + 0.587 * self.planes[1][i] + 0.114 * self.planes[2][i]
            })
            .collect()
    }

    pub(crate) fn check_same_dims(&self, other: &RgbImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }
}

/// Per-pixel detection confidence. Stored as `f32` so PFM round trips are bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Validation(format!(
                "heatmap length {} does not match {width}x{height}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width,
            height: mask.height,
            values: mask.data.iter().map(|&m| m as f32).collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }
}

/// Forgery mask, 1 = forged.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Validation(format!(
                "mask length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Validation("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn area_fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.area() as f64 / self.data.len() as f64
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 1 - v.min(1)).collect(),
        }
    }

    /// Nearest-neighbour resize, result re-binarized.
    pub fn resize_nearest(&self, width: usize, height: usize) -> BinaryMask {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let mut data = vec![0u8; width * height];
        for y in 0..height {
            let sy = ((y * self.height) / height.max(1)).min(self.height.saturating_sub(1));
            for x in 0..width {
                let sx = ((x * self.width) / width.max(1)).min(self.width.saturating_sub(1));
                data[y * width + x] = u8::from(self.get(sx, sy));
            }
        }
        BinaryMask {
            width,
            height,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_rounds_half_away_and_clips() {
        assert_eq!(quantize_u8(255.7), 255);
        assert_eq!(quantize_u8(-3.0), 0);
        assert_eq!(quantize_u8(128.4), 128);
        assert_eq!(quantize_u8(127.5), 128);
        assert_eq!(quantize_u8(-0.5), 0);
        assert_eq!(quantize_u8(f64::NAN), 0);
    }

    #[test]
    fn mask_rejects_non_binary_values() {
        assert!(BinaryMask::new(2, 1, vec![0, 2]).is_err());
        assert!(BinaryMask::new(2, 1, vec![0, 1]).is_ok());
    }

    #[test]
    fn nearest_resize_keeps_binary_values() {
        let m = BinaryMask::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        let r = m.resize_nearest(4, 4);
        assert_eq!(r.area(), 8);
        assert!(r.get(0, 0) && r.get(1, 1) && r.get(3, 3) && !r.get(3, 0));
    }
}
