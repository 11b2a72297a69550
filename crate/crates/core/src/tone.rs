//! White balance and gamma correction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster_io::RgbImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneParams {
    /// Per-channel multipliers; green is the reference and stays at 1.
    pub wb: [f64; 3],
    pub gamma: f64,
    pub k: f64,
}

impl ToneParams {
    pub const GAMMA_RANGE: (f64, f64) = (1.0, 2.5);
    pub const WB_RANGE: (f64, f64) = (1.1, 2.2);

    pub fn identity() -> Self {
        Self {
            wb: [1.0; 3],
            gamma: 1.0,
            k: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.wb.iter().any(|&g| !(g >= 1.0) || !g.is_finite()) {
            return Err(Error::Validation(format!(
                "white-balance gains must be >= 1, got {:?}",
                self.wb
            )));
        }
        if self.wb[1] != 1.0 {
            return Err(Error::Validation("green gain must be exactly 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) || !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Validation(format!(
                "gamma and k must be positive, got gamma={} k={}",
                self.gamma, self.k
            )));
        }
        Ok(())
    }
}

/// Red and blue gains for one image, green fixed to 1.
pub fn sample_wb<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let (lo, hi) = ToneParams::WB_RANGE;
    let r = rng.random_range(lo..hi);
    let b = rng.random_range(lo..hi);
    [r, 1.0, b]
}

pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let (lo, hi) = ToneParams::GAMMA_RANGE;
    rng.random_range(lo..=hi)
}

/// Scales each channel by its gain. No clipping.
pub fn white_balance(image: &RgbImage, gains: [f64; 3]) -> Result<RgbImage> {
    if let Some(g) = gains.iter().find(|&&g| !(g >= 1.0)) {
        return Err(Error::Validation(format!("white-balance gain {g} < 1")));
    }
    let mut out = image.clone();
    for (plane, g) in out.planes.iter_mut().zip(gains) {
        if g != 1.0 {
            plane.iter_mut().for_each(|v| *v *= g);
        }
    }
    Ok(out)
}

/// Output of [`gamma_correct`].
#[derive(Debug, Clone)]
pub struct GammaOutput {
    pub image: RgbImage,
    /// Negative input samples clamped to zero before the power law.
    pub clamped: usize,
}

/// Normalized power law `u -> k * 255 * (u/255)^(1/gamma)`.
///
/// Negative samples are clamped to zero (and counted) unless `gamma == 1`.
pub fn gamma_correct(image: &RgbImage, gamma: f64, k: f64) -> GammaOutput {
    let mut clamped = 0;
    let mut out = image.clone();
    let exponent = 1.0 / gamma;
    // the linear law is defined for negative values, so only a true power clamps
    let identity = gamma == 1.0 && k == 1.0;
    for plane in out.planes.iter_mut() {
        for v in plane.iter_mut() {
            if *v < 0.0 && gamma != 1.0 {
                clamped += 1;
                *v = 0.0;
            }
            if !identity {
                *v = k * 255.0 * (*v / 255.0).powf(exponent);
            }
        }
    }
    GammaOutput {
        image: out,
        clamped,
    }
}
