//! The full processing chain and the seeded random-stream scheme.
//!
//! Stage order: mosaic, raw noise, demosaic, white balance, gamma, JPEG.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cfa::{self, CfaPattern, DemosaicAlgo};
use crate::error::Result;
use crate::jpeg_sim::{self, CoefficientVolume, JpegParams};
use crate::raster_io::RgbImage;
use crate::raw_model::{self, NoiseParams};
use crate::tone::{self, ToneParams};

/// Complete parameterization of one processing chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseParams>,
    pub cfa_pattern: CfaPattern,
    pub demosaic: DemosaicAlgo,
    pub tone: ToneParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jpeg: Option<JpegParams>,
}

impl PipelineConfig {
    /// A chain built from the per-image common parameters with no noise and no JPEG.
    pub fn from_common(common: &CommonParams) -> Self {
        Self {
            noise: None,
            cfa_pattern: common.pattern,
            demosaic: common.demosaic,
            tone: ToneParams {
                wb: common.wb,
                gamma: common.gamma,
                k: 1.0,
            },
            jpeg: None,
        }
    }
}

/// Parameters drawn once per image and shared by every dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommonParams {
    pub pattern: CfaPattern,
    pub demosaic: DemosaicAlgo,
    pub gamma: f64,
    pub wb: [f64; 3],
}

/// Draws pattern, algorithm, gamma and then the white-balance gains, in that order.
pub fn sample_common_params<R: Rng + ?Sized>(rng: &mut R) -> CommonParams {
    let pattern = cfa::sample_pattern(rng);
    let demosaic = DemosaicAlgo::ALL[rng.random_range(0..DemosaicAlgo::ALL.len())];
    let gamma = tone::sample_gamma(rng);
    let wb = tone::sample_wb(rng);
    CommonParams {
        pattern,
        demosaic,
        gamma,
        wb,
    }
}

/// Derives independent random streams from a master seed.
///
/// Each stream is keyed by `(master_seed, image_id, purpose)`; distinct
/// purposes hash to unrelated ChaCha seeds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedScheme {
    pub master_seed: u64,
    pub image_id: String,
}

impl SeedScheme {
    pub fn new(master_seed: u64, image_id: impl Into<String>) -> Self {
        Self {
            master_seed,
            image_id: image_id.into(),
        }
    }

    pub fn seed_for(&self, purpose: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"trace-forge/stream/v1");
        h.update(self.master_seed.to_le_bytes());
        h.update((self.image_id.len() as u64).to_le_bytes());
        h.update(self.image_id.as_bytes());
        h.update((purpose.len() as u64).to_le_bytes());
        h.update(purpose.as_bytes());
        h.finalize().into()
    }

    pub fn stream(&self, purpose: &str) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed_for(purpose))
    }
}

/// A pipeline result with the side data some consumers need.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub image: RgbImage,
    /// Negative samples clamped before gamma.
    pub gamma_clamped: usize,
    pub coefficients: Option<CoefficientVolume>,
}

/// Runs every configured stage on a clean reference.
pub fn run_pipeline<R: Rng + ?Sized>(
    reference: &RgbImage,
    cfg: &PipelineConfig,
    rng: &mut R,
) -> Result<RgbImage> {
    Ok(run_pipeline_detailed(reference, cfg, rng)?.image)
}

pub fn run_pipeline_detailed<R: Rng + ?Sized>(
    reference: &RgbImage,
    cfg: &PipelineConfig,
    rng: &mut R,
) -> Result<PipelineOutput> {
    cfg.tone.validate()?;
    let mut raw = cfa::mosaic(reference, cfg.cfa_pattern);
    if let Some(noise) = cfg.noise {
        raw = raw_model::add_raw_noise(&raw, noise, rng);
    }
    let rgb = cfa::demosaic(&raw, cfg.cfa_pattern, cfg.demosaic)?;
    let balanced = tone::white_balance(&rgb, cfg.tone.wb)?;
    let toned = tone::gamma_correct(&balanced, cfg.tone.gamma, cfg.tone.k);
    let (image, coefficients) = match cfg.jpeg {
        Some(params) => {
            let out = jpeg_sim::compress_decompress(&toned.image, params)?;
            (out.image, Some(out.coefficients))
        }
        None => (toned.image, None),
    };
    Ok(PipelineOutput {
        image,
        gamma_clamped: toned.clamped,
        coefficients,
    })
}
