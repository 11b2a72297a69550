//! CFA phase detection by re-interpolation.
//!
//! Sampled pixels carry values no interpolator can predict, while
//! interpolated ones are functions of their sampled neighbours. Re-mosaicing
//! the image under the true phase and demosaicing again therefore nearly
//! reproduces it, whereas a wrong phase treats interpolated values as samples
//! and discards the real ones. Every `(pattern, algorithm)` pair of the
//! built-in family is tried.

use serde::{Deserialize, Serialize};

use super::{windowed_heatmap, Window};
use crate::cfa::{demosaic, mosaic, CfaPattern, DemosaicAlgo, MIN_DEMOSAIC_SIDE};
use crate::raster_io::{Heatmap, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CfaProbeParams {
    pub window: Window,
}

#[derive(Debug, Clone)]
pub struct CfaProbe {
    /// Pattern that best explains the image, `None` on a tie.
    pub pattern: Option<CfaPattern>,
    /// Demosaicer of the best hypothesis, `None` on a tie.
    pub algorithm: Option<DemosaicAlgo>,
    /// Mean absolute re-interpolation error of the best algorithm for each
    /// pattern, indexed by [`CfaPattern::index`].
    pub errors: [f64; 4],
    pub heatmap: Heatmap,
}

const HYPOTHESES: usize = 4 * DemosaicAlgo::ALL.len();

fn hypothesis(i: usize) -> (CfaPattern, DemosaicAlgo) {
    (
        CfaPattern::from_index(i / DemosaicAlgo::ALL.len()),
        DemosaicAlgo::ALL[i % DemosaicAlgo::ALL.len()],
    )
}

/// Per-pixel absolute re-interpolation error, summed over channels.
fn error_map(image: &RgbImage, pattern: CfaPattern, algo: DemosaicAlgo) -> Vec<f64> {
    let re = demosaic(&mosaic(image, pattern), pattern, algo)
        .expect("probe input was checked against the demosaic minimum");
    (0..image.len())
        .map(|i| {
            (0..3)
                .map(|c| (re.planes[c][i] - image.planes[c][i]).abs())
                .sum()
        })
        .collect()
}

/// Index of the unique minimum, if any.
fn unique_min(v: &[f64]) -> Option<usize> {
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut at = (0..v.len()).filter(|&i| v[i] == min);
    let first = at.next()?;
    at.next().is_none().then_some(first)
}

/// Estimates the Bayer phase and maps windows better explained by another
/// `(pattern, algorithm)` hypothesis than the global one. Each window scores
/// `(E_global - E_local) / E_global` on its summed errors.
pub fn cfa_probe(image: &RgbImage, params: CfaProbeParams) -> CfaProbe {
    let (w, h) = image.dims();
    if w < MIN_DEMOSAIC_SIDE || h < MIN_DEMOSAIC_SIDE {
        return CfaProbe {
            pattern: None,
            algorithm: None,
            errors: [0.0; 4],
            heatmap: Heatmap::filled(w, h, 0.0),
        };
    }
    let maps: Vec<Vec<f64>> = (0..HYPOTHESES)
        .map(|i| {
            let (p, a) = hypothesis(i);
            error_map(image, p, a)
        })
        .collect();
    let n = (w * h) as f64;
    let totals: Vec<f64> = maps.iter().map(|m| m.iter().sum::<f64>() / n).collect();
    let best = unique_min(&totals);

    let mut errors = [f64::INFINITY; 4];
    for (i, &t) in totals.iter().enumerate() {
        let p = hypothesis(i).0.index();
        errors[p] = errors[p].min(t);
    }
    // a tie between algorithms of one pattern still identifies the pattern
    let pattern = unique_min(&errors).map(CfaPattern::from_index);
    let algorithm = best.map(|i| hypothesis(i).1);

    let reference = best.unwrap_or(0);
    let heatmap = windowed_heatmap(w, h, params.window, |x0, y0, x1, y1| {
        let sums: Vec<f64> = maps
            .iter()
            .map(|m| {
                (y0..y1)
                    .map(|y| m[y * w + x0..y * w + x1].iter().sum::<f64>())
                    .sum()
            })
            .collect();
        let global = sums[reference];
        let local = sums.iter().cloned().fold(f64::INFINITY, f64::min);
        if global > 0.0 {
            (global - local) / global
        } else {
            0.0
        }
    });
    CfaProbe {
        pattern,
        algorithm,
        errors,
        heatmap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_image(seed: u64, side: usize) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = RgbImage::new(side, side);
        for p in img.planes.iter_mut() {
            p.iter_mut().for_each(|v| *v = rng.random_range(0.0..255.0));
        }
        img
    }

    #[test]
    fn constant_image_ties() {
        let p = cfa_probe(
            &RgbImage::filled(32, 32, [50.0; 3]),
            CfaProbeParams::default(),
        );
        assert_eq!(p.pattern, None);
        assert_eq!(p.errors, [0.0; 4]);
        assert!(p.heatmap.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn every_phase_and_algorithm_recovered() {
        let img = noise_image(3, 48);
        for pattern in CfaPattern::ALL {
            for algo in DemosaicAlgo::ALL {
                let out = demosaic(&mosaic(&img, pattern), pattern, algo)
                    .unwrap()
                    .quantized();
                let p = cfa_probe(&out, CfaProbeParams::default());
                assert_eq!(p.pattern, Some(pattern), "{algo:?}");
                assert_eq!(p.algorithm, Some(algo));
            }
        }
    }

    #[test]
    fn spliced_phase_is_localized() {
        let img = noise_image(4, 128);
        let a = demosaic(
            &mosaic(&img, CfaPattern::new(0, 0)),
            CfaPattern::new(0, 0),
            DemosaicAlgo::Bilinear,
        )
        .unwrap();
        let b = demosaic(
            &mosaic(&img, CfaPattern::new(1, 0)),
            CfaPattern::new(1, 0),
            DemosaicAlgo::Bilinear,
        )
        .unwrap();
        let mut f = a.clone();
        for y in 64..128 {
            for x in 64..128 {
                f.set_pixel(x, y, b.pixel(x, y));
            }
        }
        let p = cfa_probe(&f, CfaProbeParams::default());
        assert_eq!(p.pattern, Some(CfaPattern::new(0, 0)));
        assert!(p.heatmap.get(100, 100) > 0.5);
        assert!(p.heatmap.get(10, 10) < 0.05);
    }
}
