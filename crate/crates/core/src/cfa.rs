//! Bayer mosaicing and a family of demosaicing interpolators.
//!
//! All interpolators read the mosaic through whole-sample symmetric
//! reflection (`-1 -> 1`, `n -> n-2`), which keeps the Bayer parity of
//! reflected samples intact at the borders.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster_io::{RawPlane, RgbImage};

/// Offset of the first red-sampled pixel within the 2x2 Bayer quad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CfaPattern {
    pub dx: u8,
    pub dy: u8,
}

/// What a mosaic site samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Red,
    /// Green sample sharing a row with red samples.
    GreenRedRow,
    /// Green sample sharing a row with blue samples.
    GreenBlueRow,
    Blue,
}

impl CfaPattern {
    pub const ALL: [CfaPattern; 4] = [
        CfaPattern { dx: 0, dy: 0 },
        CfaPattern { dx: 1, dy: 0 },
        CfaPattern { dx: 0, dy: 1 },
        CfaPattern { dx: 1, dy: 1 },
    ];

    pub fn new(dx: u8, dy: u8) -> Self {
        assert!(dx < 2 && dy < 2, "CFA offsets must be 0 or 1");
        Self { dx, dy }
    }

    pub fn index(self) -> usize {
        (self.dx + 2 * self.dy) as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    /// Conventional name, reading the quad at the origin row by row.
    pub fn name(self) -> &'static str {
        match (self.dx, self.dy) {
            (0, 0) => "RGGB",
            (1, 0) => "GRBG",
            (0, 1) => "GBRG",
            _ => "BGGR",
        }
    }

    #[inline]
    pub fn site(self, x: usize, y: usize) -> Site {
        let rx = (x ^ self.dx as usize) & 1;
        let ry = (y ^ self.dy as usize) & 1;
        match (rx, ry) {
            (0, 0) => Site::Red,
            (1, 0) => Site::GreenRedRow,
            (0, 1) => Site::GreenBlueRow,
            _ => Site::Blue,
        }
    }

    /// Colour channel sampled at `(x, y)`.
    #[inline]
    pub fn channel_at(self, x: usize, y: usize) -> usize {
        match self.site(x, y) {
            Site::Red => 0,
            Site::Blue => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CfaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CfaPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RGGB" => Ok(Self::new(0, 0)),
            "GRBG" => Ok(Self::new(1, 0)),
            "GBRG" => Ok(Self::new(0, 1)),
            "BGGR" => Ok(Self::new(1, 1)),
            other => Err(Error::Config(format!("unknown CFA pattern '{other}'"))),
        }
    }
}

/// Built-in demosaicing algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemosaicAlgo {
    Bilinear,
    /// Bilinear green, chroma from interpolated colour ratios.
    SmoothHue,
    /// Linear 5x5 gradient-corrected filters.
    GradientCorrected,
    /// Gradient-steered green, chroma from interpolated colour differences.
    EdgeDirected,
}

impl DemosaicAlgo {
    pub const ALL: [DemosaicAlgo; 4] = [
        DemosaicAlgo::Bilinear,
        DemosaicAlgo::SmoothHue,
        DemosaicAlgo::GradientCorrected,
        DemosaicAlgo::EdgeDirected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DemosaicAlgo::Bilinear => "bilinear",
            DemosaicAlgo::SmoothHue => "smooth_hue",
            DemosaicAlgo::GradientCorrected => "gradient_corrected",
            DemosaicAlgo::EdgeDirected => "edge_directed",
        }
    }
}

impl fmt::Display for DemosaicAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DemosaicAlgo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown demosaicing algorithm '{s}'")))
    }
}

/// Samples one colour per pixel according to `pattern`.
pub fn mosaic(image: &RgbImage, pattern: CfaPattern) -> RawPlane {
    let (w, h) = image.dims();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(image.get(pattern.channel_at(x, y), x, y));
        }
    }
    RawPlane {
        width: w,
        height: h,
        data,
        native_cfa: Some(pattern),
    }
}

pub fn sample_pattern<R: Rng + ?Sized>(rng: &mut R) -> CfaPattern {
    CfaPattern::from_index(rng.random_range(0..4))
}

/// Smallest side accepted by [`demosaic`].
pub const MIN_DEMOSAIC_SIDE: usize = 8;

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Reflecting accessor over a single plane.
struct Plane<'a> {
    w: usize,
    h: usize,
    data: &'a [f64],
}

impl Plane<'_> {
    #[inline]
    fn at(&self, x: usize, y: usize, ox: isize, oy: isize) -> f64 {
        let xx = reflect(x as isize + ox, self.w);
        let yy = reflect(y as isize + oy, self.h);
        self.data[yy * self.w + xx]
    }
}

const HORIZONTAL: [(isize, isize); 2] = [(-1, 0), (1, 0)];
const VERTICAL: [(isize, isize); 2] = [(0, -1), (0, 1)];
const DIAGONAL: [(isize, isize); 4] = [(-1, -1), (1, -1), (-1, 1), (1, 1)];
const CROSS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Same-colour neighbours of a chroma lattice from a pixel at lattice offset `(lx, ly)`.
fn chroma_neighbors(lx: usize, ly: usize) -> &'static [(isize, isize)] {
    match (lx, ly) {
        (1, 0) => &HORIZONTAL,
        (0, 1) => &VERTICAL,
        _ => &DIAGONAL,
    }
}

// Gradient-corrected kernels, weights in eighths.
const MALVAR_GREEN: [(isize, isize, f64); 9] = [
    (0, 0, 4.0),
    (-1, 0, 2.0),
    (1, 0, 2.0),
    (0, -1, 2.0),
    (0, 1, 2.0),
    (-2, 0, -1.0),
    (2, 0, -1.0),
    (0, -2, -1.0),
    (0, 2, -1.0),
];
const MALVAR_CHROMA_ROW: [(isize, isize, f64); 11] = [
    (0, 0, 5.0),
    (-1, 0, 4.0),
    (1, 0, 4.0),
    (-2, 0, -1.0),
    (2, 0, -1.0),
    (-1, -1, -1.0),
    (1, -1, -1.0),
    (-1, 1, -1.0),
    (1, 1, -1.0),
    (0, -2, 0.5),
    (0, 2, 0.5),
];
const MALVAR_CHROMA_COL: [(isize, isize, f64); 11] = [
    (0, 0, 5.0),
    (0, -1, 4.0),
    (0, 1, 4.0),
    (0, -2, -1.0),
    (0, 2, -1.0),
    (-1, -1, -1.0),
    (1, -1, -1.0),
    (-1, 1, -1.0),
    (1, 1, -1.0),
    (-2, 0, 0.5),
    (2, 0, 0.5),
];
const MALVAR_CHROMA_DIAG: [(isize, isize, f64); 9] = [
    (0, 0, 6.0),
    (-1, -1, 2.0),
    (1, -1, 2.0),
    (-1, 1, 2.0),
    (1, 1, 2.0),
    (-2, 0, -1.5),
    (2, 0, -1.5),
    (0, -2, -1.5),
    (0, 2, -1.5),
];

/// Offset added to both terms of a colour ratio so that it stays positive.
const RATIO_EPS: f64 = 1.0;

/// Reconstructs a full RGB image from a Bayer mosaic.
///
/// Sampled values are copied through unchanged in their own channel for
/// every algorithm.
pub fn demosaic(mosaic: &RawPlane, pattern: CfaPattern, algo: DemosaicAlgo) -> Result<RgbImage> {
    let (w, h) = (mosaic.width, mosaic.height);
    if w < MIN_DEMOSAIC_SIDE || h < MIN_DEMOSAIC_SIDE {
        return Err(Error::Undersized(format!(
            "demosaicing needs at least {MIN_DEMOSAIC_SIDE}x{MIN_DEMOSAIC_SIDE}, got {w}x{h}"
        )));
    }
    let m = Plane {
        w,
        h,
        data: &mosaic.data,
    };

    let green = interpolate_green(&m, pattern, algo);
    let g = Plane { w, h, data: &green };
    let red = interpolate_chroma(&m, &g, pattern, algo, 0);
    let blue = interpolate_chroma(&m, &g, pattern, algo, 2);
    RgbImage::from_planes(w, h, [red, green, blue])
}

fn interpolate_green(m: &Plane, pattern: CfaPattern, algo: DemosaicAlgo) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.w * m.h);
    for y in 0..m.h {
        for x in 0..m.w {
            let centre = m.at(x, y, 0, 0);
            if pattern.channel_at(x, y) == 1 {
                out.push(centre);
                continue;
            }
            let v = match algo {
                DemosaicAlgo::Bilinear | DemosaicAlgo::SmoothHue => {
                    CROSS
                        .iter()
                        .map(|&(ox, oy)| m.at(x, y, ox, oy))
                        .sum::<f64>()
                        / 4.0
                }
                DemosaicAlgo::GradientCorrected => {
                    MALVAR_GREEN
                        .iter()
                        .map(|&(ox, oy, k)| k * m.at(x, y, ox, oy))
                        .sum::<f64>()
                        / 8.0
                }
                DemosaicAlgo::EdgeDirected => {
                    let (gl, gr) = (m.at(x, y, -1, 0), m.at(x, y, 1, 0));
                    let (gu, gd) = (m.at(x, y, 0, -1), m.at(x, y, 0, 1));
                    let lap_h = 2.0 * centre - m.at(x, y, -2, 0) - m.at(x, y, 2, 0);
                    let lap_v = 2.0 * centre - m.at(x, y, 0, -2) - m.at(x, y, 0, 2);
                    let grad_h = (gl - gr).abs() + lap_h.abs();
                    let grad_v = (gu - gd).abs() + lap_v.abs();
                    let est_h = (gl + gr) / 2.0 + lap_h / 4.0;
                    let est_v = (gu + gd) / 2.0 + lap_v / 4.0;
                    if grad_h < grad_v {
                        est_h
                    } else if grad_v < grad_h {
                        est_v
                    } else {
                        (est_h + est_v) / 2.0
                    }
                }
            };
            out.push(v);
        }
    }
    out
}

fn interpolate_chroma(
    m: &Plane,
    g: &Plane,
    pattern: CfaPattern,
    algo: DemosaicAlgo,
    channel: usize,
) -> Vec<f64> {
    // lattice origin of this chroma channel
    let (ox, oy) = if channel == 0 {
        (pattern.dx as usize, pattern.dy as usize)
    } else {
        (1 - pattern.dx as usize, 1 - pattern.dy as usize)
    };
    let mut out = Vec::with_capacity(m.w * m.h);
    for y in 0..m.h {
        for x in 0..m.w {
            let (lx, ly) = ((x ^ ox) & 1, (y ^ oy) & 1);
            if (lx, ly) == (0, 0) {
                out.push(m.at(x, y, 0, 0));
                continue;
            }
            let nbrs = chroma_neighbors(lx, ly);
            let n = nbrs.len() as f64;
            let v = match algo {
                DemosaicAlgo::Bilinear => {
                    nbrs.iter().map(|&(dx, dy)| m.at(x, y, dx, dy)).sum::<f64>() / n
                }
                DemosaicAlgo::EdgeDirected => {
                    let diff = nbrs
                        .iter()
                        .map(|&(dx, dy)| m.at(x, y, dx, dy) - g.at(x, y, dx, dy))
                        .sum::<f64>()
                        / n;
                    g.at(x, y, 0, 0) + diff
                }
                DemosaicAlgo::SmoothHue => {
                    let g0 = g.at(x, y, 0, 0);
                    let floor = nbrs
                        .iter()
                        .map(|&(dx, dy)| m.at(x, y, dx, dy).min(g.at(x, y, dx, dy)))
                        .fold(g0.min(0.0), f64::min);
                    let c = RATIO_EPS - floor.min(0.0);
                    let ratio = nbrs
                        .iter()
                        .map(|&(dx, dy)| (m.at(x, y, dx, dy) + c) / (g.at(x, y, dx, dy) + c))
                        .sum::<f64>()
                        / n;
                    (g0 + c) * ratio - c
                }
                DemosaicAlgo::GradientCorrected => {
                    let kernel: &[(isize, isize, f64)] = match (lx, ly) {
                        (1, 0) => &MALVAR_CHROMA_ROW,
                        (0, 1) => &MALVAR_CHROMA_COL,
                        _ => &MALVAR_CHROMA_DIAG,
                    };
                    kernel
                        .iter()
                        .map(|&(dx, dy, k)| k * m.at(x, y, dx, dy))
                        .sum::<f64>()
                        / 8.0
                }
            };
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = RgbImage::new(w, h);
        for p in img.planes.iter_mut() {
            for v in p.iter_mut() {
                *v = rng.random_range(0.0..255.0);
            }
        }
        img
    }

    #[test]
    fn reflect_keeps_parity() {
        assert_eq!(reflect(-1, 8), 1);
        assert_eq!(reflect(-2, 8), 2);
        assert_eq!(reflect(8, 8), 6);
        assert_eq!(reflect(9, 8), 5);
    }

    #[test]
    fn pattern_names_round_trip() {
        for p in CfaPattern::ALL {
            assert_eq!(p.name().parse::<CfaPattern>().unwrap(), p);
            assert_eq!(p.site(p.dx as usize, p.dy as usize), Site::Red);
            assert_eq!(p.site(1 - p.dx as usize, 1 - p.dy as usize), Site::Blue);
        }
    }

    #[test]
    fn algo_names_round_trip() {
        for a in DemosaicAlgo::ALL {
            assert_eq!(a.name().parse::<DemosaicAlgo>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
        }
    }

    #[test]
    fn gray_mosaics_to_constant_plane() {
        let img = RgbImage::filled(6, 4, [42.0; 3]);
        for p in CfaPattern::ALL {
            assert!(mosaic(&img, p).data.iter().all(|&v| v == 42.0));
        }
    }

    #[test]
    fn pure_red_lands_on_even_even_sites() {
        let img = RgbImage::filled(4, 4, [255.0, 0.0, 0.0]);
        let m = mosaic(&img, CfaPattern::new(0, 0));
        for y in 0..4 {
            for x in 0..4 {
                let expected = if x % 2 == 0 && y % 2 == 0 { 255.0 } else { 0.0 };
                assert_eq!(m.get(x, y), expected);
            }
        }
    }

    #[test]
    fn horizontal_phase_shift_matches_translation() {
        let img = random_image(16, 16, 11);
        let shifted_mosaic = mosaic(&img, CfaPattern::new(1, 0));
        // translate the image left by one pixel and mosaic with the base phase
        let mut translated = RgbImage::new(15, 16);
        for y in 0..16 {
            for x in 0..15 {
                translated.set_pixel(x, y, img.pixel(x + 1, y));
            }
        }
        let base = mosaic(&translated, CfaPattern::new(0, 0));
        for y in 0..16 {
            for x in 0..15 {
                assert_eq!(shifted_mosaic.get(x + 1, y), base.get(x, y));
            }
        }
    }

    #[test]
    fn undersized_input_rejected() {
        let m = RawPlane::filled(7, 20, 1.0);
        assert!(matches!(
            demosaic(&m, CfaPattern::new(0, 0), DemosaicAlgo::Bilinear),
            Err(Error::Undersized(_))
        ));
    }

    #[test]
    fn constants_survive_every_algorithm() {
        for &v in &[0.0, 17.5, 200.0, -3.0] {
            let m = RawPlane::filled(12, 10, v);
            for p in CfaPattern::ALL {
                for a in DemosaicAlgo::ALL {
                    let out = demosaic(&m, p, a).unwrap();
                    for plane in &out.planes {
                        for &o in plane {
                            assert!((o - v).abs() < 1e-9, "{a} {p} gave {o} for {v}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sampled_sites_are_preserved() {
        let img = random_image(20, 18, 3);
        for p in CfaPattern::ALL {
            let m = mosaic(&img, p);
            for a in DemosaicAlgo::ALL {
                let out = demosaic(&m, p, a).unwrap();
                assert_eq!(mosaic(&out, p).data, m.data, "{a} {p}");
            }
        }
    }

    #[test]
    fn bilinear_and_gradient_corrected_differ_on_texture() {
        let img = random_image(32, 32, 5);
        let p = CfaPattern::new(0, 0);
        let m = mosaic(&img, p);
        let a = demosaic(&m, p, DemosaicAlgo::Bilinear).unwrap();
        let b = demosaic(&m, p, DemosaicAlgo::GradientCorrected).unwrap();
        let mad: f64 = (0..3)
            .flat_map(|c| {
                a.planes[c]
                    .iter()
                    .zip(&b.planes[c])
                    .map(|(x, y)| (x - y).abs())
            })
            .sum::<f64>()
            / (3 * a.len()) as f64;
        assert!(mad > 1.0, "mean abs difference {mad}");
    }

    #[test]
    fn demosaic_is_translation_covariant() {
        let img = random_image(24, 24, 9);
        let base = CfaPattern::new(0, 0);
        let m = mosaic(&img, base);
        // drop the first column: the shifted mosaic now starts on a green site
        let mut cropped = RawPlane::filled(23, 24, 0.0);
        for y in 0..24 {
            for x in 0..23 {
                cropped.data[y * 23 + x] = m.get(x + 1, y);
            }
        }
        let shifted = CfaPattern::new(1, 0);
        for a in DemosaicAlgo::ALL {
            let full = demosaic(&m, base, a).unwrap();
            let part = demosaic(&cropped, shifted, a).unwrap();
            for y in 4..20 {
                for x in 4..19 {
                    for c in 0..3 {
                        assert!((part.get(c, x, y) - full.get(c, x + 1, y)).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn pattern_sampling_is_uniform_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[sample_pattern(&mut rng).index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e4 - 0.25).abs() < 0.02, "{counts:?}");
        }
        let mut a = ChaCha8Rng::seed_from_u64(77);
        let mut b = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..32 {
            assert_eq!(sample_pattern(&mut a), sample_pattern(&mut b));
        }
    }

    #[test]
    fn independent_patterns_align_a_quarter_of_the_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let aligned = (0..n)
            .filter(|_| sample_pattern(&mut rng) == sample_pattern(&mut rng))
            .count();
        assert!((aligned as f64 / n as f64 - 0.25).abs() < 0.02);
    }
}
