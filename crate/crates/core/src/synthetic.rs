//! Seeded synthetic reference scenes: smoothed-noise textures overlaid with
//! flat geometric shapes.
//!
//! Values stay inside roughly `[8, 115]` so that the largest white-balance
//! gain and the gamma law do not push anything far outside the 8-bit range.

use rand::Rng;

use crate::pipeline::SeedScheme;
use crate::raster_io::RgbImage;

pub const DEFAULT_SIDE: usize = 512;
const LO: f64 = 8.0;
const HI: f64 = 115.0;

/// Stable id of the `index`-th synthetic scene.
pub fn synthetic_id(index: usize) -> String {
    format!("synth_{index:04}")
}

/// Bilinearly interpolated lattice noise with the given cell size, in [-1, 1].
fn value_noise<R: Rng + ?Sized>(rng: &mut R, w: usize, h: usize, cell: usize) -> Vec<f64> {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let fy = y as f64 / cell as f64;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        let ty = ty * ty * (3.0 - 2.0 * ty);
        for x in 0..w {
            let fx = x as f64 / cell as f64;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let tx = tx * tx * (3.0 - 2.0 * tx);
            let at = |i: usize, j: usize| lattice[j * gw + i];
            let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
            let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

enum Shape {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Triangle { p: [(f64, f64); 3] },
}

impl Shape {
    fn random<R: Rng + ?Sized>(rng: &mut R, w: f64, h: f64) -> Self {
        let side = w.min(h);
        match rng.random_range(0..3) {
            0 => {
                let (cx, cy) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
                let (hw, hh) = (
                    rng.random_range(0.06..0.25) * side,
                    rng.random_range(0.06..0.25) * side,
                );
                Shape::Rect {
                    x0: cx - hw,
                    y0: cy - hh,
                    x1: cx + hw,
                    y1: cy + hh,
                }
            }
            1 => Shape::Ellipse {
                cx: rng.random_range(0.0..w),
                cy: rng.random_range(0.0..h),
                rx: rng.random_range(0.06..0.25) * side,
                ry: rng.random_range(0.06..0.25) * side,
            },
            _ => {
                let (cx, cy) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
                let r = rng.random_range(0.1..0.3) * side;
                let mut p = [(0.0, 0.0); 3];
                for v in p.iter_mut() {
                    let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    *v = (cx + r * a.cos(), cy + r * a.sin());
                }
                Shape::Triangle { p }
            }
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Ellipse { cx, cy, rx, ry } => {
                ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0
            }
            Shape::Triangle { p } => {
                let cross = |a: (f64, f64), b: (f64, f64)| {
                    (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
                };
                let d = [cross(p[0], p[1]), cross(p[1], p[2]), cross(p[2], p[0])];
                d.iter().all(|&v| v >= 0.0) || d.iter().all(|&v| v <= 0.0)
            }
        }
    }
}

/// One synthetic scene drawn from `rng`.
pub fn synthetic_scene<R: Rng + ?Sized>(rng: &mut R, width: usize, height: usize) -> RgbImage {
    let mut img = RgbImage::new(width, height);
    let mid = (LO + HI) / 2.0;
    let span = (HI - LO) / 2.0;

    // background: a few octaves per channel around a random base colour
    let octaves = [(96usize, 0.45), (32, 0.25), (8, 0.12), (2, 0.06)];
    for plane in img.planes.iter_mut() {
        let base = rng.random_range(-0.3..0.3);
        let mut acc = vec![base; width * height];
        for &(cell, amp) in &octaves {
            let n = value_noise(rng, width, height, cell);
            acc.iter_mut().zip(n).for_each(|(a, v)| *a += amp * v);
        }
        for (dst, a) in plane.iter_mut().zip(acc) {
            *dst = mid + span * a.clamp(-1.0, 1.0);
        }
    }

    // flat shapes with a mild fine texture
    let fine = value_noise(rng, width, height, 3);
    let count = rng.random_range(6..=12);
    for _ in 0..count {
        let shape = Shape::random(rng, width as f64, height as f64);
        let colour: [f64; 3] = std::array::from_fn(|_| rng.random_range(LO + 6.0..HI - 6.0));
        let texture = rng.random_range(1.0..5.0);
        for y in 0..height {
            for x in 0..width {
                if shape.contains(x as f64 + 0.5, y as f64 + 0.5) {
                    let t = texture * fine[y * width + x];
                    for (c, &base) in colour.iter().enumerate() {
                        img.set(c, x, y, base + t);
                    }
                }
            }
        }
    }
    img
}

/// The `count` synthetic references for a master seed, with their ids.
pub fn synthetic_references(
    master_seed: u64,
    count: usize,
    side: usize,
) -> Vec<(String, RgbImage)> {
    (0..count)
        .map(|i| {
            let id = synthetic_id(i);
            let mut rng = SeedScheme::new(master_seed, id.clone()).stream("synthetic");
            let img = synthetic_scene(&mut rng, side, side);
            (id, img)
        })
        .collect()
}
