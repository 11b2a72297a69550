//! Forgery masks: content-aligned endomasks from a graph-based segmentation
//! and content-independent exomasks borrowed from a size-adjacent image.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::SeedScheme;
use crate::raster_io::{BinaryMask, RgbImage};

/// Tag recorded in sidecars.
pub const SEGMENTER: &str = "graph-v1";

/// Per-pixel region labels, contiguous `0..count`, numbered in raster order
/// of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationLabels {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl SegmentationLabels {
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.count];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }

    pub fn region_mask(&self, label: u32) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.labels.iter().map(|&l| u8::from(l == label)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    /// Merge-threshold scale; larger values favour larger regions.
    pub scale_k: f64,
    /// Regions smaller than this many pixels are absorbed by a neighbour.
    pub min_region: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            scale_k: 600.0,
            min_region: 400,
        }
    }
}

struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
    /// Largest internal edge weight of each component.
    internal: Vec<f64>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let p = self.parent[i as usize];
            self.parent[i as usize] = self.parent[p as usize];
            i = p;
        }
        i
    }

    /// Union by size; ties keep the smaller root index.
    fn union(&mut self, a: u32, b: u32, weight: f64) -> u32 {
        let (sa, sb) = (self.size[a as usize], self.size[b as usize]);
        let (root, child) = if sa > sb || (sa == sb && a < b) {
            (a, b)
        } else {
            (b, a)
        };
        self.parent[child as usize] = root;
        self.size[root as usize] = sa + sb;
        self.internal[root as usize] = weight;
        root
    }
}

/// 5-tap binomial blur, reflected borders.
fn smooth(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let refl = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i - 1 } else { 2 * n - 1 - i };
        }
        i as usize
    };
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (0..5)
                .map(|k| K[k] * plane[y * w + refl(x as isize + k as isize - 2, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (0..5)
                .map(|k| K[k] * tmp[refl(y as isize + k as isize - 2, h) * w + x])
                .sum();
        }
    }
    out
}

/// Greedy graph-based segmentation on the 4-neighbour grid.
///
/// The image is lightly blurred, edges are weighted by the RGB distance of
/// their endpoints and processed in `(weight, y, x, direction)` order. Two
/// components merge when the edge is no heavier than either component's
/// internal difference plus `scale_k / size`.
pub fn segment(image: &RgbImage, params: SegmentParams) -> SegmentationLabels {
    let (w, h) = image.dims();
    let n = w * h;
    let planes: Vec<Vec<f64>> = image.planes.iter().map(|p| smooth(p, w, h)).collect();
    let dist = |i: usize, j: usize| -> f64 {
        planes
            .iter()
            .map(|p| (p[i] - p[j]).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    // (weight, pixel index, direction): pixel index encodes (y, x) in raster order
    let mut edges: Vec<(f64, u32, u8)> = Vec::with_capacity(2 * n);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                edges.push((dist(i, i + 1), i as u32, 0));
            }
            if y + 1 < h {
                edges.push((dist(i, i + w), i as u32, 1));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let other = |i: u32, dir: u8| if dir == 0 { i + 1 } else { i + w as u32 };

    let mut sets = DisjointSets::new(n);
    for &(weight, i, dir) in &edges {
        let a = sets.find(i);
        let b = sets.find(other(i, dir));
        if a == b {
            continue;
        }
        let ta = sets.internal[a as usize] + params.scale_k / sets.size[a as usize] as f64;
        let tb = sets.internal[b as usize] + params.scale_k / sets.size[b as usize] as f64;
        if weight <= ta.min(tb) {
            sets.union(a, b, weight);
        }
    }
    // absorb small regions through their cheapest boundary edge
    for &(_, i, dir) in &edges {
        let a = sets.find(i);
        let b = sets.find(other(i, dir));
        let small = (sets.size[a as usize].min(sets.size[b as usize]) as usize) < params.min_region;
        if a != b && small {
            let keep = sets.internal[a as usize].max(sets.internal[b as usize]);
            sets.union(a, b, keep);
        }
    }

    let mut remap: Vec<u32> = vec![u32::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut count = 0u32;
    for i in 0..n as u32 {
        let root = sets.find(i) as usize;
        if remap[root] == u32::MAX {
            remap[root] = count;
            count += 1;
        }
        labels.push(remap[root]);
    }
    SegmentationLabels {
        width: w,
        height: h,
        labels,
        count: count as usize,
    }
}

/// Default minimum endomask area, as a fraction of the image.
pub const DEFAULT_MIN_FRAC: f64 = 0.01;
/// Endomasks must cover strictly less than this fraction.
pub const MAX_FRAC: f64 = 0.5;
pub const DEFAULT_MAX_RETRIES: usize = 1000;

/// Picks the region under a uniformly drawn pixel, retrying until its area
/// fraction lies in `[min_frac, 0.5)`. After `max_retries` misses the largest
/// admissible region is used.
pub fn pick_endomask<R: Rng + ?Sized>(
    labels: &SegmentationLabels,
    rng: &mut R,
    min_frac: f64,
    max_retries: usize,
) -> Result<BinaryMask> {
    let n = labels.labels.len();
    if n == 0 {
        return Err(Error::NoAdmissibleRegion("empty segmentation".into()));
    }
    let areas = labels.areas();
    let admissible = |l: usize| {
        let f = areas[l] as f64 / n as f64;
        f >= min_frac && f < MAX_FRAC
    };
    for _ in 0..max_retries {
        let p = rng.random_range(0..n);
        let l = labels.labels[p];
        if admissible(l as usize) {
            return Ok(labels.region_mask(l));
        }
    }
    let best = (0..labels.count)
        .filter(|&l| admissible(l))
        .max_by(|&a, &b| areas[a].cmp(&areas[b]).then(b.cmp(&a)));
    match best {
        Some(l) => Ok(labels.region_mask(l as u32)),
        None => Err(Error::NoAdmissibleRegion(format!(
            "none of {} regions covers [{min_frac}, {MAX_FRAC}) of the image",
            labels.count
        ))),
    }
}

/// One image's place in the exomask pairing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExomaskAssignment {
    pub image_id: String,
    /// Position in the ascending endomask-size order.
    pub rank: usize,
    pub endomask_id: String,
    /// Image whose endomask becomes this image's exomask.
    pub exomask_source_image_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPairAssignment {
    pub entries: Vec<ExomaskAssignment>,
}

impl MaskPairAssignment {
    pub fn source_of(&self, image_id: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.image_id == image_id)
            .map(|e| e.exomask_source_image_id.as_str())
    }
}

/// Sorts images by endomask area (ties by id) and swaps masks within
/// consecutive pairs. With an odd count the last three images form a cycle.
pub fn assign_exomasks(sizes: &[(String, usize)]) -> Result<MaskPairAssignment> {
    if sizes.len() < 2 {
        return Err(Error::Assignment(format!(
            "exomask pairing needs at least 2 images, got {}",
            sizes.len()
        )));
    }
    let mut order: Vec<&(String, usize)> = sizes.iter().collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let n = order.len();
    let mut source = vec![0usize; n];
    let paired_end = if n % 2 == 1 { n - 3 } else { n };
    for r in (0..paired_end).step_by(2) {
        source[r] = r + 1;
        source[r + 1] = r;
    }
    if n % 2 == 1 {
        let (a, b, c) = (n - 3, n - 2, n - 1);
        source[a] = b;
        source[b] = c;
        source[c] = a;
    }
    let entries = order
        .iter()
        .enumerate()
        .map(|(rank, (id, _))| ExomaskAssignment {
            image_id: id.clone(),
            rank,
            endomask_id: format!("{id}_endo"),
            exomask_source_image_id: order[source[rank]].0.clone(),
        })
        .collect();
    Ok(MaskPairAssignment { entries })
}

/// Mean luminance gradient magnitude on the inner contour of the mask.
pub fn boundary_alignment_score(image: &RgbImage, mask: &BinaryMask) -> f64 {
    let (w, h) = image.dims();
    let lum = image.luminance();
    let grad = |x: usize, y: usize| {
        let at = |x: usize, y: usize| lum[y * w + x];
        let gx = at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y);
        let gy = at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1));
        (gx * gx + gy * gy).sqrt()
    };
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let on_contour = (x > 0 && !mask.get(x - 1, y))
                || (x + 1 < w && !mask.get(x + 1, y))
                || (y > 0 && !mask.get(x, y - 1))
                || (y + 1 < h && !mask.get(x, y + 1));
            if on_contour {
                sum += grad(x, y);
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Cyclic translation of a mask.
pub fn translate_mask(mask: &BinaryMask, dx: usize, dy: usize) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let mut data = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            data[((y + dy) % h) * w + (x + dx) % w] = mask.data[y * w + x];
        }
    }
    BinaryMask {
        width: w,
        height: h,
        data,
    }
}

/// One-sided permutation p-value of the mask's boundary alignment against
/// `trials` random cyclic translations of the same mask.
pub fn alignment_p_value<R: Rng + ?Sized>(
    image: &RgbImage,
    mask: &BinaryMask,
    rng: &mut R,
    trials: usize,
) -> f64 {
    let observed = boundary_alignment_score(image, mask);
    let at_least = (0..trials)
        .filter(|_| {
            let dx = rng.random_range(0..mask.width);
            let dy = rng.random_range(0..mask.height);
            boundary_alignment_score(image, &translate_mask(mask, dx, dy)) >= observed
        })
        .count();
    (1 + at_least) as f64 / (1 + trials) as f64
}

/// Endomask and exomask of every usable image.
#[derive(Debug, Clone)]
pub struct MaskSet {
    pub endo: BTreeMap<String, BinaryMask>,
    pub exo: BTreeMap<String, BinaryMask>,
    pub assignment: MaskPairAssignment,
    /// Images without an admissible endomask, with the reason.
    pub skipped: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    pub segment: SegmentParams,
    pub min_frac: f64,
    pub max_retries: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            segment: SegmentParams::default(),
            min_frac: DEFAULT_MIN_FRAC,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

/// Segments every reference, picks its endomask, then pairs exomasks.
///
/// Per-image work runs on the current rayon pool; the result does not
/// depend on the pool size. With fewer than two usable images no exomasks
/// are assigned.
pub fn build_mask_set(
    references: &[(String, RgbImage)],
    master_seed: u64,
    params: MaskParams,
) -> MaskSet {
    let picked: Vec<(String, Result<BinaryMask>)> = references
        .par_iter()
        .map(|(id, img)| {
            let labels = segment(img, params.segment);
            let mut rng = SeedScheme::new(master_seed, id.clone()).stream("endomask");
            (
                id.clone(),
                pick_endomask(&labels, &mut rng, params.min_frac, params.max_retries),
            )
        })
        .collect();

    let mut endo = BTreeMap::new();
    let mut skipped = Vec::new();
    for (id, res) in picked {
        match res {
            Ok(mask) => {
                endo.insert(id, mask);
            }
            Err(e) => {
                log::warn!("skipping {id}: {e}");
                skipped.push((id, e.to_string()));
            }
        }
    }
    let sizes: Vec<(String, usize)> = endo.iter().map(|(id, m)| (id.clone(), m.area())).collect();
    let assignment = match assign_exomasks(&sizes) {
        Ok(a) => a,
        Err(e) => {
            log::warn!("no exomasks: {e}");
            MaskPairAssignment {
                entries: Vec::new(),
            }
        }
    };
    let mut exo = BTreeMap::new();
    for e in &assignment.entries {
        let own = &endo[&e.image_id];
        let borrowed = endo[&e.exomask_source_image_id].resize_nearest(own.width, own.height);
        exo.insert(e.image_id.clone(), borrowed);
    }
    MaskSet {
        endo,
        exo,
        assignment,
        skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labels_from(w: usize, h: usize, labels: Vec<u32>) -> SegmentationLabels {
        let count = *labels.iter().max().unwrap() as usize + 1;
        SegmentationLabels {
            width: w,
            height: h,
            labels,
            count,
        }
    }

    /// Brute-force 4-connected components of a label image.
    fn components(labels: &[u32], w: usize, h: usize) -> usize {
        let mut seen = vec![false; w * h];
        let mut count = 0;
        for start in 0..w * h {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                let mut push = |j: usize| {
                    if !seen[j] && labels[j] == labels[i] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    push(i - 1);
                }
                if x + 1 < w {
                    push(i + 1);
                }
                if y > 0 {
                    push(i - w);
                }
                if y + 1 < h {
                    push(i + w);
                }
            }
        }
        count
    }

    #[test]
    fn constant_image_is_one_region() {
        let s = segment(
            &RgbImage::filled(40, 30, [50.0; 3]),
            SegmentParams::default(),
        );
        assert_eq!(s.count, 1);
    }

    #[test]
    fn strong_edge_gives_two_regions() {
        let mut img = RgbImage::filled(64, 48, [20.0, 30.0, 40.0]);
        for y in 0..48 {
            for x in 32..64 {
                img.set_pixel(x, y, [200.0, 180.0, 160.0]);
            }
        }
        let s = segment(&img, SegmentParams::default());
        // oracle: components of the thresholded gradient map
        let halves: Vec<u32> = (0..64 * 48).map(|i| u32::from(i % 64 >= 32)).collect();
        assert_eq!(components(&halves, 64, 48), 2);
        assert_eq!(s.count, 2);
        assert_ne!(s.labels[0], s.labels[63]);
    }

    #[test]
    fn regions_are_contiguous_and_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut img = RgbImage::new(48, 48);
        for y in 0..48 {
            for x in 0..48 {
                let base = if (x / 12 + y / 16) % 2 == 0 {
                    40.0
                } else {
                    160.0
                };
                img.set_pixel(
                    x,
                    y,
                    std::array::from_fn(|_| base + rng.random_range(-5.0..5.0)),
                );
            }
        }
        let s = segment(
            &img,
            SegmentParams {
                scale_k: 300.0,
                min_region: 20,
            },
        );
        assert_eq!(components(&s.labels, 48, 48), s.count);
        assert!(s.labels.iter().all(|&l| (l as usize) < s.count));
        assert!(s.areas().iter().all(|&a| a >= 20));
        assert_eq!(
            s,
            segment(
                &img,
                SegmentParams {
                    scale_k: 300.0,
                    min_region: 20
                }
            )
        );
    }

    #[test]
    fn endomask_accepts_sampled_admissible_region() {
        // region 1 covers 30%
        let labels = labels_from(10, 10, (0..100).map(|i| u32::from(i < 30)).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = pick_endomask(&labels, &mut rng, 0.01, 100).unwrap();
        assert_eq!(m, labels.region_mask(1));
    }

    #[test]
    fn endomask_frequencies_follow_admissible_areas() {
        // 10% / 30% / 60% regions
        let labels = labels_from(
            10,
            10,
            (0..100)
                .map(|i| {
                    if i < 10 {
                        0
                    } else if i < 40 {
                        1
                    } else {
                        2
                    }
                })
                .collect(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hits = [0usize; 3];
        for _ in 0..1000 {
            let m = pick_endomask(&labels, &mut rng, 0.01, 1000).unwrap();
            let label = labels.labels[m.data.iter().position(|&v| v == 1).unwrap()];
            hits[label as usize] += 1;
        }
        assert_eq!(hits[2], 0);
        // rejection restricted to admissible pixels: 10/40 and 30/40
        let f = hits[0] as f64 / 1000.0;
        assert!((f - 0.25).abs() < 0.05, "{hits:?}");
    }

    #[test]
    fn endomask_falls_back_and_fails_cleanly() {
        let labels = labels_from(10, 10, (0..100).map(|i| u32::from(i < 5)).collect());
        // 5% admissible region hit rarely; zero retries forces the fallback
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = pick_endomask(&labels, &mut rng, 0.01, 0).unwrap();
        assert_eq!(m.area(), 5);

        let flat = labels_from(10, 10, vec![0; 100]);
        assert!(matches!(
            pick_endomask(&flat, &mut rng, 0.01, 50),
            Err(Error::NoAdmissibleRegion(_))
        ));
    }

    #[test]
    fn two_images_swap_masks() {
        let a = assign_exomasks(&[("x".into(), 10), ("y".into(), 3)]).unwrap();
        assert_eq!(a.source_of("x"), Some("y"));
        assert_eq!(a.source_of("y"), Some("x"));
    }

    #[test]
    fn odd_count_forms_three_cycle() {
        let a = assign_exomasks(&[("a".into(), 5), ("b".into(), 1), ("c".into(), 3)]).unwrap();
        let order: Vec<&str> = a.entries.iter().map(|e| e.image_id.as_str()).collect();
        assert_eq!(order, ["b", "c", "a"]);
        assert_eq!(a.source_of("b"), Some("c"));
        assert_eq!(a.source_of("c"), Some("a"));
        assert_eq!(a.source_of("a"), Some("b"));
    }

    #[test]
    fn pairs_are_adjacent_in_rank() {
        let sizes: Vec<(String, usize)> =
            (0..10).map(|i| (format!("i{i}"), (i * 37) % 11)).collect();
        let a = assign_exomasks(&sizes).unwrap();
        let rank: BTreeMap<&str, usize> = a
            .entries
            .iter()
            .map(|e| (e.image_id.as_str(), e.rank))
            .collect();
        let mut used = BTreeMap::new();
        for e in &a.entries {
            let r = rank[e.exomask_source_image_id.as_str()];
            assert_eq!((r as isize - e.rank as isize).abs(), 1);
            assert_ne!(e.image_id, e.exomask_source_image_id);
            *used.entry(e.exomask_source_image_id.clone()).or_insert(0) += 1;
        }
        assert!(used.values().all(|&c| c == 1));
        assert!(assign_exomasks(&sizes[..1]).is_err());
    }

    #[test]
    fn alignment_score_prefers_true_edges() {
        let mut img = RgbImage::filled(64, 64, [30.0; 3]);
        let mut mask = BinaryMask::zeros(64, 64);
        for y in 20..40 {
            for x in 20..40 {
                img.set_pixel(x, y, [200.0; 3]);
                mask.data[y * 64 + x] = 1;
            }
        }
        let aligned = boundary_alignment_score(&img, &mask);
        let moved = boundary_alignment_score(&img, &translate_mask(&mask, 10, 7));
        assert!(aligned > moved);
        let p = alignment_p_value(&img, &mask, &mut ChaCha8Rng::seed_from_u64(3), 100);
        assert!(p <= 0.05);
    }
}
