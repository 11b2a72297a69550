//! The six dataset recipes, mask merging and corpus generation.
//!
//! Every forgery `F = (1-M) P0 + M P1` combines two pipelines run on the same
//! reference. The recipes differ only in how the pair `(P0, P1)` is drawn.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cfa::{CfaPattern, DemosaicAlgo};
use crate::error::{Error, Result};
use crate::jpeg_sim::{self, JpegParams};
use crate::masks::{MaskPairAssignment, MaskSet, SEGMENTER};
use crate::pipeline::{self, CommonParams, PipelineConfig, PipelineOutput, SeedScheme};
use crate::raster_io::{encode_mask_pgm, encode_ppm8, BinaryMask, RgbImage};
use crate::raw_model::{self, NoiseParams};

pub const DEMOSAIC_FAMILY: &str = "builtin-v1";
pub const QUANT_LAW: &str = "ijg";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatasetKind {
    #[serde(rename = "noise")]
    NoiseLevel,
    #[serde(rename = "cfagrid")]
    CfaGrid,
    #[serde(rename = "cfaalgo")]
    CfaAlgo,
    #[serde(rename = "jpeggrid")]
    JpegGrid,
    #[serde(rename = "jpegquality")]
    JpegQuality,
    #[serde(rename = "hybrid")]
    Hybrid,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 6] = [
        DatasetKind::NoiseLevel,
        DatasetKind::CfaGrid,
        DatasetKind::CfaAlgo,
        DatasetKind::JpegGrid,
        DatasetKind::JpegQuality,
        DatasetKind::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::NoiseLevel => "noise",
            DatasetKind::CfaGrid => "cfagrid",
            DatasetKind::CfaAlgo => "cfaalgo",
            DatasetKind::JpegGrid => "jpeggrid",
            DatasetKind::JpegQuality => "jpegquality",
            DatasetKind::Hybrid => "hybrid",
        }
    }

    /// Parses a comma-separated list; `all` expands to every kind.
    pub fn parse_list(s: &str) -> Result<Vec<DatasetKind>> {
        let mut kinds = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                kinds.extend(Self::ALL);
            } else {
                kinds.push(part.parse()?);
            }
        }
        kinds.sort();
        kinds.dedup();
        if kinds.is_empty() {
            return Err(Error::Config("no dataset kinds given".into()));
        }
        Ok(kinds)
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown dataset kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Endo,
    Exo,
}

impl MaskKind {
    pub const ALL: [MaskKind; 2] = [MaskKind::Endo, MaskKind::Exo];

    pub fn name(self) -> &'static str {
        match self {
            MaskKind::Endo => "endo",
            MaskKind::Exo => "exo",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<MaskKind>> {
        let mut kinds = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                kinds.extend(Self::ALL);
            } else {
                kinds.push(part.parse()?);
            }
        }
        kinds.sort();
        kinds.dedup();
        if kinds.is_empty() {
            return Err(Error::Config("no mask kinds given".into()));
        }
        Ok(kinds)
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mask kind {s:?}")))
    }
}

/// `F = p1` where the mask is set, `p0` elsewhere.
pub fn merge(p0: &RgbImage, p1: &RgbImage, mask: &BinaryMask) -> Result<RgbImage> {
    p0.check_same_dims(p1)?;
    if (mask.width, mask.height) != p0.dims() {
        return Err(Error::dims(p0.dims(), (mask.width, mask.height)));
    }
    let mut out = p0.clone();
    for (c, plane) in out.planes.iter_mut().enumerate() {
        for (i, v) in plane.iter_mut().enumerate() {
            if mask.data[i] != 0 {
                *v = p1.planes[c][i];
            }
        }
    }
    Ok(out)
}

/// Shared raw-noise parameters for recipes that keep noise common.
pub fn sample_noise_params<R: Rng + ?Sized>(rng: &mut R) -> NoiseParams {
    NoiseParams {
        a: rng.random_range(NoiseParams::A_RANGE.0..=NoiseParams::A_RANGE.1),
        b: rng.random_range(NoiseParams::B_RANGE.0..=NoiseParams::B_RANGE.1),
    }
}

/// Uniform over the three patterns other than `p`.
pub fn other_pattern<R: Rng + ?Sized>(rng: &mut R, p: CfaPattern) -> CfaPattern {
    let i = rng.random_range(0..3);
    CfaPattern::from_index(if i >= p.index() { i + 1 } else { i })
}

/// Uniform over the algorithms other than `a`.
pub fn other_algo<R: Rng + ?Sized>(rng: &mut R, a: DemosaicAlgo) -> DemosaicAlgo {
    let others: Vec<DemosaicAlgo> = DemosaicAlgo::ALL.into_iter().filter(|&x| x != a).collect();
    others[rng.random_range(0..others.len())]
}

/// Which stages a hybrid pair modifies, and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridPlan {
    pub noise: bool,
    pub cfa: bool,
    pub jpeg: bool,
    /// Grid shifts only (pattern and JPEG origin) rather than a change of
    /// demosaicer and quality.
    pub grid_only: bool,
}

/// Half the time all three stages, otherwise a uniform pair of them.
pub fn sample_hybrid_plan<R: Rng + ?Sized>(rng: &mut R) -> HybridPlan {
    let (noise, cfa, jpeg) = if rng.random_bool(0.5) {
        (true, true, true)
    } else {
        match rng.random_range(0..3) {
            0 => (false, true, true),
            1 => (true, false, true),
            _ => (true, true, false),
        }
    };
    HybridPlan {
        noise,
        cfa,
        jpeg,
        grid_only: rng.random_bool(0.5),
    }
}

fn cfa_grid_shift<R: Rng + ?Sized>(rng: &mut R, c0: &PipelineConfig, c1: &mut PipelineConfig) {
    c1.cfa_pattern = other_pattern(rng, c0.cfa_pattern);
}

fn cfa_splice<R: Rng + ?Sized>(rng: &mut R, c0: &PipelineConfig, c1: &mut PipelineConfig) {
    c1.demosaic = other_algo(rng, c0.demosaic);
    c1.cfa_pattern = crate::cfa::sample_pattern(rng);
}

fn jpeg_grid_shift<R: Rng + ?Sized>(rng: &mut R) -> (JpegParams, JpegParams) {
    let j0 = jpeg_sim::sample_jpeg(rng, None);
    let grid = jpeg_sim::sample_grid(rng, Some(j0.grid));
    (j0, JpegParams { grid, ..j0 })
}

fn jpeg_splice<R: Rng + ?Sized>(rng: &mut R) -> (JpegParams, JpegParams) {
    let j0 = jpeg_sim::sample_jpeg(rng, None);
    let quality = jpeg_sim::sample_quality_excluding(rng, j0.quality);
    let grid = jpeg_sim::sample_grid(rng, None);
    (j0, JpegParams { quality, grid })
}

/// Draws the pipeline pair of one recipe around the per-image common parameters.
///
/// Recipes that do not modify the noise stage still add noise, with
/// parameters shared by both pipelines.
pub fn sample_pair<R: Rng + ?Sized>(
    kind: DatasetKind,
    common: &CommonParams,
    rng: &mut R,
) -> Result<(PipelineConfig, PipelineConfig)> {
    let mut c0 = PipelineConfig::from_common(common);
    match kind {
        DatasetKind::NoiseLevel => {
            let (n0, n1) = raw_model::sample_noise_pair(rng)?;
            c0.noise = Some(n0);
            let c1 = PipelineConfig {
                noise: Some(n1),
                ..c0
            };
            Ok((c0, c1))
        }
        DatasetKind::CfaGrid | DatasetKind::CfaAlgo => {
            c0.noise = Some(sample_noise_params(rng));
            let mut c1 = c0;
            if kind == DatasetKind::CfaGrid {
                cfa_grid_shift(rng, &c0, &mut c1);
            } else {
                cfa_splice(rng, &c0, &mut c1);
            }
            Ok((c0, c1))
        }
        DatasetKind::JpegGrid | DatasetKind::JpegQuality => {
            c0.noise = Some(sample_noise_params(rng));
            let (j0, j1) = if kind == DatasetKind::JpegGrid {
                jpeg_grid_shift(rng)
            } else {
                jpeg_splice(rng)
            };
            c0.jpeg = Some(j0);
            Ok((
                c0,
                PipelineConfig {
                    jpeg: Some(j1),
                    ..c0
                },
            ))
        }
        DatasetKind::Hybrid => sample_hybrid(common, rng),
    }
}

pub fn sample_hybrid<R: Rng + ?Sized>(
    common: &CommonParams,
    rng: &mut R,
) -> Result<(PipelineConfig, PipelineConfig)> {
    let plan = sample_hybrid_plan(rng);
    sample_hybrid_with(common, plan, rng)
}

/// Hybrid pair for a given plan.
pub fn sample_hybrid_with<R: Rng + ?Sized>(
    common: &CommonParams,
    plan: HybridPlan,
    rng: &mut R,
) -> Result<(PipelineConfig, PipelineConfig)> {
    let mut c0 = PipelineConfig::from_common(common);
    let mut c1 = c0;
    if plan.noise {
        let (n0, n1) = raw_model::sample_noise_pair(rng)?;
        c0.noise = Some(n0);
        c1.noise = Some(n1);
    } else {
        let n = sample_noise_params(rng);
        c0.noise = Some(n);
        c1.noise = Some(n);
    }
    if plan.cfa {
        if plan.grid_only {
            cfa_grid_shift(rng, &c0, &mut c1);
        } else {
            cfa_splice(rng, &c0, &mut c1);
        }
    }
    if plan.jpeg {
        let (j0, j1) = if plan.grid_only {
            jpeg_grid_shift(rng)
        } else {
            jpeg_splice(rng)
        };
        c0.jpeg = Some(j0);
        c1.jpeg = Some(j1);
    }
    Ok((c0, c1))
}

/// Random-stream labels of the two raw-noise draws. The label is shared when
/// the noise parameters are, so both pipelines see the same realization.
pub fn noise_streams(
    kind: DatasetKind,
    cfg0: &PipelineConfig,
    cfg1: &PipelineConfig,
) -> (String, String) {
    let s0 = format!("noise0/{kind}");
    let s1 = if cfg0.noise == cfg1.noise {
        s0.clone()
    } else {
        format!("noise1/{kind}")
    };
    (s0, s1)
}

/// Per-image parameters shared by every recipe.
pub fn common_params(scheme: &SeedScheme) -> CommonParams {
    pipeline::sample_common_params(&mut scheme.stream("common"))
}

/// Samples the pair of one recipe for one image.
pub fn sample_for_image(
    scheme: &SeedScheme,
    kind: DatasetKind,
) -> Result<(PipelineConfig, PipelineConfig)> {
    let common = common_params(scheme);
    sample_pair(kind, &common, &mut scheme.stream(&format!("params/{kind}")))
}

/// Runs both pipelines of a pair with their seeded noise streams.
pub fn render_pair(
    reference: &RgbImage,
    scheme: &SeedScheme,
    kind: DatasetKind,
    cfg0: &PipelineConfig,
    cfg1: &PipelineConfig,
) -> Result<(PipelineOutput, PipelineOutput)> {
    let (s0, s1) = noise_streams(kind, cfg0, cfg1);
    let p0 = pipeline::run_pipeline_detailed(reference, cfg0, &mut scheme.stream(&s0))?;
    let p1 = pipeline::run_pipeline_detailed(reference, cfg1, &mut scheme.stream(&s1))?;
    Ok((p0, p1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionTags {
    pub demosaic_family: String,
    pub quant_law: String,
    pub segmenter: String,
}

impl Default for VersionTags {
    fn default() -> Self {
        Self {
            demosaic_family: DEMOSAIC_FAMILY.into(),
            quant_law: QUANT_LAW.into(),
            segmenter: SEGMENTER.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Samples clamped before gamma in P0 and P1.
    pub gamma_clamped: [usize; 2],
}

/// Ground truth of one forgery, serialized as its JSON sidecar. Paths are
/// relative to the corpus root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgeryRecord {
    pub image_id: String,
    pub kind: DatasetKind,
    pub mask_kind: MaskKind,
    pub mask_file: String,
    pub forged_file: String,
    pub authentic_file: String,
    pub cfg0: PipelineConfig,
    pub cfg1: PipelineConfig,
    pub seed: u64,
    pub versions: VersionTags,
    pub provenance: Provenance,
}

impl ForgeryRecord {
    /// Path of this record's sidecar, relative to the corpus root.
    pub fn sidecar_file(&self) -> String {
        format!("{}/{}_{}.json", self.kind, self.image_id, self.mask_kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<DatasetKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_kind: Option<MaskKind>,
    pub reason: String,
}

/// Index of a generated corpus, written as `manifest.json` at its root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub kinds: Vec<DatasetKind>,
    pub mask_kinds: Vec<MaskKind>,
    pub versions: VersionTags,
    pub images: Vec<String>,
    /// Sidecar paths of every forgery, sorted.
    pub records: Vec<String>,
    /// Every written file with its content hash, sorted by path.
    pub artifacts: Vec<Artifact>,
    pub assignment: MaskPairAssignment,
    pub skip_count: usize,
    pub skipped: Vec<Skipped>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

pub fn mask_file(image_id: &str, mask_kind: MaskKind) -> String {
    format!("masks/{image_id}_{mask_kind}.pgm")
}

fn write_artifact(root: &Path, rel: &str, bytes: &[u8]) -> Result<Artifact> {
    let path = root.join(rel);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(Artifact {
        path: rel.to_string(),
        sha256: hex::encode(Sha256::digest(bytes)),
    })
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Output of one (image, kind) task.
struct TaskOutput {
    artifacts: Vec<Artifact>,
    records: Vec<String>,
}

fn run_task(
    root: &Path,
    image_id: &str,
    reference: &RgbImage,
    kind: DatasetKind,
    masks: &[(MaskKind, &BinaryMask)],
    master_seed: u64,
) -> Result<TaskOutput> {
    let scheme = SeedScheme::new(master_seed, image_id);
    let (cfg0, cfg1) = sample_for_image(&scheme, kind)?;
    let (p0, p1) = render_pair(reference, &scheme, kind, &cfg0, &cfg1)?;
    let authentic_file = format!("{kind}/{image_id}_authentic.ppm");
    let mut artifacts = vec![write_artifact(
        root,
        &authentic_file,
        &encode_ppm8(&p0.image),
    )?];
    let mut records = Vec::new();
    for &(mask_kind, mask) in masks {
        let forged = merge(&p0.image, &p1.image, mask)?;
        let forged_file = format!("{kind}/{image_id}_{mask_kind}_forged.ppm");
        artifacts.push(write_artifact(root, &forged_file, &encode_ppm8(&forged))?);
        let record = ForgeryRecord {
            image_id: image_id.to_string(),
            kind,
            mask_kind,
            mask_file: mask_file(image_id, mask_kind),
            forged_file,
            authentic_file: authentic_file.clone(),
            cfg0,
            cfg1,
            seed: master_seed,
            versions: VersionTags::default(),
            provenance: Provenance {
                gamma_clamped: [p0.gamma_clamped, p1.gamma_clamped],
            },
        };
        let sidecar = record.sidecar_file();
        artifacts.push(write_artifact(root, &sidecar, &json_bytes(&record)?)?);
        records.push(sidecar);
    }
    Ok(TaskOutput { artifacts, records })
}

/// Writes every requested forgery, the masks and `manifest.json` under `out_dir`.
///
/// Tasks run on the current rayon pool. Per-image failures are logged and
/// listed in the manifest; they never abort the corpus. The output does not
/// depend on the pool size.
pub fn generate_corpus(
    references: &[(String, RgbImage)],
    masks: &MaskSet,
    kinds: &[DatasetKind],
    mask_kinds: &[MaskKind],
    master_seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let root: PathBuf = out_dir.as_ref().to_path_buf();
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;

    let mut skipped: Vec<Skipped> = masks
        .skipped
        .iter()
        .map(|(id, reason)| Skipped {
            image_id: id.clone(),
            kind: None,
            mask_kind: None,
            reason: reason.clone(),
        })
        .collect();

    // which masks each usable image has
    let mut usable: BTreeMap<&str, Vec<(MaskKind, &BinaryMask)>> = BTreeMap::new();
    for (id, _) in references {
        let Some(endo) = masks.endo.get(id) else {
            continue;
        };
        let mut list = Vec::new();
        for &mk in mask_kinds {
            match mk {
                MaskKind::Endo => list.push((mk, endo)),
                MaskKind::Exo => match masks.exo.get(id) {
                    Some(exo) => list.push((mk, exo)),
                    None => skipped.push(Skipped {
                        image_id: id.clone(),
                        kind: None,
                        mask_kind: Some(mk),
                        reason: "no exomask assigned".into(),
                    }),
                },
            }
        }
        usable.insert(id.as_str(), list);
    }

    let mut artifacts = Vec::new();
    for (id, list) in &usable {
        for &(mk, mask) in list {
            artifacts.push(write_artifact(
                &root,
                &mask_file(id, mk),
                &encode_mask_pgm(mask),
            )?);
        }
    }

    let tasks: Vec<(&str, &RgbImage, DatasetKind)> = references
        .iter()
        .filter(|(id, _)| usable.get(id.as_str()).is_some_and(|l| !l.is_empty()))
        .flat_map(|(id, img)| kinds.iter().map(move |&k| (id.as_str(), img, k)))
        .collect();
    let outputs: Vec<(&str, DatasetKind, Result<TaskOutput>)> = tasks
        .par_iter()
        .map(|&(id, img, kind)| {
            (
                id,
                kind,
                run_task(&root, id, img, kind, &usable[id], master_seed),
            )
        })
        .collect();

    let mut records = Vec::new();
    for (id, kind, out) in outputs {
        match out {
            Ok(t) => {
                artifacts.extend(t.artifacts);
                records.extend(t.records);
            }
            Err(e) => {
                log::warn!("skipping {id}/{kind}: {e}");
                skipped.push(Skipped {
                    image_id: id.to_string(),
                    kind: Some(kind),
                    mask_kind: None,
                    reason: e.to_string(),
                });
            }
        }
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    records.sort();
    skipped.sort_by(|a, b| {
        (&a.image_id, a.kind, a.mask_kind).cmp(&(&b.image_id, b.kind, b.mask_kind))
    });

    let manifest = Manifest {
        master_seed,
        kinds: kinds.to_vec(),
        mask_kinds: mask_kinds.to_vec(),
        versions: VersionTags::default(),
        images: references.iter().map(|(id, _)| id.clone()).collect(),
        records,
        artifacts,
        assignment: masks.assignment.clone(),
        skip_count: skipped.len(),
        skipped,
    };
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, json_bytes(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
