use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trace_forge::forgery::{ForgeryRecord, Manifest};
use trace_forge::metrics::{aggregate, normalize_heatmap, weighted_mcc, ImageScore, MccReport};
use trace_forge::raster_io::{
    read_heatmap_pfm, read_mask_pgm, read_ppm8, write_heatmap_pfm, Heatmap,
};

use crate::{probe, EvaluateArgs};

/// A manifest entry that could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unscored {
    pub record: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    #[serde(flatten)]
    pub report: MccReport,
    pub missing: Vec<Unscored>,
}

/// Heatmap path of a record, relative to the heatmap directory.
pub fn heatmap_file(record: &ForgeryRecord) -> String {
    format!(
        "{}/{}_{}.pfm",
        record.kind, record.image_id, record.mask_kind
    )
}

fn load_record(path: &Path) -> Result<ForgeryRecord> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_slice(&bytes)?)
}

enum Outcome {
    Scored(ImageScore),
    Missing(String),
}

fn score(args: &EvaluateArgs, root: &Path, sidecar: &str) -> Result<Outcome> {
    let record = load_record(&root.join(sidecar))?;
    let rel = heatmap_file(&record);
    let heatmap: Heatmap = match (&args.heatmaps, args.probe) {
        (Some(dir), _) => {
            let path = dir.join(&rel);
            if !path.exists() {
                return Ok(Outcome::Missing(format!(
                    "missing heatmap {}",
                    path.display()
                )));
            }
            read_heatmap_pfm(&path)?
        }
        (None, Some(method)) => {
            let image = read_ppm8(root.join(&record.forged_file))?;
            let (h, _) = probe::apply(method, &image, &args.options)?;
            if let Some(dir) = &args.save_heatmaps {
                let path: PathBuf = dir.join(&rel);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)
                        .with_context(|| format!("creating {}", parent.display()))?;
                }
                write_heatmap_pfm(&h, &path)?;
            }
            h
        }
        (None, None) => unreachable!("clap requires a detector"),
    };
    let mask = read_mask_pgm(root.join(&record.mask_file))?;
    let mcc = weighted_mcc(&normalize_heatmap(&heatmap), &mask)?;
    Ok(Outcome::Scored(ImageScore {
        image_id: record.image_id,
        kind: record.kind.to_string(),
        mask_kind: record.mask_kind.to_string(),
        mcc,
    }))
}

fn write_csv(path: &Path, scores: &[ImageScore]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["kind", "mask_kind", "image_id", "mcc"])?;
    for s in scores {
        w.write_record([
            s.kind.as_str(),
            s.mask_kind.as_str(),
            s.image_id.as_str(),
            &s.mcc.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &EvaluateArgs) -> Result<ExitCode> {
    let manifest = Manifest::load(&args.manifest)?;
    let root = args
        .manifest
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();

    let outcomes: Vec<(String, Result<Outcome>)> = manifest
        .records
        .par_iter()
        .map(|sidecar| (sidecar.clone(), score(args, &root, sidecar)))
        .collect();

    let mut scores = Vec::new();
    let mut missing = Vec::new();
    for (record, outcome) in outcomes {
        match outcome {
            Ok(Outcome::Scored(s)) => scores.push(s),
            Ok(Outcome::Missing(reason)) => missing.push(Unscored { record, reason }),
            Err(e) => missing.push(Unscored {
                record,
                reason: format!("{e:#}"),
            }),
        }
    }
    missing.sort_by(|a, b| a.record.cmp(&b.record));
    for m in &missing {
        log::warn!("{}: {}", m.record, m.reason);
    }

    let results = Results {
        report: aggregate(&scores),
        missing,
    };
    let mut json = serde_json::to_vec_pretty(&results)?;
    json.push(b'\n');
    fs::write(&args.out, json).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(csv) = &args.csv {
        write_csv(csv, &results.report.per_image)?;
    }

    for (kind, by_mask) in &results.report.aggregates {
        for (mask_kind, a) in by_mask {
            println!(
                "{kind:<12} {mask_kind:<5} mcc {:.4} +- {:.4} (n={})",
                a.mean, a.std, a.n
            );
        }
    }
    if !results.missing.is_empty() {
        println!("{} entries not scored", results.missing.len());
    }
    Ok(ExitCode::SUCCESS)
}
