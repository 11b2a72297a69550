use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use trace_forge::cfa::CfaPattern;
use trace_forge::forgery::{generate_corpus, Manifest, Skipped, MANIFEST_FILE};
use trace_forge::masks::{build_mask_set, MaskParams};
use trace_forge::raster_io::{read_pgm16, read_ppm8, RgbImage};
use trace_forge::raw_model::half_sample;
use trace_forge::synthetic::synthetic_references;

use crate::GenerateArgs;

/// Reference images of a directory, sorted by file name. PPM files are used
/// as is; PGM files are raw mosaics and get half-sampled with `cfa`.
fn read_references(dir: &Path, cfa: CfaPattern) -> Result<(Vec<(String, RgbImage)>, Vec<Skipped>)> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();

    let mut refs: Vec<(String, RgbImage)> = Vec::new();
    let mut skipped = Vec::new();
    for path in paths {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(String::from) else {
            continue;
        };
        let image = match ext.as_deref() {
            Some("ppm") => read_ppm8(&path),
            Some("pgm") => read_pgm16(&path).and_then(|raw| half_sample(&raw.with_cfa(cfa))),
            _ => continue,
        };
        let reason = match image {
            Ok(_) if refs.iter().any(|(other, _)| *other == id) => {
                format!("duplicate image id from {}", path.display())
            }
            Ok(img) => {
                refs.push((id, img));
                continue;
            }
            Err(e) => e.to_string(),
        };
        log::warn!("skipping {}: {reason}", path.display());
        skipped.push(Skipped {
            image_id: id,
            kind: None,
            mask_kind: None,
            reason,
        });
    }
    Ok((refs, skipped))
}

pub fn run(args: &GenerateArgs) -> Result<ExitCode> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .context("building worker pool")?;

    let (references, unreadable) = match (&args.input, args.synthetic) {
        (Some(dir), _) => read_references(dir, args.cfa)?,
        (None, Some(n)) => (synthetic_references(args.seed, n, args.size), Vec::new()),
        (None, None) => unreachable!("clap requires a source"),
    };
    if references.is_empty() {
        bail!("no usable reference images");
    }

    let manifest = pool.install(|| -> Result<Manifest> {
        let masks = build_mask_set(&references, args.seed, MaskParams::default());
        Ok(generate_corpus(
            &references,
            &masks,
            &args.kinds.0,
            &args.masks.0,
            args.seed,
            &args.out,
        )?)
    })?;

    let manifest = if unreadable.is_empty() {
        manifest
    } else {
        let mut m = manifest;
        m.skipped.extend(unreadable);
        m.skipped.sort_by(|a, b| {
            (&a.image_id, a.kind, a.mask_kind, &a.reason).cmp(&(
                &b.image_id,
                b.kind,
                b.mask_kind,
                &b.reason,
            ))
        });
        m.skip_count = m.skipped.len();
        let path = args.out.join(MANIFEST_FILE);
        let mut json = serde_json::to_vec_pretty(&m)?;
        json.push(b'\n');
        fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        m
    };

    println!(
        "wrote {} forgeries from {} images to {} ({} skipped)",
        manifest.records.len(),
        manifest.images.len(),
        args.out.display(),
        manifest.skip_count
    );
    Ok(ExitCode::SUCCESS)
}
