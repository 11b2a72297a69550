use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde_json::Value;
use trace_forge::forgery::ForgeryRecord;
use trace_forge::raster_io::{read_mask_pgm, read_ppm8};

use crate::InspectArgs;

/// Flattens nested objects into dotted keys; arrays and scalars are leaves.
fn flatten(prefix: &str, value: &Value, out: &mut BTreeMap<String, Value>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

fn show(v: Option<&Value>) -> String {
    v.map_or_else(|| "-".to_string(), Value::to_string)
}

pub fn run(args: &InspectArgs) -> Result<ExitCode> {
    let path = &args.record;
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let record: ForgeryRecord =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    // sidecars live one directory below the corpus root
    let root = path
        .parent()
        .and_then(Path::parent)
        .unwrap_or(Path::new("."));

    println!("record: {}", path.display());
    println!(
        "image: {}  kind: {}  mask: {}",
        record.image_id, record.kind, record.mask_kind
    );

    let (mut c0, mut c1) = (BTreeMap::new(), BTreeMap::new());
    flatten("", &serde_json::to_value(record.cfg0)?, &mut c0);
    flatten("", &serde_json::to_value(record.cfg1)?, &mut c1);
    let keys: std::collections::BTreeSet<&String> = c0.keys().chain(c1.keys()).collect();
    println!("configuration (cfg0 -> cfg1):");
    for key in keys {
        let (a, b) = (c0.get(key), c1.get(key));
        if a == b {
            println!("  {key}: {} (shared)", show(a));
        } else {
            println!("  {key}: {} -> {}", show(a), show(b));
        }
    }

    let mask = read_mask_pgm(root.join(&record.mask_file))?;
    let forged = read_ppm8(root.join(&record.forged_file))?;
    let authentic = read_ppm8(root.join(&record.authentic_file))?;
    println!("mask area fraction: {:.4}", mask.area_fraction());

    if forged.dims() != authentic.dims() || forged.dims() != (mask.width, mask.height) {
        bail!(
            "size mismatch: forged {:?}, authentic {:?}, mask {}x{}",
            forged.dims(),
            authentic.dims(),
            mask.width,
            mask.height
        );
    }
    let outside_diff = (0..forged.len())
        .filter(|&i| mask.data[i] == 0)
        .filter(|&i| (0..3).any(|c| forged.planes[c][i] != authentic.planes[c][i]))
        .count();
    if outside_diff == 0 {
        println!("residual-support: OK");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("residual-support: FAIL ({outside_diff} pixels differ outside the mask)");
        Ok(ExitCode::from(1))
    }
}
