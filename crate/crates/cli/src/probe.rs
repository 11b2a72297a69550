use std::process::ExitCode;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use trace_forge::probes::{
    cfa_probe, noise_probe, zero_grid_probe, CfaProbeParams, NoiseProbeParams, Window,
    ZeroProbeParams,
};
use trace_forge::raster_io::{read_ppm8, write_heatmap_pfm, Heatmap, RgbImage};

use crate::{ProbeArgs, ProbeMethod, ProbeOptions};

/// Runs one probe, returning its heatmap and a JSON summary of its global
/// estimate.
pub fn apply(
    method: ProbeMethod,
    image: &RgbImage,
    options: &ProbeOptions,
) -> Result<(Heatmap, Value)> {
    let window = Window {
        size: options.window as usize,
        stride: options.stride as usize,
    };
    Ok(match method {
        ProbeMethod::Zero => {
            let p = zero_grid_probe(image, ZeroProbeParams { window })?;
            let summary = json!({ "method": "zero", "grid": p.grid, "z": p.z });
            (p.heatmap, summary)
        }
        ProbeMethod::Cfa => {
            let p = cfa_probe(image, CfaProbeParams { window });
            let summary = json!({
                "method": "cfa",
                "pattern": p.pattern.map(|p| p.to_string()),
                "algorithm": p.algorithm.map(|a| a.to_string()),
                "errors": p.errors,
            });
            (p.heatmap, summary)
        }
        ProbeMethod::Noise => {
            let params = NoiseProbeParams {
                block: options.block as usize,
                ..Default::default()
            };
            let p = noise_probe(image, params);
            let summary = json!({
                "method": "noise",
                "blocks": [p.blocks_x, p.blocks_y],
                "median_sigma": median(&p.estimates),
            });
            (p.heatmap, summary)
        }
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    match s.len() {
        0 => 0.0,
        n if n % 2 == 1 => s[n / 2],
        n => (s[n / 2 - 1] + s[n / 2]) / 2.0,
    }
}

pub fn run(args: &ProbeArgs) -> Result<ExitCode> {
    let image = read_ppm8(&args.image)?;
    let (heatmap, summary) = apply(args.method, &image, &args.options)?;
    if let Some(out) = &args.out {
        write_heatmap_pfm(&heatmap, out).with_context(|| format!("writing {}", out.display()))?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}
