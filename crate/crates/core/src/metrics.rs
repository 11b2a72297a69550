//! Heatmap-weighted Matthews correlation coefficient.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster_io::{BinaryMask, Heatmap};

/// Tag written next to every score so alternative weightings can coexist.
pub const MCC_VARIANT: &str = "soft-v1";

/// Affine rescale to `[0,1]`; constant maps become 0.5.
pub fn normalize_heatmap(h: &Heatmap) -> Heatmap {
    let (min, max) = h
        .values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let values = if h.values.is_empty() || !(max > min) {
        vec![0.5; h.values.len()]
    } else {
        let (min, span) = (min as f64, (max as f64) - (min as f64));
        h.values
            .iter()
            .map(|&v| (((v as f64 - min) / span) as f32).clamp(0.0, 1.0))
            .collect()
    };
    Heatmap {
        width: h.width,
        height: h.height,
        values,
    }
}

/// Confusion matrix accumulating heatmap mass instead of counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionWeights {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tn: f64,
}

impl ConfusionWeights {
    pub fn from_heatmap(h: &Heatmap, mask: &BinaryMask) -> Result<Self> {
        if (h.width, h.height) != (mask.width, mask.height) {
            return Err(Error::dims((h.width, h.height), (mask.width, mask.height)));
        }
        let forged = mask.area();
        if forged == 0 || forged == mask.data.len() {
            return Err(Error::UndefinedMask(format!(
                "mask has {forged} forged pixels out of {}",
                mask.data.len()
            )));
        }
        let mut w = ConfusionWeights {
            tp: 0.0,
            fp: 0.0,
            fn_: 0.0,
            tn: 0.0,
        };
        for (&v, &m) in h.values.iter().zip(&mask.data) {
            let v = v as f64;
            if m != 0 {
                w.tp += v;
                w.fn_ += 1.0 - v;
            } else {
                w.fp += v;
                w.tn += 1.0 - v;
            }
        }
        Ok(w)
    }

    /// MCC, defined as 0 when any marginal vanishes.
    pub fn mcc(&self) -> f64 {
        let ConfusionWeights { tp, fp, fn_, tn } = *self;
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom <= 0.0 {
            return 0.0;
        }
        ((tp * tn - fp * fn_) / denom.sqrt()).clamp(-1.0, 1.0)
    }
}

/// MCC of a normalized heatmap against a mask.
pub fn weighted_mcc(h: &Heatmap, mask: &BinaryMask) -> Result<f64> {
    if let Some(v) = h.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Validation(format!(
            "heatmap value {v} outside [0,1]; normalize first"
        )));
    }
    Ok(ConfusionWeights::from_heatmap(h, mask)?.mcc())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

/// Mean and population standard deviation; `None` for an empty list.
pub fn summarize(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    // fixed summation order makes the result order-independent bit for bit
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(Aggregate {
        mean,
        std: var.sqrt(),
        n: sorted.len(),
    })
}

/// One scored image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub image_id: String,
    pub kind: String,
    pub mask_kind: String,
    pub mcc: f64,
}

/// Per-image scores plus per-(kind, mask kind) aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccReport {
    pub mcc_variant: String,
    pub per_image: Vec<ImageScore>,
    /// `aggregates[kind][mask_kind]`
    pub aggregates: BTreeMap<String, BTreeMap<String, Aggregate>>,
}

pub fn aggregate(scores: &[ImageScore]) -> MccReport {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for s in scores {
        groups
            .entry((s.kind.clone(), s.mask_kind.clone()))
            .or_default()
            .push(s.mcc);
    }
    let mut aggregates: BTreeMap<String, BTreeMap<String, Aggregate>> = BTreeMap::new();
    for ((kind, mask_kind), values) in groups {
        if let Some(a) = summarize(&values) {
            aggregates.entry(kind).or_default().insert(mask_kind, a);
        }
    }
    let mut per_image = scores.to_vec();
    per_image.sort_by(|a, b| {
        (&a.kind, &a.mask_kind, &a.image_id).cmp(&(&b.kind, &b.mask_kind, &b.image_id))
    });
    MccReport {
        mcc_variant: MCC_VARIANT.to_string(),
        per_image,
        aggregates,
    }
}
