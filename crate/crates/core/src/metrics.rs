//! Evaluation metrics: set-based, macro-averaged, and FP-penalized tagging
//! accuracy, plus SDR and class-aware SDR improvement (CA-SDRi).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::vocab::LabelSet;

/// SDR values are clamped to keep corpus aggregates finite.
pub const SDR_CLAMP_DB: f64 = 100.0;

/// TP/FN/FP tallies for one clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp: usize,
}

/// tp = |pred ∩ truth|, fn = |truth \ pred|, fp = |pred \ truth|.
pub fn count_matches(pred: &LabelSet, truth: &LabelSet) -> EvalCounts {
    let tp = pred.intersection_count(truth);
    EvalCounts { tp, fn_: truth.len() - tp, fp: pred.len() - tp }
}

/// TP / (TP + FN + FP). Both sets empty is vacuously perfect (1.0).
pub fn fp_penalized_accuracy(counts: &EvalCounts) -> f64 {
    let denom = counts.tp + counts.fn_ + counts.fp;
    if denom == 0 {
        1.0
    } else {
        counts.tp as f64 / denom as f64
    }
}

/// |pred ∩ truth| / |truth|; false positives are not charged.
/// Empty truth: 1.0 if pred is also empty, else 0.0.
pub fn macro_accuracy(pred: &LabelSet, truth: &LabelSet) -> f64 {
    if truth.is_empty() {
        return if pred.is_empty() { 1.0 } else { 0.0 };
    }
    pred.intersection_count(truth) as f64 / truth.len() as f64
}

/// 1 iff the prediction equals the ground truth exactly.
pub fn set_accuracy(pred: &LabelSet, truth: &LabelSet) -> u8 {
    u8::from(pred == truth)
}

/// 10·log10(‖ref‖² / ‖ref − est‖²) over one channel, clamped to ±100 dB.
/// A zero-energy reference gives −100 dB.
pub fn sdr(est: &AudioClip, reference: &AudioClip, channel: usize) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::LengthMismatch { expected: reference.len(), actual: est.len() });
    }
    if est.sample_rate() != reference.sample_rate() {
        return Err(Error::SampleRateMismatch {
            expected: reference.sample_rate(),
            actual: est.sample_rate(),
        });
    }
    let e = est.channel(channel)?;
    let r = reference.channel(channel)?;
    let ref_energy: f64 = r.iter().map(|&s| (s as f64) * (s as f64)).sum();
    if ref_energy == 0.0 {
        return Ok(-SDR_CLAMP_DB);
    }
    let err_energy: f64 =
        r.iter().zip(e).map(|(&a, &b)| ((a - b) as f64) * ((a - b) as f64)).sum();
    if err_energy == 0.0 {
        return Ok(SDR_CLAMP_DB);
    }
    Ok((10.0 * (ref_energy / err_energy).log10()).clamp(-SDR_CLAMP_DB, SDR_CLAMP_DB))
}

/// Class-aware SDR improvement. For each class in the union of truth and
/// estimate keys: a class present in both contributes
/// sdr(est, truth) − sdr(mixture, truth); a false positive or false negative
/// contributes 0. Returns the mean over the union and the per-class map.
pub fn ca_sdri(
    truth_stems: &BTreeMap<String, AudioClip>,
    est_stems: &BTreeMap<String, AudioClip>,
    mixture: &AudioClip,
    channel: usize,
) -> Result<(f64, BTreeMap<String, f64>)> {
    let union: Vec<&String> = {
        let mut keys: Vec<&String> = truth_stems.keys().chain(est_stems.keys()).collect();
        keys.sort();
        keys.dedup();
        keys
    };
    if union.is_empty() {
        return Err(Error::NothingToEvaluate);
    }
    let mut per_class = BTreeMap::new();
    for class in &union {
        let sdri = match (truth_stems.get(*class), est_stems.get(*class)) {
            (Some(truth), Some(est)) => {
                sdr(est, truth, channel)? - sdr(mixture, truth, channel)?
            }
            _ => 0.0, // FP or FN
        };
        per_class.insert((*class).clone(), sdri);
    }
    let mean = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok((mean, per_class))
}

/// All per-clip metric results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEval {
    pub clip_id: String,
    pub set_accuracy: u8,
    pub macro_accuracy: f64,
    pub fp_penalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ca_sdri: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_class_sdri: BTreeMap<String, f64>,
}

impl ClipEval {
    /// Tagging-only evaluation from label sets.
    pub fn from_labels(clip_id: impl Into<String>, pred: &LabelSet, truth: &LabelSet) -> Self {
        let counts = count_matches(pred, truth);
        Self {
            clip_id: clip_id.into(),
            set_accuracy: set_accuracy(pred, truth),
            macro_accuracy: macro_accuracy(pred, truth),
            fp_penalized: fp_penalized_accuracy(&counts),
            ca_sdri: None,
            per_class_sdri: BTreeMap::new(),
        }
    }
}

/// Corpus summary: arithmetic mean of each per-clip metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_clips: usize,
    pub set_accuracy: f64,
    pub macro_accuracy: f64,
    pub fp_penalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ca_sdri: Option<f64>,
}

pub fn summarize(clips: &[ClipEval]) -> CorpusSummary {
    let n = clips.len().max(1) as f64;
    let sdri_values: Vec<f64> = clips.iter().filter_map(|c| c.ca_sdri).collect();
    CorpusSummary {
        n_clips: clips.len(),
        set_accuracy: clips.iter().map(|c| c.set_accuracy as f64).sum::<f64>() / n,
        macro_accuracy: clips.iter().map(|c| c.macro_accuracy).sum::<f64>() / n,
        fp_penalized: clips.iter().map(|c| c.fp_penalized).sum::<f64>() / n,
        ca_sdri: (!sdri_values.is_empty())
            .then(|| sdri_values.iter().sum::<f64>() / sdri_values.len() as f64),
    }
}
