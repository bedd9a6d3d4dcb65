//! Label-correction post-processor: expand the candidate set past the
//! top-k with above-threshold classes, verify each candidate by separating
//! its stem and re-tagging it, re-rank the survivors, and re-separate the
//! final label set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::backends::{LabelScores, Separator, Tagger};
use crate::error::{Error, Result};
use crate::vocab::ClassVocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBy {
    /// Score of the label when re-tagging its own separated stem.
    RetagScore,
    /// Score from the original mixture tagging.
    OriginalScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyFallback {
    /// Emit the single most confident original label.
    OriginalTop1,
    /// Emit the original top-k labels.
    OriginalTopK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Sigmoid cutoff for candidates beyond the top-k.
    pub threshold: f64,
    pub top_k: usize,
    pub rank_by: RankBy,
    pub empty_fallback: EmptyFallback,
    /// Reuse verification stems for final labels instead of separating again.
    pub reuse_verification_stems: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            top_k: 3,
            rank_by: RankBy::RetagScore,
            empty_fallback: EmptyFallback::OriginalTop1,
            reuse_verification_stems: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// One candidate's verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub class: String,
    pub retag_argmax: String,
    pub retag_score: f64,
    pub kept: bool,
}

/// Full audit record of one correction pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub clip_id: String,
    pub original_scores: LabelScores,
    pub candidates: Vec<(String, f64)>,
    pub verifications: Vec<Verification>,
    pub final_labels: Vec<String>,
    pub fallback_fired: bool,
    #[serde(skip)]
    pub final_stems: BTreeMap<String, AudioClip>,
}

impl AgentTrace {
    /// True-positive removals relative to a known truth set; used to audit
    /// the recall trade-off.
    pub fn removed_labels(&self) -> Vec<&str> {
        self.verifications.iter().filter(|v| !v.kept).map(|v| v.class.as_str()).collect()
    }
}

/// Union of the top-k classes by score and every class above the threshold,
/// in descending score order with ties broken by vocabulary order. Classes
/// scored exactly 0 are never candidates: a zero sigmoid means the tagger
/// did not predict the class at all.
pub fn candidate_labels(
    scores: &LabelScores,
    cfg: &AgentConfig,
    vocab: &ClassVocabulary,
) -> Vec<(String, f64)> {
    let ranked = scores.ranked(vocab);
    ranked
        .iter()
        .enumerate()
        .filter(|(rank, (_, score))| *score > 0.0 && (*rank < cfg.top_k || *score > cfg.threshold))
        .map(|(_, pair)| pair.clone())
        .collect()
}

/// Separate the label's stem, re-tag it, and keep the label iff the re-tag
/// argmax agrees. Returns the keep decision, the re-tag result, and the stem.
pub fn verify_label(
    clip_id: &str,
    mixture: &AudioClip,
    label: &str,
    tagger: &dyn Tagger,
    separator: &dyn Separator,
    vocab: &ClassVocabulary,
) -> Result<(Verification, AudioClip)> {
    let attach = |e: Error| Error::BackendLabel { label: label.to_string(), source: Box::new(e) };
    let stem = separator.separate(clip_id, mixture, label).map_err(attach)?;
    let retag = tagger.tag(&format!("{clip_id}/{label}"), &stem).map_err(attach)?;
    let retag_argmax = retag.argmax(vocab);
    let kept = retag_argmax == label;
    Ok((
        Verification {
            class: label.to_string(),
            retag_score: retag.get(label),
            retag_argmax,
            kept,
        },
        stem,
    ))
}

/// Run one correction pass over a mixture.
pub fn agent_correct(
    clip_id: &str,
    mixture: &AudioClip,
    tagger: &dyn Tagger,
    separator: &dyn Separator,
    cfg: &AgentConfig,
    vocab: &ClassVocabulary,
) -> Result<AgentTrace> {
    cfg.validate()?;
    let original_scores = tagger.tag(clip_id, mixture)?;
    let candidates = candidate_labels(&original_scores, cfg, vocab);

    let mut verifications = Vec::with_capacity(candidates.len());
    let mut stems: BTreeMap<String, AudioClip> = BTreeMap::new();
    for (class, _) in &candidates {
        let (v, stem) = verify_label(clip_id, mixture, class, tagger, separator, vocab)?;
        if v.kept {
            stems.insert(class.clone(), stem);
        }
        verifications.push(v);
    }

    let mut survivors: Vec<(String, f64)> = verifications
        .iter()
        .filter(|v| v.kept)
        .map(|v| {
            let score = match cfg.rank_by {
                RankBy::RetagScore => v.retag_score,
                RankBy::OriginalScore => original_scores.get(&v.class),
            };
            (v.class.clone(), score)
        })
        .collect();
    survivors.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| vocab.index_of(&a.0).cmp(&vocab.index_of(&b.0)))
    });

    let mut fallback_fired = false;
    let final_labels: Vec<String> = if survivors.is_empty() {
        fallback_fired = true;
        let ranked = original_scores.ranked(vocab);
        let n = match cfg.empty_fallback {
            EmptyFallback::OriginalTop1 => 1,
            EmptyFallback::OriginalTopK => cfg.top_k,
        };
        ranked.into_iter().take(n).map(|(c, _)| c).collect()
    } else {
        survivors.into_iter().take(cfg.top_k).map(|(c, _)| c).collect()
    };

    // final separation pass over the corrected label set
    let mut final_stems = BTreeMap::new();
    for class in &final_labels {
        let stem = if cfg.reuse_verification_stems {
            match stems.remove(class) {
                Some(s) => s,
                None => separator.separate(clip_id, mixture, class).map_err(|e| {
                    Error::BackendLabel { label: class.clone(), source: Box::new(e) }
                })?,
            }
        } else {
            separator.separate(clip_id, mixture, class).map_err(|e| Error::BackendLabel {
                label: class.clone(),
                source: Box::new(e),
            })?
        };
        final_stems.insert(class.clone(), stem);
    }

    Ok(AgentTrace {
        clip_id: clip_id.to_string(),
        original_scores,
        candidates,
        verifications,
        final_labels,
        fallback_fired,
        final_stems,
    })
}
