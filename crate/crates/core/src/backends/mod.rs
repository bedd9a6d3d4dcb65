//! Pluggable tagger and separator backends: ground-truth oracles for
//! testing, a feature-template tagger, score ensembling, and the
//! external-process protocol for real neural models.

pub mod external;
pub mod protocol;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::dataset::MixtureManifest;
use crate::error::{Error, Result};
use crate::features::{feature_summary, FeatureConfig};
use crate::vocab::ClassVocabulary;

/// Per-class sigmoid-style scores in [0, 1], complete over the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub scores: BTreeMap<String, f64>,
}

impl LabelScores {
    pub fn new(scores: BTreeMap<String, f64>, vocab: &ClassVocabulary) -> Result<Self> {
        for class in vocab.labels() {
            match scores.get(class) {
                None => {
                    return Err(Error::ResponseValidation(format!(
                        "scores missing vocabulary class '{class}'"
                    )))
                }
                Some(&s) if !(0.0..=1.0).contains(&s) || !s.is_finite() => {
                    return Err(Error::ResponseValidation(format!(
                        "score {s} for class '{class}' outside [0, 1]"
                    )))
                }
                _ => {}
            }
        }
        if let Some(extra) = scores.keys().find(|k| !vocab.contains(k)) {
            return Err(Error::ResponseValidation(format!("unknown class '{extra}' in scores")));
        }
        Ok(Self { scores })
    }

    pub fn uniform(value: f64, vocab: &ClassVocabulary) -> Self {
        Self { scores: vocab.labels().iter().map(|c| (c.clone(), value)).collect() }
    }

    pub fn get(&self, class: &str) -> f64 {
        self.scores.get(class).copied().unwrap_or(0.0)
    }

    /// Highest-scoring class; ties broken by vocabulary order (earliest wins).
    pub fn argmax(&self, vocab: &ClassVocabulary) -> String {
        let mut best = &vocab.labels()[0];
        for class in &vocab.labels()[1..] {
            if self.get(class) > self.get(best) {
                best = class;
            }
        }
        best.clone()
    }

    /// Classes in descending score order, ties broken by vocabulary order.
    pub fn ranked(&self, vocab: &ClassVocabulary) -> Vec<(String, f64)> {
        let mut out: Vec<(usize, String, f64)> = vocab
            .labels()
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.clone(), self.get(c)))
            .collect();
        out.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
        out.into_iter().map(|(_, c, s)| (c, s)).collect()
    }
}

/// Multi-label audio tagger. `clip_id` identifies the clip for backends
/// that answer from a manifest; samples are what models consume.
pub trait Tagger {
    fn tag(&self, clip_id: &str, clip: &AudioClip) -> Result<LabelScores>;
}

/// Single-class source separator. Output must match the input in length
/// and sample rate.
pub trait Separator {
    fn separate(&self, clip_id: &str, clip: &AudioClip, label: &str) -> Result<AudioClip>;
}

/// Answers tag queries from ground-truth manifests: 1.0 for each truth
/// class, a configurable floor elsewhere, plus optional injected false
/// positives for controlled-error tests.
///
/// Stem queries with ids of the form `"{clip_id}/{label}"` (the ids the
/// agent uses when re-tagging a separated stem) are answered by the derived
/// truth: the label itself when it is a truth class of the parent clip
/// (a ground-truth stem), nothing otherwise (a silence-fallback stem).
pub struct OracleTagger {
    truth: BTreeMap<String, Vec<String>>,
    vocab: ClassVocabulary,
    pub floor: f64,
    /// (clip_id, class, score) triples added on top of the oracle answer.
    pub injected: Vec<(String, String, f64)>,
}

impl OracleTagger {
    pub fn new(manifests: &[MixtureManifest], vocab: ClassVocabulary) -> Self {
        let truth = manifests
            .iter()
            .map(|m| (m.clip_id.clone(), m.truth_classes().into_iter().collect()))
            .collect();
        Self { truth, vocab, floor: 0.0, injected: Vec::new() }
    }

    /// Register or override the truth set for an id. Overriding a stem id
    /// lets a test emulate a corrupted re-tagger.
    pub fn set_truth(&mut self, clip_id: impl Into<String>, classes: Vec<String>) {
        self.truth.insert(clip_id.into(), classes);
    }

    pub fn inject_fp(&mut self, clip_id: &str, class: &str, score: f64) {
        self.injected.push((clip_id.into(), class.into(), score));
    }

    fn truth_for(&self, clip_id: &str) -> Result<Vec<String>> {
        if let Some(truth) = self.truth.get(clip_id) {
            return Ok(truth.clone());
        }
        if let Some((parent, label)) = clip_id.rsplit_once('/') {
            if let Some(parent_truth) = self.truth.get(parent) {
                return Ok(if parent_truth.iter().any(|c| c == label) {
                    vec![label.to_string()]
                } else {
                    Vec::new()
                });
            }
        }
        Err(Error::UnknownClipId(clip_id.to_string()))
    }
}

impl Tagger for OracleTagger {
    fn tag(&self, clip_id: &str, _clip: &AudioClip) -> Result<LabelScores> {
        let truth = self.truth_for(clip_id)?;
        let mut scores = LabelScores::uniform(self.floor, &self.vocab);
        for class in &truth {
            scores.scores.insert(class.clone(), 1.0);
        }
        for (id, class, score) in &self.injected {
            if id == clip_id {
                scores.scores.insert(class.clone(), *score);
            }
        }
        Ok(scores)
    }
}

/// Fallback behavior when the oracle separator is asked for a class that is
/// not in the clip's ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleFallback {
    Silence,
    Mixture,
}

/// Answers separate queries from stored ground-truth stems.
pub struct OracleSeparator {
    stems: BTreeMap<(String, String), AudioClip>,
    pub fallback: OracleFallback,
}

impl OracleSeparator {
    pub fn new(stems: BTreeMap<(String, String), AudioClip>) -> Self {
        Self { stems, fallback: OracleFallback::Silence }
    }

    pub fn known_clip(&self, clip_id: &str) -> bool {
        self.stems.keys().any(|(id, _)| id == clip_id)
    }
}

impl Separator for OracleSeparator {
    fn separate(&self, clip_id: &str, clip: &AudioClip, label: &str) -> Result<AudioClip> {
        if !self.known_clip(clip_id) {
            return Err(Error::UnknownClipId(clip_id.to_string()));
        }
        if let Some(stem) = self.stems.get(&(clip_id.to_string(), label.to_string())) {
            return Ok(stem.clone());
        }
        Ok(match self.fallback {
            OracleFallback::Silence => AudioClip::silence(clip.len(), clip.sample_rate()),
            OracleFallback::Mixture => clip.clone(),
        })
    }
}

/// Nearest-template tagger over z-scored feature summaries. Per class,
/// score = exp(−d²/τ) against the class's mean summary vector.
pub struct TemplateTagger {
    templates: BTreeMap<String, Vec<f64>>,
    mean: Vec<f64>,
    std: Vec<f64>,
    cfg: FeatureConfig,
    vocab: ClassVocabulary,
    pub tau: f64,
}

impl TemplateTagger {
    pub fn train(
        training: &[(AudioClip, String)],
        cfg: FeatureConfig,
        vocab: ClassVocabulary,
    ) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut summaries = Vec::with_capacity(training.len());
        for (clip, class) in training {
            vocab.require(class)?;
            summaries.push((feature_summary(clip, 0, &cfg)?, class.clone()));
        }
        let dim = summaries[0].0.len();
        let n = summaries.len() as f64;
        let mut mean = vec![0.0; dim];
        for (s, _) in &summaries {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; dim];
        for (s, _) in &summaries {
            for ((acc, v), m) in std.iter_mut().zip(s).zip(&mean) {
                *acc += (v - m) * (v - m) / n;
            }
        }
        // degenerate dimensions standardize to zero offset
        let std: Vec<f64> = std.iter().map(|v| v.sqrt().max(1e-12)).collect();

        let zscore = |s: &[f64]| -> Vec<f64> {
            s.iter().zip(&mean).zip(&std).map(|((v, m), sd)| (v - m) / sd).collect()
        };
        let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
        for (s, class) in &summaries {
            let z = zscore(s);
            let entry = sums.entry(class.clone()).or_insert_with(|| (vec![0.0; dim], 0));
            for (a, v) in entry.0.iter_mut().zip(&z) {
                *a += v;
            }
            entry.1 += 1;
        }
        let templates = sums
            .into_iter()
            .map(|(class, (sum, count))| {
                (class, sum.into_iter().map(|v| v / count as f64).collect())
            })
            .collect();
        Ok(Self { templates, mean, std, cfg, vocab, tau: 1.0 })
    }
}

impl Tagger for TemplateTagger {
    fn tag(&self, _clip_id: &str, clip: &AudioClip) -> Result<LabelScores> {
        let summary = feature_summary(clip, 0, &self.cfg)?;
        let z: Vec<f64> = summary
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), sd)| (v - m) / sd)
            .collect();
        let mut scores = LabelScores::uniform(0.0, &self.vocab);
        for (class, template) in &self.templates {
            let d2: f64 = z.iter().zip(template).map(|(a, b)| (a - b) * (a - b)).sum();
            scores.scores.insert(class.clone(), (-d2 / self.tau).exp());
        }
        Ok(scores)
    }
}

/// Weighted ensemble configuration. Weights are normalized internally, so
/// only their ratios matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub weights: Vec<f64>,
}

impl EnsembleConfig {
    pub fn validate(&self, n_members: usize) -> Result<()> {
        if self.weights.len() != n_members {
            return Err(Error::InvalidConfig(format!(
                "{} weights for {} members",
                self.weights.len(),
                n_members
            )));
        }
        if self.weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidConfig("weights must be nonnegative and finite".into()));
        }
        if self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig("weight sum must be positive".into()));
        }
        Ok(())
    }
}

/// Per-class weighted arithmetic mean of member scores.
pub fn ensemble_scores(per_member: &[LabelScores], cfg: &EnsembleConfig) -> Result<LabelScores> {
    cfg.validate(per_member.len())?;
    let total: f64 = cfg.weights.iter().sum();
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for (member, &w) in per_member.iter().zip(&cfg.weights) {
        for (class, &s) in &member.scores {
            *scores.entry(class.clone()).or_insert(0.0) += s * w / total;
        }
    }
    Ok(LabelScores { scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EventSpec, MixtureManifest};
    use proptest::prelude::*;

    fn vocab() -> ClassVocabulary {
        ClassVocabulary::default()
    }

    fn manifest(clip_id: &str, classes: &[&str]) -> MixtureManifest {
        MixtureManifest {
            clip_id: clip_id.into(),
            duration: 10.0,
            sample_rate: 32_000,
            events: classes
                .iter()
                .map(|c| EventSpec {
                    source_id: format!("{c}_src"),
                    class: c.to_string(),
                    onset: 0.0,
                    snr_db: 10.0,
                })
                .collect(),
            noise: "noise".into(),
            seed: 0,
            normalization_gain: None,
        }
    }

    #[test]
    fn oracle_tagger_scores_truth_at_one() {
        let tagger = OracleTagger::new(&[manifest("c1", &["Cough"])], vocab());
        let clip = AudioClip::silence(10, 32_000);
        let scores = tagger.tag("c1", &clip).unwrap();
        assert_eq!(scores.get("Cough"), 1.0);
        assert_eq!(scores.get("Typing"), 0.0);
        // determinism across calls
        assert_eq!(scores, tagger.tag("c1", &clip).unwrap());
        assert!(matches!(tagger.tag("nope", &clip), Err(Error::UnknownClipId(_))));
    }

    #[test]
    fn oracle_tagger_injected_fp_present() {
        let mut tagger = OracleTagger::new(&[manifest("c1", &["Cough"])], vocab());
        tagger.inject_fp("c1", "Typing", 0.9);
        let scores = tagger.tag("c1", &AudioClip::silence(10, 32_000)).unwrap();
        assert_eq!(scores.get("Typing"), 0.9);
        assert_eq!(scores.get("Cough"), 1.0);
    }

    #[test]
    fn oracle_separator_fallbacks() {
        let sr = 32_000;
        let stem = AudioClip::mono(vec![0.25; 100], sr).unwrap();
        let mut stems = BTreeMap::new();
        stems.insert(("c1".to_string(), "Cough".to_string()), stem.clone());
        let mut sep = OracleSeparator::new(stems);
        let mix = AudioClip::mono(vec![0.5; 100], sr).unwrap();

        assert_eq!(sep.separate("c1", &mix, "Cough").unwrap(), stem);
        let silent = sep.separate("c1", &mix, "Typing").unwrap();
        assert!(silent.channel(0).unwrap().iter().all(|&s| s == 0.0));
        sep.fallback = OracleFallback::Mixture;
        assert_eq!(sep.separate("c1", &mix, "Typing").unwrap(), mix);
        assert!(sep.separate("c2", &mix, "Cough").is_err());
    }

    #[test]
    fn ensemble_paper_weights_and_hand_arithmetic() {
        let v = vocab();
        let cfg = EnsembleConfig { weights: vec![0.35, 0.3, 0.2, 0.15] };
        let members: Vec<LabelScores> = (0..4).map(|_| LabelScores::uniform(1.0, &v)).collect();
        let out = ensemble_scores(&members, &cfg).unwrap();
        for class in v.labels() {
            assert!((out.get(class) - 1.0).abs() < 1e-12);
        }

        let cfg2 = EnsembleConfig { weights: vec![1.0, 1.0] };
        let mut a = LabelScores::uniform(0.2, &v);
        let b = LabelScores::uniform(0.6, &v);
        let out2 = ensemble_scores(&[a.clone(), b], &cfg2).unwrap();
        assert!((out2.get("Cough") - 0.4).abs() < 1e-12);

        // identical members -> identity
        a = LabelScores::uniform(0.37, &v);
        let out3 = ensemble_scores(&[a.clone(), a.clone()], &cfg2).unwrap();
        for class in v.labels() {
            assert!((out3.get(class) - a.get(class)).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_errors() {
        let v = vocab();
        let member = LabelScores::uniform(0.5, &v);
        assert!(ensemble_scores(&[member.clone()], &EnsembleConfig { weights: vec![1.0, 2.0] })
            .is_err());
        assert!(
            ensemble_scores(&[member], &EnsembleConfig { weights: vec![0.0] }).is_err()
        );
    }

    proptest! {
        #[test]
        fn ensemble_monotone_in_member_score(
            base in 0.0f64..1.0,
            bump in 0.0f64..0.5,
            w in proptest::collection::vec(0.01f64..2.0, 3),
        ) {
            let v = vocab();
            let cfg = EnsembleConfig { weights: w };
            let members: Vec<LabelScores> = vec![
                LabelScores::uniform(base, &v),
                LabelScores::uniform(0.5, &v),
                LabelScores::uniform(0.3, &v),
            ];
            let before = ensemble_scores(&members, &cfg).unwrap().get("Cough");
            let mut raised = members.clone();
            let new = (base + bump).min(1.0);
            raised[0].scores.insert("Cough".into(), new);
            let after = ensemble_scores(&raised, &cfg).unwrap().get("Cough");
            prop_assert!(after >= before - 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&after));
        }
    }

    #[test]
    fn label_scores_validation() {
        let v = vocab();
        let mut scores: BTreeMap<String, f64> =
            v.labels().iter().map(|c| (c.clone(), 0.5)).collect();
        assert!(LabelScores::new(scores.clone(), &v).is_ok());
        scores.insert("Cough".into(), 1.5);
        assert!(matches!(LabelScores::new(scores.clone(), &v), Err(Error::ResponseValidation(_))));
        scores.remove("Cough");
        assert!(matches!(LabelScores::new(scores, &v), Err(Error::ResponseValidation(_))));
    }

    fn tone(freq: f64, amp: f32) -> AudioClip {
        let sr = 32_000;
        let s = (0..16_000usize)
            .map(|n| amp * (2.0 * std::f64::consts::PI * freq * n as f64 / sr as f64).sin() as f32)
            .collect();
        AudioClip::mono(s, sr).unwrap()
    }

    #[test]
    fn template_tagger_recognizes_training_clips() {
        let v = vocab();
        let bright = tone(5200.0, 0.5);
        let low = tone(320.0, 0.5);
        let training = vec![
            (bright.clone(), "Doorbell".to_string()),
            (low.clone(), "MusicalKeyboard".to_string()),
        ];
        let tagger = TemplateTagger::train(&training, FeatureConfig::default(), v.clone()).unwrap();

        let s1 = tagger.tag("q1", &bright).unwrap();
        assert_eq!(s1.argmax(&v), "Doorbell");
        assert!(s1.get("Doorbell") > s1.get("MusicalKeyboard"));
        let s2 = tagger.tag("q2", &low).unwrap();
        assert_eq!(s2.argmax(&v), "MusicalKeyboard");
        assert!(s2.get("MusicalKeyboard") > s2.get("Doorbell"));
    }

    #[test]
    fn template_tagger_silence_ties_on_symmetric_fixture() {
        // one example per class: z-scored templates are mirror images, so a
        // zero summary is equidistant from both
        let v = vocab();
        let training = vec![
            (tone(5200.0, 0.5), "Doorbell".to_string()),
            (tone(320.0, 0.5), "MusicalKeyboard".to_string()),
        ];
        let tagger = TemplateTagger::train(&training, FeatureConfig::default(), v).unwrap();
        let scores = tagger.tag("q", &AudioClip::silence(16_000, 32_000)).unwrap();
        assert!((scores.get("Doorbell") - scores.get("MusicalKeyboard")).abs() < 1e-9);
    }

    #[test]
    fn template_tagger_training_order_irrelevant() {
        let v = vocab();
        let a = (tone(5200.0, 0.5), "Doorbell".to_string());
        let b = (tone(4800.0, 0.4), "Doorbell".to_string());
        let c = (tone(320.0, 0.5), "MusicalKeyboard".to_string());
        let t1 = TemplateTagger::train(&[a.clone(), b.clone(), c.clone()], FeatureConfig::default(), v.clone()).unwrap();
        let t2 = TemplateTagger::train(&[c, b, a], FeatureConfig::default(), v).unwrap();
        let query = tone(5000.0, 0.45);
        let s1 = t1.tag("q", &query).unwrap();
        let s2 = t2.tag("q", &query).unwrap();
        for class in vocab().labels() {
            // summation order differs, so allow float noise
            let (a, b) = (s1.get(class), s2.get(class));
            assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-30), "{class}: {a} vs {b}");
        }
    }

    #[test]
    fn template_tagger_rejects_empty_training() {
        assert!(matches!(
            TemplateTagger::train(&[], FeatureConfig::default(), vocab()),
            Err(Error::EmptyTrainingSet)
        ));
    }
}
