//! Shared fixtures for integration tests: synthetic tone corpora built with
//! the real manifest generator and synthesizer.
// each test target compiles this module separately and uses a subset
#![allow(dead_code)]

use std::collections::BTreeMap;

use soundscene_core::dataset::{
    generate_manifests, synthesize_mixture, CorpusParams, MixtureManifest, SourceRecord,
    SynthesizedClip,
};
use soundscene_core::{AudioClip, ClassVocabulary, Result};

pub const SAMPLE_RATE: u32 = 32_000;

pub fn tone(freq: f64, secs: f64, amp: f32) -> AudioClip {
    let frames = (secs * SAMPLE_RATE as f64).round() as usize;
    let samples = (0..frames)
        .map(|n| {
            amp * (2.0 * std::f64::consts::PI * freq * n as f64 / SAMPLE_RATE as f64).sin() as f32
        })
        .collect();
    AudioClip::mono(samples, SAMPLE_RATE).unwrap()
}

/// Deterministic low-level pseudo-noise bed.
pub fn noise_bed(secs: f64, level: f32) -> AudioClip {
    let frames = (secs * SAMPLE_RATE as f64).round() as usize;
    let samples = (0..frames)
        .map(|n| level * ((n as f32 * 12.9898).sin() * 43758.547).fract())
        .collect();
    AudioClip::mono(samples, SAMPLE_RATE).unwrap()
}

pub struct ToneCorpus {
    pub manifests: Vec<MixtureManifest>,
    pub clips: Vec<SynthesizedClip>,
    pub sources: BTreeMap<String, AudioClip>,
    pub vocab: ClassVocabulary,
}

/// Build an in-memory corpus over the given classes, one distinct tone per
/// class, mixed with the standard 1–3 event / 5–20 dB envelope unless
/// `params` overrides it.
pub fn tone_corpus(
    classes: &[&str],
    n_clips: usize,
    seed: u64,
    params: CorpusParams,
) -> ToneCorpus {
    let vocab = ClassVocabulary::default();
    let mut pool: BTreeMap<String, Vec<SourceRecord>> = BTreeMap::new();
    let mut sources: BTreeMap<String, AudioClip> = BTreeMap::new();
    for (i, class) in classes.iter().enumerate() {
        let id = format!("{class}_src");
        let freq = 250.0 * (i + 1) as f64;
        sources.insert(id.clone(), tone(freq, 1.0, 0.4));
        pool.insert(
            class.to_string(),
            vec![SourceRecord {
                id,
                class: class.to_string(),
                path: String::new(),
                duration: 1.0,
                flags: Default::default(),
            }],
        );
    }
    sources.insert("noise".to_string(), noise_bed(params.clip_duration, 0.02));

    let manifests = generate_manifests(&pool, "noise", n_clips, seed, &params).unwrap();
    let clips: Vec<SynthesizedClip> = manifests
        .iter()
        .map(|m| {
            let resolve = |id: &str| -> Result<AudioClip> {
                sources
                    .get(id)
                    .cloned()
                    .ok_or_else(|| soundscene_core::Error::UnknownClipId(id.to_string()))
            };
            synthesize_mixture(m, resolve).unwrap()
        })
        .collect();
    ToneCorpus { manifests, clips, sources, vocab }
}
