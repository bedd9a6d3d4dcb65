//! Deterministic fixtures for the benchmark targets.

use std::collections::BTreeMap;

use soundscene_core::AudioClip;

pub const SAMPLE_RATE: u32 = 32_000;

pub fn tone(freq: f64, secs: f64, amp: f32) -> AudioClip {
    let n = (secs * SAMPLE_RATE as f64).round() as usize;
    let samples = (0..n)
        .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / SAMPLE_RATE as f64).sin() as f32)
        .collect();
    AudioClip::mono(samples, SAMPLE_RATE).expect("valid clip")
}

/// Pseudo-noise from a fixed hash recurrence, no RNG dependency needed.
pub fn noise(secs: f64, level: f32) -> AudioClip {
    let n = (secs * SAMPLE_RATE as f64).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let x = (i as f64 * 12.9898).sin() * 43758.5453;
            level * (x.fract() as f32)
        })
        .collect();
    AudioClip::mono(samples, SAMPLE_RATE).expect("valid clip")
}

/// A mixture with per-class tone stems, sized like a production clip.
pub fn stem_scenario(classes: &[&str], secs: f64) -> (AudioClip, BTreeMap<String, AudioClip>) {
    let mut stems = BTreeMap::new();
    let mut mix: Vec<f32> = noise(secs, 0.05).channels()[0].clone();
    for (i, class) in classes.iter().enumerate() {
        let stem = tone(220.0 * (i + 1) as f64, secs, 0.2);
        for (m, s) in mix.iter_mut().zip(stem.channels()[0].iter()) {
            *m += s;
        }
        stems.insert(class.to_string(), stem);
    }
    (AudioClip::mono(mix, SAMPLE_RATE).expect("valid clip"), stems)
}
