//! Source-pool auditing, mixture manifests, and the desk-scale mixture
//! synthesizer (monophonic-additive, no spatialization).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{rms_slice, AudioClip};
use crate::error::{Error, Result};
use crate::vocab::ClassVocabulary;

pub const MANIFEST_FORMAT: &str = "soundscene-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Minimum event duration used by the refinement filter, in seconds.
pub const DEFAULT_MIN_DURATION: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFlag {
    /// Marked by a human audit as not matching its class acoustically.
    Heterogeneous,
    /// Supplemental sample pulled from an external pool.
    AddedExternal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    pub class: String,
    pub path: String,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<SourceFlag>,
}

impl SourceRecord {
    pub fn validate(&self, vocab: &ClassVocabulary) -> Result<()> {
        if self.duration <= 0.0 {
            return Err(Error::InvalidData(format!("source '{}' has nonpositive duration", self.id)));
        }
        vocab.require(&self.class)?;
        Ok(())
    }

    pub fn has_flag(&self, flag: SourceFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Per-class refinement tally. The identity
/// `final = original − short_removed − heterogeneous_removed + added` holds
/// by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassAudit {
    pub class: String,
    pub original: usize,
    pub short_removed: usize,
    pub heterogeneous_removed: usize,
    pub added: usize,
    pub final_count: usize,
}

/// Partition records into (kept, removed) by duration. The boundary is kept:
/// only durations strictly shorter than `min_duration` are removed.
pub fn filter_short(
    records: Vec<SourceRecord>,
    min_duration: f64,
) -> (Vec<SourceRecord>, Vec<SourceRecord>) {
    records.into_iter().partition(|r| r.duration >= min_duration)
}

/// Audit one class's records. Added records are counted separately and do
/// not appear in `original`. A record that is both short and heterogeneous
/// counts once, as short (duration filtering runs first).
pub fn audit_class(records: &[SourceRecord], min_duration: f64) -> Result<ClassAudit> {
    let class = match records.first() {
        Some(r) => r.class.clone(),
        None => {
            return Ok(ClassAudit {
                class: String::new(),
                original: 0,
                short_removed: 0,
                heterogeneous_removed: 0,
                added: 0,
                final_count: 0,
            })
        }
    };
    if let Some(other) = records.iter().find(|r| r.class != class) {
        return Err(Error::InvalidData(format!(
            "audit input mixes classes '{class}' and '{}'",
            other.class
        )));
    }
    let added = records.iter().filter(|r| r.has_flag(SourceFlag::AddedExternal)).count();
    let originals = records.iter().filter(|r| !r.has_flag(SourceFlag::AddedExternal));
    let mut original = 0;
    let mut short_removed = 0;
    let mut heterogeneous_removed = 0;
    for r in originals {
        original += 1;
        if r.duration < min_duration {
            short_removed += 1;
        } else if r.has_flag(SourceFlag::Heterogeneous) {
            heterogeneous_removed += 1;
        }
    }
    Ok(ClassAudit {
        class,
        original,
        short_removed,
        heterogeneous_removed,
        added,
        final_count: original - short_removed - heterogeneous_removed + added,
    })
}

/// Audit a whole pool, one row per vocabulary class, in vocabulary order.
pub fn audit_pool(
    records: &[SourceRecord],
    vocab: &ClassVocabulary,
    min_duration: f64,
) -> Result<Vec<ClassAudit>> {
    for r in records {
        r.validate(vocab)?;
    }
    vocab
        .labels()
        .iter()
        .map(|class| {
            let class_records: Vec<SourceRecord> =
                records.iter().filter(|r| &r.class == class).cloned().collect();
            let mut audit = audit_class(&class_records, min_duration)?;
            audit.class = class.clone();
            Ok(audit)
        })
        .collect()
}

/// One placed event within a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub source_id: String,
    pub class: String,
    pub onset: f64,
    pub snr_db: f64,
}

/// Ground-truth record for one synthesized mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureManifest {
    pub clip_id: String,
    pub duration: f64,
    pub sample_rate: u32,
    pub events: Vec<EventSpec>,
    pub noise: String,
    pub seed: u64,
    /// Shared gain applied to mixture and stems when the raw peak exceeded 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization_gain: Option<f64>,
}

impl MixtureManifest {
    pub fn validate(&self) -> Result<()> {
        if self.events.is_empty() || self.events.len() > 3 {
            return Err(Error::InvalidData(format!(
                "clip '{}': event count must be 1..=3, got {}",
                self.clip_id,
                self.events.len()
            )));
        }
        if self.duration <= 0.0 || self.sample_rate == 0 {
            return Err(Error::InvalidData(format!("clip '{}': bad duration or rate", self.clip_id)));
        }
        Ok(())
    }

    pub fn truth_classes(&self) -> BTreeSet<String> {
        self.events.iter().map(|e| e.class.clone()).collect()
    }
}

/// Gain g such that 20·log10(g·rms(event)/rms(background)) = target_snr.
pub fn snr_gain(event_rms: f64, background_rms: f64, target_snr_db: f64) -> Result<f64> {
    if event_rms <= 0.0 || background_rms <= 0.0 {
        return Err(Error::InvalidData("snr_gain requires nonzero event and background RMS".into()));
    }
    Ok(10.0_f64.powf(target_snr_db / 20.0) * background_rms / event_rms)
}

/// Result of synthesizing one mixture.
#[derive(Debug, Clone)]
pub struct SynthesizedClip {
    pub manifest: MixtureManifest,
    pub mixture: AudioClip,
    /// Full-length, gain-scaled, zero-padded event signals keyed by class.
    pub stems: BTreeMap<String, AudioClip>,
    pub noise: AudioClip,
}

/// Mix the manifest's events over its noise bed. SNR is defined as the
/// event's active-span RMS against the full-clip RMS of the noise bed.
/// If the raw mixture peak exceeds 1, one shared gain is applied to the
/// mixture, stems, and noise, and recorded in the manifest.
pub fn synthesize_mixture<F>(spec: &MixtureManifest, mut resolve: F) -> Result<SynthesizedClip>
where
    F: FnMut(&str) -> Result<AudioClip>,
{
    spec.validate()?;
    let clip_len = (spec.duration * spec.sample_rate as f64).round() as usize;

    let noise_src = resolve(&spec.noise)?;
    if noise_src.sample_rate() != spec.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: spec.sample_rate,
            actual: noise_src.sample_rate(),
        });
    }
    // tile or truncate the noise bed to clip length
    let noise_samples: Vec<f32> = {
        let src = noise_src.channel(0)?;
        if src.is_empty() {
            return Err(Error::InvalidData(format!("noise source '{}' is empty", spec.noise)));
        }
        (0..clip_len).map(|i| src[i % src.len()]).collect()
    };
    let noise_rms = rms_slice(&noise_samples);

    let mut stems: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    for event in &spec.events {
        let source = resolve(&event.source_id)?;
        if source.sample_rate() != spec.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: spec.sample_rate,
                actual: source.sample_rate(),
            });
        }
        let samples = source.channel(0)?;
        let onset = (event.onset * spec.sample_rate as f64).round() as usize;
        if onset + samples.len() > clip_len {
            return Err(Error::InvalidData(format!(
                "clip '{}': event '{}' overruns the clip (onset {} + {} samples > {})",
                spec.clip_id,
                event.source_id,
                onset,
                samples.len(),
                clip_len
            )));
        }
        let gain = snr_gain(rms_slice(samples), noise_rms, event.snr_db)? as f32;
        let stem = stems.entry(event.class.clone()).or_insert_with(|| vec![0.0; clip_len]);
        for (i, &s) in samples.iter().enumerate() {
            stem[onset + i] += s * gain;
        }
    }

    // mixture = noise + Σ stems, accumulated in class order so the identity
    // is sample-exact for downstream checks
    let mut mixture = noise_samples.clone();
    for stem in stems.values() {
        for (m, s) in mixture.iter_mut().zip(stem) {
            *m += s;
        }
    }

    let peak = mixture.iter().fold(0.0f32, |m, &s| m.max(s.abs()));
    let mut manifest = spec.clone();
    let mut noise_out = noise_samples;
    if peak > 1.0 {
        let g = 1.0 / peak;
        manifest.normalization_gain = Some(g as f64);
        mixture.iter_mut().for_each(|s| *s *= g);
        noise_out.iter_mut().for_each(|s| *s *= g);
        for stem in stems.values_mut() {
            stem.iter_mut().for_each(|s| *s *= g);
        }
    }

    Ok(SynthesizedClip {
        manifest,
        mixture: AudioClip::mono(mixture, spec.sample_rate)?,
        stems: stems
            .into_iter()
            .map(|(c, s)| Ok((c, AudioClip::mono(s, spec.sample_rate)?)))
            .collect::<Result<_>>()?,
        noise: AudioClip::mono(noise_out, spec.sample_rate)?,
    })
}

/// Corpus generation parameters; defaults mirror the synthesizer convention
/// (10 s clips at 32 kHz, 1–3 events, SNR 5–20 dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub clip_duration: f64,
    pub sample_rate: u32,
    pub min_events: usize,
    pub max_events: usize,
    pub snr_range_db: (f64, f64),
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            clip_duration: 10.0,
            sample_rate: 32_000,
            min_events: 1,
            max_events: 3,
            snr_range_db: (5.0, 20.0),
        }
    }
}

impl CorpusParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_events < 1 || self.max_events > 3 || self.min_events > self.max_events {
            return Err(Error::InvalidConfig(format!(
                "events per clip must lie within 1..=3, got {}..={}",
                self.min_events, self.max_events
            )));
        }
        if self.snr_range_db.0 > self.snr_range_db.1 {
            return Err(Error::InvalidConfig("snr range inverted".into()));
        }
        Ok(())
    }
}

/// Draw `n_clips` manifests from a source pool. Deterministic given the
/// seed: each clip uses its own RNG stream derived from (seed, clip index),
/// so parallel and serial runs agree. Classes are sampled without
/// replacement within a clip.
pub fn generate_manifests(
    pool: &BTreeMap<String, Vec<SourceRecord>>,
    noise_id: &str,
    n_clips: usize,
    seed: u64,
    params: &CorpusParams,
) -> Result<Vec<MixtureManifest>> {
    params.validate()?;
    let classes: Vec<&String> = pool.keys().collect();
    if classes.is_empty() {
        return Err(Error::InsufficientPool("empty class pool".into()));
    }
    for (class, records) in pool {
        if records.is_empty() {
            return Err(Error::InsufficientPool(format!("class '{class}' has no sources")));
        }
    }

    (0..n_clips)
        .map(|idx| {
            let mut rng = clip_rng(seed, idx as u64);
            let max = params.max_events.min(classes.len());
            let min = params.min_events.min(max);
            let n_events = rng.gen_range(min..=max);

            // sample classes without replacement
            let mut remaining: Vec<usize> = (0..classes.len()).collect();
            let mut events = Vec::with_capacity(n_events);
            for _ in 0..n_events {
                let pick = rng.gen_range(0..remaining.len());
                let class = classes[remaining.swap_remove(pick)];
                let records = &pool[class];
                let record = &records[rng.gen_range(0..records.len())];
                if record.duration > params.clip_duration {
                    return Err(Error::InsufficientPool(format!(
                        "source '{}' ({}s) exceeds clip duration {}s",
                        record.id, record.duration, params.clip_duration
                    )));
                }
                let max_onset = params.clip_duration - record.duration;
                let onset = if max_onset > 0.0 { rng.gen_range(0.0..=max_onset) } else { 0.0 };
                let snr_db = rng.gen_range(params.snr_range_db.0..=params.snr_range_db.1);
                events.push(EventSpec {
                    source_id: record.id.clone(),
                    class: class.clone(),
                    onset,
                    snr_db,
                });
            }
            let manifest = MixtureManifest {
                clip_id: format!("clip_{idx:05}"),
                duration: params.clip_duration,
                sample_rate: params.sample_rate,
                events,
                noise: noise_id.to_string(),
                seed,
                normalization_gain: None,
            };
            manifest.validate()?;
            Ok(manifest)
        })
        .collect()
}

fn clip_rng(seed: u64, clip_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&clip_index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[derive(Serialize, Deserialize)]
struct ManifestHeader {
    format: String,
    version: u32,
}

/// Write manifests as line-delimited JSON with a versioned header line.
pub fn write_manifests<W: Write>(out: &mut W, manifests: &[MixtureManifest]) -> Result<()> {
    let header =
        ManifestHeader { format: MANIFEST_FORMAT.to_string(), version: MANIFEST_VERSION };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for m in manifests {
        writeln!(out, "{}", serde_json::to_string(m).map_err(|e| Error::InvalidData(e.to_string()))?)?;
    }
    Ok(())
}

pub fn read_manifests<R: BufRead>(input: R) -> Result<Vec<MixtureManifest>> {
    let mut lines = input.lines().enumerate();
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::ManifestParse { line: 1, detail: "empty file".into() })?;
    let header: ManifestHeader = serde_json::from_str(&header_line?)
        .map_err(|e| Error::ManifestParse { line: 1, detail: format!("bad header: {e}") })?;
    if header.format != MANIFEST_FORMAT || header.version != MANIFEST_VERSION {
        return Err(Error::ManifestParse {
            line: 1,
            detail: format!(
                "unsupported manifest {} v{} (expected {} v{})",
                header.format, header.version, MANIFEST_FORMAT, MANIFEST_VERSION
            ),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let m: MixtureManifest = serde_json::from_str(&line)
            .map_err(|e| Error::ManifestParse { line: i + 1, detail: e.to_string() })?;
        out.push(m);
    }
    Ok(out)
}

/// Read a flag file: one source id per line, '#' comments allowed.
pub fn read_flag_file(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::UnreadableFile { path: path.into(), source: e })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, class: &str, duration: f64, flags: &[SourceFlag]) -> SourceRecord {
        SourceRecord {
            id: id.into(),
            class: class.into(),
            path: format!("{id}.wav"),
            duration,
            flags: flags.iter().copied().collect(),
        }
    }

    #[test]
    fn filter_short_boundary_is_kept() {
        let records = vec![
            rec("a", "Cough", 1.5, &[]),
            rec("b", "Cough", 1.499, &[]),
            rec("c", "Cough", 2.0, &[]),
        ];
        let (kept, removed) = filter_short(records, 1.5);
        assert_eq!(kept.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(removed[0].id, "b");
    }

    #[test]
    fn audit_alarm_clock_row() {
        // 102 original, 2 short, 37 heterogeneous, 0 added -> 63
        let mut records = Vec::new();
        for i in 0..2 {
            records.push(rec(&format!("s{i}"), "AlarmClock", 1.0, &[]));
        }
        for i in 0..37 {
            records.push(rec(&format!("h{i}"), "AlarmClock", 2.0, &[SourceFlag::Heterogeneous]));
        }
        for i in 0..63 {
            records.push(rec(&format!("k{i}"), "AlarmClock", 2.0, &[]));
        }
        let audit = audit_class(&records, 1.5).unwrap();
        assert_eq!(audit.original, 102);
        assert_eq!(audit.short_removed, 2);
        assert_eq!(audit.heterogeneous_removed, 37);
        assert_eq!(audit.final_count, 63);
    }

    #[test]
    fn audit_doorbell_row_with_additions() {
        // 75 original, 4 short, 24 heterogeneous, 51 added -> 98
        let mut records = Vec::new();
        for i in 0..4 {
            records.push(rec(&format!("s{i}"), "Doorbell", 0.5, &[]));
        }
        for i in 0..24 {
            records.push(rec(&format!("h{i}"), "Doorbell", 2.0, &[SourceFlag::Heterogeneous]));
        }
        for i in 0..47 {
            records.push(rec(&format!("k{i}"), "Doorbell", 2.0, &[]));
        }
        for i in 0..51 {
            records.push(rec(&format!("a{i}"), "Doorbell", 2.0, &[SourceFlag::AddedExternal]));
        }
        let audit = audit_class(&records, 1.5).unwrap();
        assert_eq!(
            (audit.original, audit.short_removed, audit.heterogeneous_removed, audit.added, audit.final_count),
            (75, 4, 24, 51, 98)
        );
    }

    #[test]
    fn doubly_flagged_record_counts_as_short() {
        let records = vec![rec("x", "Cough", 1.0, &[SourceFlag::Heterogeneous])];
        let audit = audit_class(&records, 1.5).unwrap();
        assert_eq!(audit.short_removed, 1);
        assert_eq!(audit.heterogeneous_removed, 0);
    }

    #[test]
    fn audit_empty_and_mixed() {
        let audit = audit_class(&[], 1.5).unwrap();
        assert_eq!(audit.final_count, 0);
        let mixed = vec![rec("a", "Cough", 2.0, &[]), rec("b", "Typing", 2.0, &[])];
        assert!(audit_class(&mixed, 1.5).is_err());
    }

    #[test]
    fn snr_gain_closed_forms() {
        assert!((snr_gain(0.3, 0.3, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((snr_gain(0.3, 0.3, 20.0).unwrap() - 10.0).abs() < 1e-12);
        assert!((snr_gain(0.1, 0.2, 6.0206).unwrap() - 4.0).abs() < 1e-4);
        assert!(snr_gain(0.0, 0.2, 0.0).is_err());
        assert!(snr_gain(0.1, 0.0, 0.0).is_err());
    }

    fn tone(freq: f64, sr: u32, frames: usize, amp: f32) -> AudioClip {
        let s = (0..frames)
            .map(|n| amp * (2.0 * std::f64::consts::PI * freq * n as f64 / sr as f64).sin() as f32)
            .collect();
        AudioClip::mono(s, sr).unwrap()
    }

    fn fixture_resolver(id: &str) -> Result<AudioClip> {
        let sr = 32_000;
        match id {
            "noise" => {
                // low-level deterministic pseudo-noise bed
                let s = (0..sr as usize)
                    .map(|n| 0.01 * ((n as f32 * 12.9898).sin() * 43758.547).fract())
                    .collect();
                AudioClip::mono(s, sr)
            }
            "tone_a" => Ok(tone(440.0, sr, 32_000, 0.4)),
            "tone_b" => Ok(tone(950.0, sr, 32_000, 0.3)),
            other => Err(Error::UnknownClipId(other.into())),
        }
    }

    fn fixture_manifest() -> MixtureManifest {
        MixtureManifest {
            clip_id: "t0".into(),
            duration: 4.0,
            sample_rate: 32_000,
            events: vec![
                EventSpec { source_id: "tone_a".into(), class: "AlarmClock".into(), onset: 0.25, snr_db: 12.0 },
                EventSpec { source_id: "tone_b".into(), class: "Buzzer".into(), onset: 2.0, snr_db: 8.0 },
            ],
            noise: "noise".into(),
            seed: 0,
            normalization_gain: None,
        }
    }

    #[test]
    fn mixture_is_noise_plus_stems_sample_exact() {
        let synth = synthesize_mixture(&fixture_manifest(), fixture_resolver).unwrap();
        assert!(synth.manifest.normalization_gain.is_none());
        let mix = synth.mixture.channel(0).unwrap();
        let noise = synth.noise.channel(0).unwrap();
        for i in 0..mix.len() {
            let mut acc = noise[i];
            for stem in synth.stems.values() {
                acc += stem.channel(0).unwrap()[i];
            }
            assert_eq!(mix[i], acc, "sample {i}");
        }
    }

    #[test]
    fn achieved_snr_within_tenth_db() {
        let spec = fixture_manifest();
        let synth = synthesize_mixture(&spec, fixture_resolver).unwrap();
        let noise_rms = rms_slice(synth.noise.channel(0).unwrap());
        for event in &spec.events {
            let stem = synth.stems[&event.class].channel(0).unwrap();
            let onset = (event.onset * spec.sample_rate as f64).round() as usize;
            let active = &stem[onset..onset + 32_000];
            let achieved = 20.0 * (rms_slice(active) / noise_rms).log10();
            assert!(
                (achieved - event.snr_db).abs() < 0.1,
                "class {}: achieved {achieved} vs target {}",
                event.class,
                event.snr_db
            );
        }
    }

    #[test]
    fn event_overrun_rejected() {
        let mut spec = fixture_manifest();
        spec.events[0].onset = 3.5; // 1 s tone into a 4 s clip
        assert!(synthesize_mixture(&spec, fixture_resolver).is_err());
    }

    #[test]
    fn peak_normalization_shared_and_recorded() {
        let mut spec = fixture_manifest();
        spec.events[0].snr_db = 60.0; // force clipping (allowed on a hand-built manifest)
        let synth = synthesize_mixture(&spec, fixture_resolver).unwrap();
        let g = synth.manifest.normalization_gain.expect("normalization applied");
        assert!(g < 1.0);
        let peak = synth.mixture.channel(0).unwrap().iter().fold(0.0f32, |m, &s| m.max(s.abs()));
        assert!(peak <= 1.0 + 1e-6);
        // additivity still holds after the shared gain
        let mix = synth.mixture.channel(0).unwrap();
        let noise = synth.noise.channel(0).unwrap();
        for i in (0..mix.len()).step_by(997) {
            let stems_sum: f32 = synth.stems.values().map(|s| s.channel(0).unwrap()[i]).sum();
            assert!((mix[i] - (noise[i] + stems_sum)).abs() < 1e-6);
        }
    }

    fn small_pool() -> BTreeMap<String, Vec<SourceRecord>> {
        let mut pool = BTreeMap::new();
        for class in ["AlarmClock", "Buzzer", "Cough", "Typing"] {
            pool.insert(
                class.to_string(),
                vec![rec(&format!("{class}_0"), class, 1.0, &[]), rec(&format!("{class}_1"), class, 2.0, &[])],
            );
        }
        pool
    }

    #[test]
    fn manifests_deterministic_given_seed() {
        let pool = small_pool();
        let params = CorpusParams::default();
        let a = generate_manifests(&pool, "noise", 20, 7, &params).unwrap();
        let b = generate_manifests(&pool, "noise", 20, 7, &params).unwrap();
        assert_eq!(a, b);
        let c = generate_manifests(&pool, "noise", 20, 8, &params).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn event_count_histogram_covers_all_bins() {
        let pool = small_pool();
        let manifests =
            generate_manifests(&pool, "noise", 100, 1, &CorpusParams::default()).unwrap();
        let mut hist = [0usize; 4];
        for m in &manifests {
            m.validate().unwrap();
            hist[m.events.len()] += 1;
            // classes sampled without replacement within a clip
            let unique: BTreeSet<&str> = m.events.iter().map(|e| e.class.as_str()).collect();
            assert_eq!(unique.len(), m.events.len());
            for e in &m.events {
                assert!(e.snr_db >= 5.0 && e.snr_db <= 20.0);
            }
        }
        assert!(hist[1] > 0 && hist[2] > 0 && hist[3] > 0, "histogram {hist:?}");
    }

    #[test]
    fn events_out_of_range_rejected() {
        let params = CorpusParams { max_events: 4, ..Default::default() };
        assert!(generate_manifests(&small_pool(), "noise", 1, 0, &params).is_err());
    }

    #[test]
    fn manifest_round_trip_byte_identical() {
        let manifests =
            generate_manifests(&small_pool(), "noise", 10, 3, &CorpusParams::default()).unwrap();
        let mut buf = Vec::new();
        write_manifests(&mut buf, &manifests).unwrap();
        let back = read_manifests(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, manifests);
        let mut buf2 = Vec::new();
        write_manifests(&mut buf2, &back).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn manifest_parse_error_carries_line_number() {
        let text = format!(
            "{}\nnot json\n",
            serde_json::json!({"format": MANIFEST_FORMAT, "version": MANIFEST_VERSION})
        );
        match read_manifests(std::io::Cursor::new(text.as_bytes())) {
            Err(Error::ManifestParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
