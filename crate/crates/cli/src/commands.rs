use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use soundscene_core::agent::{agent_correct, AgentConfig, RankBy};
use soundscene_core::backends::external::ExternalBackend;
use soundscene_core::backends::{OracleSeparator, OracleTagger, Separator, Tagger};
use soundscene_core::dataset::{
    self, audit_pool, generate_manifests, read_flag_file, read_manifests, synthesize_mixture,
    CorpusParams, MixtureManifest, SourceFlag, SourceRecord,
};
use soundscene_core::features::{
    chroma, mel_spectrogram, spectral_rolloff, stft_power, FeatureConfig, RolloffConfig,
};
use soundscene_core::metrics::{ca_sdri, summarize, ClipEval};
use soundscene_core::{read_wav, write_wav, AudioClip, ClassVocabulary, LabelSet, WavFormat};

use crate::report::{self, atomic_write, write_jsonl};
use crate::{AgentArgs, AuditArgs, EvaluateArgs, FeaturesArgs, MixArgs};

/// Optional config file; flags override whatever is set here.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct FileConfig {
    pub kappa: Option<f64>,
    pub n_mels: Option<usize>,
    pub threshold: Option<f64>,
    pub top_k: Option<usize>,
    pub rank_by: Option<String>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}

/// One prediction record: the label set a system emitted for a clip.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub clip_id: String,
    pub labels: Vec<String>,
}

fn read_predictions(path: &Path) -> anyhow::Result<Vec<Prediction>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: bad prediction record", path.display(), i + 1))?;
        out.push(p);
    }
    Ok(out)
}

fn parse_rank_by(s: &str) -> anyhow::Result<RankBy> {
    match s {
        "retag_score" => Ok(RankBy::RetagScore),
        "original_score" => Ok(RankBy::OriginalScore),
        other => bail!("unknown --rank-by '{other}' (expected retag_score | original_score)"),
    }
}

// ---------------------------------------------------------------- features

pub fn cmd_features(args: FeaturesArgs, file_cfg: &FileConfig) -> anyhow::Result<i32> {
    if args.inputs.is_empty() {
        bail!("no input files given");
    }
    let mut feature_cfg = FeatureConfig::default();
    if let Some(n) = args.n_mels.or(file_cfg.n_mels) {
        feature_cfg.n_mels = n;
    }
    let kappa = args.kappa.or(file_cfg.kappa).unwrap_or(feature_cfg.rolloff.kappa);
    feature_cfg.rolloff = RolloffConfig { kappa };
    std::fs::create_dir_all(&args.out_dir)?;
    echo_config(&args.out_dir, &feature_cfg)?;

    let mut failures = 0usize;
    for input in &args.inputs {
        if let Err(e) = dump_features(input, args.channel, &feature_cfg, &args.out_dir) {
            eprintln!("error: {}: {e:#}", input.display());
            failures += 1;
        }
    }
    Ok(if failures == 0 { 0 } else { crate::EXIT_DATA })
}

fn dump_features(
    input: &Path,
    channel: usize,
    cfg: &FeatureConfig,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let clip = read_wav(input)?;
    let stem_name = input
        .file_stem()
        .and_then(|s| s.to_str())
        .context("input file has no usable name")?;
    let spec = stft_power(&clip, channel, &cfg.stft)?;
    let fmax = cfg.fmax.unwrap_or_else(|| spec.nyquist());
    let outputs = [
        ("mel", mel_spectrogram(&spec, cfg.n_mels, cfg.fmin, fmax)?),
        ("rolloff", spectral_rolloff(&spec, &cfg.rolloff)?),
        ("chroma", chroma(&spec, &cfg.chroma)?),
    ];
    for (kind, matrix) in outputs {
        let path = out_dir.join(format!("{stem_name}.{kind}.json"));
        atomic_write(&path, serde_json::to_string(&matrix)?.as_bytes())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- evaluate

/// Corpus layout: `{corpus_dir}/{clip_id}/mixture.wav` and
/// `{corpus_dir}/{clip_id}/stems/{class}.wav`.
fn mixture_path(corpus_dir: &Path, clip_id: &str) -> PathBuf {
    corpus_dir.join(clip_id).join("mixture.wav")
}

fn truth_stem_path(corpus_dir: &Path, clip_id: &str, class: &str) -> PathBuf {
    corpus_dir.join(clip_id).join("stems").join(format!("{class}.wav"))
}

fn read_truth_stems(
    corpus_dir: &Path,
    manifest: &MixtureManifest,
) -> anyhow::Result<BTreeMap<String, AudioClip>> {
    manifest
        .truth_classes()
        .into_iter()
        .map(|class| {
            let path = truth_stem_path(corpus_dir, &manifest.clip_id, &class);
            Ok((class, read_wav(&path)?))
        })
        .collect()
}

pub fn cmd_evaluate(args: EvaluateArgs, _file_cfg: &FileConfig) -> anyhow::Result<i32> {
    let manifests = read_manifests(std::io::BufReader::new(
        std::fs::File::open(&args.manifest)
            .with_context(|| format!("opening {}", args.manifest.display()))?,
    ))?;
    let predictions = read_predictions(&args.predictions)?;
    let vocab = ClassVocabulary::default();

    let by_id: BTreeMap<&str, &MixtureManifest> =
        manifests.iter().map(|m| (m.clip_id.as_str(), m)).collect();
    let mismatches: Vec<&str> = predictions
        .iter()
        .filter(|p| !by_id.contains_key(p.clip_id.as_str()))
        .map(|p| p.clip_id.as_str())
        .collect();
    if !mismatches.is_empty() {
        bail!("prediction clip ids missing from the manifest: {}", mismatches.join(", "));
    }

    let mut clips = Vec::with_capacity(predictions.len());
    for p in &predictions {
        let manifest = by_id[p.clip_id.as_str()];
        let truth = LabelSet::new(manifest.truth_classes(), &vocab)?;
        let pred = LabelSet::new(p.labels.iter().cloned(), &vocab)?;
        let mut eval = ClipEval::from_labels(&p.clip_id, &pred, &truth);

        if let (Some(corpus_dir), Some(est_dir)) = (&args.corpus_dir, &args.est_stems) {
            let mixture = read_wav(&mixture_path(corpus_dir, &p.clip_id))?;
            let truth_stems = read_truth_stems(corpus_dir, manifest)?;
            let mut est_stems = BTreeMap::new();
            for class in &p.labels {
                let path = est_dir.join(&p.clip_id).join(format!("{class}.wav"));
                if path.exists() {
                    est_stems.insert(class.clone(), read_wav(&path)?);
                } else {
                    // FP with no stem contributes 0 per the union convention
                    eprintln!(
                        "warning: {}: no stem for predicted class '{class}', counted as FP",
                        p.clip_id
                    );
                    est_stems
                        .insert(class.clone(), AudioClip::silence(mixture.len(), mixture.sample_rate()));
                }
            }
            let (mean, per_class) = ca_sdri(&truth_stems, &est_stems, &mixture, 0)?;
            eval.ca_sdri = Some(mean);
            eval.per_class_sdri = per_class;
        }
        clips.push(eval);
    }

    let summary = summarize(&clips);
    if let Some(out) = &args.out {
        write_jsonl(out, &clips)?;
        let summary_path = out.with_extension("summary.json");
        atomic_write(&summary_path, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    }
    report::print_eval_table(&clips, &summary);
    Ok(0)
}

// ------------------------------------------------------------------- agent

pub fn cmd_agent(args: AgentArgs, file_cfg: &FileConfig) -> anyhow::Result<i32> {
    let manifests = read_manifests(std::io::BufReader::new(
        std::fs::File::open(&args.manifest)
            .with_context(|| format!("opening {}", args.manifest.display()))?,
    ))?;
    let vocab = ClassVocabulary::default();
    let mut cfg = AgentConfig::default();
    if let Some(t) = args.threshold.or(file_cfg.threshold) {
        cfg.threshold = t;
    }
    if let Some(k) = args.top_k.or(file_cfg.top_k) {
        cfg.top_k = k;
    }
    if let Some(r) = args.rank_by.as_deref().or(file_cfg.rank_by.as_deref()) {
        cfg.rank_by = parse_rank_by(r)?;
    }
    std::fs::create_dir_all(&args.out_dir)?;
    echo_config(&args.out_dir, &cfg)?;
    let scratch = args.out_dir.join("scratch");

    // backends: external processes when commands are given, manifest-backed
    // oracles otherwise
    let external_tag = args
        .backend_tag
        .as_ref()
        .map(|cmd| ExternalBackend::spawn(cmd, vocab.clone(), &scratch))
        .transpose()?;
    let external_sep = args
        .backend_sep
        .as_ref()
        .map(|cmd| ExternalBackend::spawn(cmd, vocab.clone(), &scratch))
        .transpose()?;

    let oracle_tagger: Option<OracleTagger> = if external_tag.is_none() {
        Some(OracleTagger::new(&manifests, vocab.clone()))
    } else {
        None
    };
    let oracle_separator: Option<OracleSeparator> = if external_sep.is_none() {
        let mut stems = BTreeMap::new();
        for m in &manifests {
            for (class, clip) in read_truth_stems(&args.corpus_dir, m)? {
                stems.insert((m.clip_id.clone(), class), clip);
            }
        }
        Some(OracleSeparator::new(stems))
    } else {
        None
    };
    let tagger: &dyn Tagger = external_tag
        .as_ref()
        .map(|b| b as &dyn Tagger)
        .or(oracle_tagger.as_ref().map(|b| b as &dyn Tagger))
        .expect("one tagger configured");
    let separator: &dyn Separator = external_sep
        .as_ref()
        .map(|b| b as &dyn Separator)
        .or(oracle_separator.as_ref().map(|b| b as &dyn Separator))
        .expect("one separator configured");

    let mut predictions = Vec::new();
    let mut traces = Vec::new();
    let mut failures = 0usize;
    for m in &manifests {
        let mixture = read_wav(&mixture_path(&args.corpus_dir, &m.clip_id))?;
        match agent_correct(&m.clip_id, &mixture, tagger, separator, &cfg, &vocab) {
            Ok(trace) => {
                let stems_dir = args.out_dir.join("stems").join(&m.clip_id);
                std::fs::create_dir_all(&stems_dir)?;
                for (class, stem) in &trace.final_stems {
                    write_wav(stem, &stems_dir.join(format!("{class}.wav")), WavFormat::Float32)?;
                }
                predictions.push(Prediction {
                    clip_id: m.clip_id.clone(),
                    labels: trace.final_labels.clone(),
                });
                traces.push(trace);
            }
            Err(e) => {
                eprintln!("error: clip {}: {e}", m.clip_id);
                failures += 1;
            }
        }
    }

    write_jsonl(&args.out_dir.join("predictions.jsonl"), &predictions)?;
    if let Some(trace_dir) = &args.trace_dir {
        std::fs::create_dir_all(trace_dir)?;
        write_jsonl(&trace_dir.join("traces.jsonl"), &traces)?;
    }

    if args.evaluate {
        let mut clips = Vec::new();
        for p in &predictions {
            let m = manifests.iter().find(|m| m.clip_id == p.clip_id).expect("own id");
            let truth = LabelSet::new(m.truth_classes(), &vocab)?;
            let pred = LabelSet::new(p.labels.iter().cloned(), &vocab)?;
            clips.push(ClipEval::from_labels(&p.clip_id, &pred, &truth));
        }
        let summary = summarize(&clips);
        report::print_eval_table(&clips, &summary);
    } else {
        println!("agent: {} clips corrected, {} failed", predictions.len(), failures);
    }
    Ok(if failures == 0 { 0 } else { crate::EXIT_BACKEND })
}

// ----------------------------------------------------------------- dataset

fn read_sources(path: &Path) -> anyhow::Result<Vec<SourceRecord>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: SourceRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: bad source record", path.display(), i + 1))?;
        out.push(r);
    }
    Ok(out)
}

pub fn cmd_audit(args: AuditArgs) -> anyhow::Result<i32> {
    let mut sources = read_sources(&args.sources)?;
    if let Some(path) = &args.heterogeneous {
        let flagged = read_flag_file(path)?;
        for s in &mut sources {
            if flagged.contains(&s.id) {
                s.flags.insert(SourceFlag::Heterogeneous);
            }
        }
    }
    if let Some(path) = &args.added {
        let flagged = read_flag_file(path)?;
        for s in &mut sources {
            if flagged.contains(&s.id) {
                s.flags.insert(SourceFlag::AddedExternal);
            }
        }
    }
    let vocab = ClassVocabulary::default();
    let audits = audit_pool(&sources, &vocab, args.min_duration)?;
    if let Some(out) = &args.out {
        write_jsonl(out, &audits)?;
    }
    report::print_audit_table(&audits);
    Ok(0)
}

pub fn cmd_mix(args: MixArgs, file_cfg: &FileConfig, jobs: usize) -> anyhow::Result<i32> {
    let sources = read_sources(&args.sources)?;
    let params = CorpusParams {
        clip_duration: args.duration,
        sample_rate: 32_000,
        min_events: args.events_min,
        max_events: args.events_max,
        snr_range_db: (args.snr_min, args.snr_max),
    };
    params.validate().map_err(|e| anyhow::anyhow!("{e} (valid event range is 1-3)"))?;
    let seed = args.seed.or(file_cfg.seed).unwrap_or(0);

    let mut pool: BTreeMap<String, Vec<SourceRecord>> = BTreeMap::new();
    for s in &sources {
        pool.entry(s.class.clone()).or_default().push(s.clone());
    }
    let noise_clip = read_wav(&args.noise)?;
    let noise_id = "noise";
    let manifests = generate_manifests(&pool, noise_id, args.n_clips, seed, &params)?;

    let source_paths: BTreeMap<&str, &str> =
        sources.iter().map(|s| (s.id.as_str(), s.path.as_str())).collect();
    let sources_dir = args.sources.parent().unwrap_or(Path::new(".")).to_path_buf();
    std::fs::create_dir_all(&args.out_dir)?;
    echo_config(&args.out_dir, &params)?;

    let pool_obj = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let corpus_dir = args.out_dir.join("corpus");
    let results: Vec<anyhow::Result<MixtureManifest>> = pool_obj.install(|| {
        manifests
            .par_iter()
            .map(|m| {
                let resolve = |id: &str| -> soundscene_core::Result<AudioClip> {
                    if id == noise_id {
                        return Ok(noise_clip.clone());
                    }
                    let rel = source_paths.get(id).ok_or_else(|| {
                        soundscene_core::Error::UnknownClipId(id.to_string())
                    })?;
                    read_wav(&sources_dir.join(rel))
                };
                let synth = synthesize_mixture(m, resolve)?;
                let clip_dir = corpus_dir.join(&m.clip_id);
                let stems_dir = clip_dir.join("stems");
                std::fs::create_dir_all(&stems_dir)?;
                write_wav(&synth.mixture, &clip_dir.join("mixture.wav"), WavFormat::Float32)?;
                for (class, stem) in &synth.stems {
                    write_wav(stem, &stems_dir.join(format!("{class}.wav")), WavFormat::Float32)?;
                }
                Ok(synth.manifest)
            })
            .collect()
    });
    let final_manifests: Vec<MixtureManifest> =
        results.into_iter().collect::<anyhow::Result<_>>()?;

    let mut buf = Vec::new();
    dataset::write_manifests(&mut buf, &final_manifests)?;
    atomic_write(&args.out_dir.join("manifest.jsonl"), &buf)?;
    println!("wrote {} clips under {}", final_manifests.len(), args.out_dir.display());
    Ok(0)
}

fn echo_config<T: Serialize>(out_dir: &Path, cfg: &T) -> anyhow::Result<()> {
    atomic_write(
        &out_dir.join("effective_config.json"),
        serde_json::to_string_pretty(cfg)?.as_bytes(),
    )
}
