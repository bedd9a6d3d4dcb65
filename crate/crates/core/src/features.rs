//! Feature stack: STFT power spectrogram, mel-spectrogram, framewise spectral
//! roll-off, chroma, and the summary vector that feeds the template tagger.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub window_size: usize,
    pub hop_size: usize,
    pub window: WindowKind,
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size == 0 || !self.fft_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "fft_size must be a power of two, got {}",
                self.fft_size
            )));
        }
        if self.window_size == 0 || self.window_size > self.fft_size {
            return Err(Error::InvalidConfig("window_size must be in 1..=fft_size".into()));
        }
        if self.hop_size == 0 || self.hop_size > self.window_size {
            return Err(Error::InvalidConfig("hop_size must be in 1..=window_size".into()));
        }
        Ok(())
    }
}

impl Default for StftConfig {
    /// 1024-point FFT, 1024 window, 320 hop (10 ms at 32 kHz), Hann.
    fn default() -> Self {
        Self { fft_size: 1024, window_size: 1024, hop_size: 320, window: WindowKind::Hann }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    PowerSpectrogram,
    Mel,
    Rolloff,
    Chroma,
}

/// Time-major frames × bins matrix tagged with the feature kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    /// Frames per second.
    pub frame_rate: f64,
    /// Per-bin semantic labels: Hz centers for spectrograms/roll-off, band
    /// index for mel, pitch-class index for chroma.
    pub bin_labels: Vec<f64>,
    /// values[frame][bin]
    pub values: Vec<Vec<f64>>,
    /// Sample rate of the source clip, for Nyquist bookkeeping.
    pub sample_rate: u32,
}

impl FeatureMatrix {
    pub fn n_frames(&self) -> usize {
        self.values.len()
    }

    pub fn n_bins(&self) -> usize {
        self.values.first().map_or(self.bin_labels.len(), |f| f.len())
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloffConfig {
    /// Cumulative energy fraction in (0, 1].
    pub kappa: f64,
}

impl Default for RolloffConfig {
    fn default() -> Self {
        Self { kappa: 0.85 }
    }
}

impl RolloffConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::InvalidConfig(format!("kappa must be in (0, 1], got {}", self.kappa)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChromaNorm {
    L2PerFrame,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChromaConfig {
    pub reference_a4: f64,
    pub min_freq: f64,
    pub normalization: ChromaNorm,
}

impl Default for ChromaConfig {
    fn default() -> Self {
        Self { reference_a4: 440.0, min_freq: 32.7, normalization: ChromaNorm::L2PerFrame }
    }
}

impl ChromaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_freq <= 0.0 || self.reference_a4 <= 0.0 {
            return Err(Error::InvalidConfig("chroma frequencies must be positive".into()));
        }
        Ok(())
    }
}

fn window_coeffs(kind: WindowKind, size: usize) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => vec![1.0; size],
        WindowKind::Hann => (0..size)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / size as f64).cos())
            .collect(),
    }
}

/// Power spectrogram of one channel. Frame t covers samples
/// [t·hop, t·hop + window); input shorter than one window is zero-padded
/// into a single frame. Bins are 0..=fft_size/2 with Hz-center labels.
pub fn stft_power(clip: &AudioClip, channel: usize, cfg: &StftConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let samples = clip.channel(channel)?;
    let window = window_coeffs(cfg.window, cfg.window_size);
    let n_bins = cfg.fft_size / 2 + 1;
    let sr = clip.sample_rate();

    let n_frames = if samples.len() < cfg.window_size {
        1
    } else {
        (samples.len() - cfg.window_size) / cfg.hop_size + 1
    };

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let mut values = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];

    for t in 0..n_frames {
        let start = t * cfg.hop_size;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for i in 0..cfg.window_size {
            let s = samples.get(start + i).copied().unwrap_or(0.0) as f64;
            buf[i] = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buf);
        values.push(buf[..n_bins].iter().map(|c| c.norm_sqr()).collect());
    }

    let bin_labels =
        (0..n_bins).map(|k| k as f64 * sr as f64 / cfg.fft_size as f64).collect();
    Ok(FeatureMatrix {
        kind: FeatureKind::PowerSpectrogram,
        frame_rate: sr as f64 / cfg.hop_size as f64,
        bin_labels,
        values,
        sample_rate: sr,
    })
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10.0_f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank: `n_mels` rows over `n_bins` FFT bins, peaks 1.0.
pub fn mel_filterbank(
    n_mels: usize,
    n_bins: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
) -> Result<Vec<Vec<f64>>> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
        return Err(Error::InvalidConfig(format!(
            "mel band edges must satisfy 0 <= fmin < fmax <= Nyquist; got [{fmin}, {fmax}], Nyquist {nyquist}"
        )));
    }
    if n_mels == 0 {
        return Err(Error::InvalidConfig("n_mels must be positive".into()));
    }
    let fft_size = (n_bins - 1) * 2;
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut bank = vec![vec![0.0; n_bins]; n_mels];
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * sample_rate as f64 / fft_size as f64;
            let w = if f <= lo || f >= hi {
                0.0
            } else if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            };
            bank[m][k] = w;
        }
    }
    Ok(bank)
}

/// Apply a triangular mel filterbank to a power spectrogram.
pub fn mel_spectrogram(
    spec: &FeatureMatrix,
    n_mels: usize,
    fmin: f64,
    fmax: f64,
) -> Result<FeatureMatrix> {
    require_kind(spec, FeatureKind::PowerSpectrogram)?;
    let bank = mel_filterbank(n_mels, spec.n_bins(), spec.sample_rate, fmin, fmax)?;
    let values = spec
        .values
        .iter()
        .map(|frame| {
            bank.iter()
                .map(|row| row.iter().zip(frame).map(|(w, v)| w * v).sum())
                .collect()
        })
        .collect();
    Ok(FeatureMatrix {
        kind: FeatureKind::Mel,
        frame_rate: spec.frame_rate,
        bin_labels: (0..n_mels).map(|m| m as f64).collect(),
        values,
        sample_rate: spec.sample_rate,
    })
}

fn require_kind(spec: &FeatureMatrix, kind: FeatureKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidData(format!("expected {kind:?} input, got {:?}", spec.kind)));
    }
    Ok(())
}

/// Framewise spectral roll-off: the center frequency of the smallest bin
/// index r whose cumulative energy reaches kappa × total frame energy.
/// Silent frames map to 0 Hz.
pub fn spectral_rolloff(spec: &FeatureMatrix, cfg: &RolloffConfig) -> Result<FeatureMatrix> {
    require_kind(spec, FeatureKind::PowerSpectrogram)?;
    cfg.validate()?;
    let values = spec
        .values
        .iter()
        .map(|frame| {
            let total: f64 = frame.iter().sum();
            if total <= 0.0 {
                return vec![0.0];
            }
            let target = cfg.kappa * total;
            let mut cum = 0.0;
            let mut idx = frame.len() - 1;
            for (k, v) in frame.iter().enumerate() {
                cum += v;
                if cum >= target {
                    idx = k;
                    break;
                }
            }
            vec![spec.bin_labels[idx]]
        })
        .collect();
    Ok(FeatureMatrix {
        kind: FeatureKind::Rolloff,
        frame_rate: spec.frame_rate,
        bin_labels: vec![0.0],
        values,
        sample_rate: spec.sample_rate,
    })
}

/// Pitch class of a frequency: 0 = C, 9 = A (reference A4 maps to 9).
pub fn pitch_class(freq: f64, reference_a4: f64) -> usize {
    let semis = (12.0 * (freq / reference_a4).log2()).round() as i64;
    (semis + 9).rem_euclid(12) as usize
}

/// Fold spectral energy into the 12 pitch classes of the octave.
/// Bins below `min_freq` are skipped; silent frames give zero vectors.
pub fn chroma(spec: &FeatureMatrix, cfg: &ChromaConfig) -> Result<FeatureMatrix> {
    require_kind(spec, FeatureKind::PowerSpectrogram)?;
    cfg.validate()?;
    let classes: Vec<Option<usize>> = spec
        .bin_labels
        .iter()
        .map(|&f| (f >= cfg.min_freq).then(|| pitch_class(f, cfg.reference_a4)))
        .collect();
    let values = spec
        .values
        .iter()
        .map(|frame| {
            let mut out = vec![0.0; 12];
            for (v, class) in frame.iter().zip(&classes) {
                if let Some(c) = *class {
                    out[c] += v;
                }
            }
            if cfg.normalization == ChromaNorm::L2PerFrame {
                let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    out.iter_mut().for_each(|v| *v /= norm);
                }
            }
            out
        })
        .collect();
    Ok(FeatureMatrix {
        kind: FeatureKind::Chroma,
        frame_rate: spec.frame_rate,
        bin_labels: (0..12).map(|c| c as f64).collect(),
        values,
        sample_rate: spec.sample_rate,
    })
}

/// Bundle of feature parameters for [`feature_summary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub stft: StftConfig,
    pub n_mels: usize,
    pub fmin: f64,
    /// None means the Nyquist of whatever clip is processed.
    pub fmax: Option<f64>,
    pub rolloff: RolloffConfig,
    pub chroma: ChromaConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            n_mels: 64,
            fmin: 20.0,
            fmax: None,
            rolloff: RolloffConfig::default(),
            chroma: ChromaConfig::default(),
        }
    }
}

impl FeatureConfig {
    /// Summary vector length: mean and std per mel band, roll-off, and the
    /// 12 chroma classes.
    pub fn summary_len(&self) -> usize {
        2 * (self.n_mels + 1 + 12)
    }
}

fn mean_std_columns(m: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
    let n_bins = m.n_bins();
    let n = m.n_frames().max(1) as f64;
    let mut mean = vec![0.0; n_bins];
    for frame in &m.values {
        for (acc, v) in mean.iter_mut().zip(frame) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    let mut var = vec![0.0; n_bins];
    for frame in &m.values {
        for ((acc, v), mu) in var.iter_mut().zip(frame).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let std = var.iter().map(|v| (v / n).sqrt()).collect();
    (mean, std)
}

/// Fixed-length temporal-statistic vector: mean and standard deviation over
/// frames of mel, roll-off, and chroma. Deterministic given the config.
pub fn feature_summary(clip: &AudioClip, channel: usize, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    if clip.is_empty() {
        return Err(Error::InvalidData("cannot summarize an empty clip".into()));
    }
    let spec = stft_power(clip, channel, &cfg.stft)?;
    let fmax = cfg.fmax.unwrap_or_else(|| spec.nyquist());
    let mel = mel_spectrogram(&spec, cfg.n_mels, cfg.fmin, fmax)?;
    let roll = spectral_rolloff(&spec, &cfg.rolloff)?;
    let chr = chroma(&spec, &cfg.chroma)?;

    let mut out = Vec::with_capacity(cfg.summary_len());
    for m in [&mel, &roll, &chr] {
        let (mean, std) = mean_std_columns(m);
        out.extend(mean);
        out.extend(std);
    }
    Ok(out)
}
