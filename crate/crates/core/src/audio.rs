//! Audio buffer type, WAV file I/O, and basic signal utilities.

use std::path::Path;

use crate::error::{Error, Result};

/// A multichannel audio buffer. Samples are `f32` in nominal range [-1, 1];
/// all channels have the same length and every sample is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    channels: Vec<Vec<f32>>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(channels: Vec<Vec<f32>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidData("clip needs at least one channel".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidData("sample rate must be positive".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidData("channels have unequal lengths".into()));
        }
        if channels.iter().flatten().any(|s| !s.is_finite()) {
            return Err(Error::InvalidData("clip contains non-finite samples".into()));
        }
        Ok(Self { channels, sample_rate })
    }

    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    /// All-zero mono clip of the given length.
    pub fn silence(frames: usize, sample_rate: u32) -> Self {
        Self { channels: vec![vec![0.0; frames]], sample_rate }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Frames per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, index: usize) -> Result<&[f32]> {
        self.channels.get(index).map(|c| c.as_slice()).ok_or(Error::ChannelOutOfRange {
            channel: index,
            channel_count: self.channels.len(),
        })
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }
}

/// Root-mean-square amplitude of one channel. Empty clip gives 0.
/// Accumulates in f64.
pub fn rms(clip: &AudioClip, channel: usize) -> Result<f64> {
    let samples = clip.channel(channel)?;
    Ok(rms_slice(samples))
}

pub(crate) fn rms_slice(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum_sq: f64 = samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
    (sum_sq / samples.len() as f64).sqrt()
}

/// Output sample format for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Read a WAV file. PCM 16/24-bit and IEEE float32 are accepted; integer
/// formats are scaled to [-1, 1).
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::UnreadableFile { path: path.into(), source: io },
        other => Error::UnsupportedCodec { path: path.into(), detail: other.to_string() },
    })?;
    let spec = reader.spec();
    let channel_count = spec.channels as usize;
    if channel_count == 0 {
        return Err(Error::UnsupportedCodec { path: path.into(), detail: "zero channels".into() });
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => collect_samples::<f32>(reader, path)?,
        (hound::SampleFormat::Int, 16) => collect_samples::<i16>(reader, path)?
            .into_iter()
            .map(|s| s as f32 / 32768.0)
            .collect(),
        (hound::SampleFormat::Int, 24) => collect_samples::<i32>(reader, path)?
            .into_iter()
            .map(|s| s as f32 / 8_388_608.0)
            .collect(),
        (fmt, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.into(),
                detail: format!("{bits}-bit {fmt:?} not supported (PCM 16/24 or float32 only)"),
            })
        }
    };

    if interleaved.len() % channel_count != 0 {
        return Err(Error::TruncatedData {
            path: path.into(),
            detail: format!(
                "{} samples do not fill {} channels evenly",
                interleaved.len(),
                channel_count
            ),
        });
    }
    let frames = interleaved.len() / channel_count;
    let mut channels = vec![Vec::with_capacity(frames); channel_count];
    for frame in interleaved.chunks_exact(channel_count) {
        for (ch, &s) in channels.iter_mut().zip(frame) {
            ch.push(s);
        }
    }
    AudioClip::new(channels, spec.sample_rate)
}

fn collect_samples<S: hound::Sample>(
    reader: hound::WavReader<std::io::BufReader<std::fs::File>>,
    path: &Path,
) -> Result<Vec<S>> {
    reader
        .into_samples::<S>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::TruncatedData { path: path.into(), detail: e.to_string() })
}

/// Write a clip as a WAV file in the requested format.
pub fn write_wav(clip: &AudioClip, path: &Path, format: WavFormat) -> Result<()> {
    let spec = hound::WavSpec {
        channels: clip.channel_count() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => hound::SampleFormat::Int,
            WavFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let map_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::UnwritablePath { path: path.into(), source: io },
        other => Error::InvalidData(other.to_string()),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map_err)?;
    for frame in 0..clip.len() {
        for ch in clip.channels() {
            match format {
                WavFormat::Pcm16 => {
                    let q = (ch[frame] as f64 * 32768.0).round().clamp(-32768.0, 32767.0);
                    writer.write_sample(q as i16).map_err(map_err)?;
                }
                WavFormat::Float32 => writer.write_sample(ch[frame]).map_err(map_err)?,
            }
        }
    }
    writer.finalize().map_err(map_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp_wav() -> tempfile::TempPath {
        tempfile::Builder::new().suffix(".wav").tempfile().unwrap().into_temp_path()
    }

    #[test]
    fn full_scale_pcm16_maps_to_minus_one() {
        let path = tmp_wav();
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 32000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(i16::MIN).unwrap();
        w.write_sample(i16::MAX).unwrap();
        w.finalize().unwrap();

        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.channel(0).unwrap()[0], -1.0);
        assert!(clip.channel(0).unwrap()[1] < 1.0);
    }

    #[test]
    fn header_frame_count_ten_seconds_mono() {
        let path = tmp_wav();
        let clip = AudioClip::silence(320_000, 32_000);
        write_wav(&clip, &path, WavFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.len(), 320_000);
        assert_eq!(back.sample_rate(), 32_000);
        assert_eq!(back.channel_count(), 1);
    }

    #[test]
    fn corrupted_wave_magic_is_unsupported_codec() {
        let path = tmp_wav();
        let clip = AudioClip::silence(64, 32_000);
        write_wav(&clip, &path, WavFormat::Pcm16).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8..12].copy_from_slice(b"XAVE"); // clobber the WAVE magic
        std::fs::write(&path, bytes).unwrap();
        match read_wav(&path) {
            Err(Error::UnsupportedCodec { .. }) => {}
            other => panic!("expected UnsupportedCodec, got {other:?}"),
        }
    }

    #[test]
    fn empty_clip_round_trips() {
        let path = tmp_wav();
        let clip = AudioClip::silence(0, 32_000);
        write_wav(&clip, &path, WavFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.len(), 0);
    }

    #[test]
    fn rms_constant_and_zero() {
        let clip = AudioClip::mono(vec![0.5; 1000], 32_000).unwrap();
        assert!((rms(&clip, 0).unwrap() - 0.5).abs() < 1e-9);
        let zero = AudioClip::silence(1000, 32_000);
        assert_eq!(rms(&zero, 0).unwrap(), 0.0);
        assert_eq!(rms(&AudioClip::silence(0, 32_000), 0).unwrap(), 0.0);
    }

    #[test]
    fn rms_unit_sine_is_inv_sqrt2() {
        let sr = 32_000u32;
        let samples: Vec<f32> = (0..sr)
            .map(|n| (2.0 * std::f64::consts::PI * 100.0 * n as f64 / sr as f64).sin() as f32)
            .collect();
        let clip = AudioClip::mono(samples, sr).unwrap();
        let expected = 1.0 / 2.0_f64.sqrt();
        assert!((rms(&clip, 0).unwrap() - expected).abs() < 1e-3);
    }

    #[test]
    fn channel_out_of_range() {
        let clip = AudioClip::silence(10, 32_000);
        assert!(matches!(rms(&clip, 1), Err(Error::ChannelOutOfRange { .. })));
    }

    #[test]
    fn rejects_nan() {
        assert!(AudioClip::mono(vec![0.0, f32::NAN], 32_000).is_err());
    }

    proptest! {
        #[test]
        fn float32_round_trip_is_identity(samples in proptest::collection::vec(-1.0f32..1.0, 0..512)) {
            let path = tmp_wav();
            let clip = AudioClip::mono(samples, 32_000).unwrap();
            write_wav(&clip, &path, WavFormat::Float32).unwrap();
            let back = read_wav(&path).unwrap();
            prop_assert_eq!(back.channel(0).unwrap(), clip.channel(0).unwrap());
        }

        #[test]
        fn pcm16_round_trip_within_quantum(samples in proptest::collection::vec(-1.0f32..1.0, 1..512)) {
            let path = tmp_wav();
            let clip = AudioClip::mono(samples, 32_000).unwrap();
            write_wav(&clip, &path, WavFormat::Pcm16).unwrap();
            let back = read_wav(&path).unwrap();
            for (a, b) in back.channel(0).unwrap().iter().zip(clip.channel(0).unwrap()) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }

        #[test]
        fn rms_permutation_invariant_and_linear(
            samples in proptest::collection::vec(-1.0f32..1.0, 1..256),
            gain in 0.01f32..4.0,
        ) {
            let clip = AudioClip::mono(samples.clone(), 32_000).unwrap();
            let base = rms(&clip, 0).unwrap();
            let mut rev = samples.clone();
            rev.reverse();
            let rev_clip = AudioClip::mono(rev, 32_000).unwrap();
            prop_assert!((rms(&rev_clip, 0).unwrap() - base).abs() < 1e-9);
            let scaled: Vec<f32> = samples.iter().map(|s| s * gain).collect();
            let scaled_clip = AudioClip::mono(scaled, 32_000).unwrap();
            prop_assert!((rms(&scaled_clip, 0).unwrap() - base * gain as f64).abs() < 1e-5);
        }
    }
}
