//! PCM WAV input/output and the codec's sampling contract.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

/// Sample rate every codec entry point requires.
pub const CODEC_SAMPLE_RATE: u32 = 16_000;

/// Mono PCM samples in `[-1, 1]` together with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Rejects anything that is not 16 kHz. There is no implicit resampling.
    pub fn require_codec_rate(&self) -> Result<()> {
        if self.sample_rate_hz != CODEC_SAMPLE_RATE {
            return Err(Error::SampleRate {
                expected: CODEC_SAMPLE_RATE,
                found: self.sample_rate_hz,
            });
        }
        Ok(())
    }
}

/// Reads an integer PCM WAV file (16, 24 or 32 bit). Multichannel input is
/// averaged down to mono; the sample rate is kept as found in the file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedAudio(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int {
        return Err(Error::UnsupportedAudio(format!(
            "{}: only integer PCM is supported",
            path.display()
        )));
    }
    if !matches!(spec.bits_per_sample, 16 | 24 | 32) {
        return Err(Error::UnsupportedAudio(format!(
            "{}: unsupported bit depth {}",
            path.display(),
            spec.bits_per_sample
        )));
    }
    let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
    let channels = spec.channels.max(1) as usize;

    let raw = reader
        .into_samples::<i32>()
        .collect::<std::result::Result<Vec<i32>, _>>()
        .map_err(|e| Error::UnsupportedAudio(format!("{}: {e}", path.display())))?;

    let samples = raw
        .chunks(channels)
        .map(|frame| frame.iter().map(|&s| s as f64 / scale).sum::<f64>() / channels as f64)
        .collect();

    Ok(AudioBuffer::new(samples, spec.sample_rate))
}

/// Largest value representable in 16-bit PCM after scaling by 32768.
pub const PCM16_MAX: f64 = 1.0 - 1.0 / 32768.0;

/// Converts one sample to 16-bit PCM, clamping to `[-1, 1 - 2^-15]`.
pub fn to_pcm16(sample: f64) -> i16 {
    let clamped = if sample.is_nan() {
        0.0
    } else {
        sample.clamp(-1.0, PCM16_MAX)
    };
    (clamped * 32768.0).round() as i16
}

/// Writes a mono 16-bit PCM WAV file.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let path = path.as_ref();
    let bytes = wav_bytes(audio)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Encodes `audio` as a complete mono 16-bit WAV file image.
pub fn wav_bytes(audio: &AudioBuffer) -> Result<Vec<u8>> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut writer = WavWriter::new(&mut cursor, spec)
            .map_err(|e| Error::UnsupportedAudio(e.to_string()))?;
        for &s in &audio.samples {
            writer
                .write_sample(to_pcm16(s))
                .map_err(|e| Error::UnsupportedAudio(e.to_string()))?;
        }
        writer
            .finalize()
            .map_err(|e| Error::UnsupportedAudio(e.to_string()))?;
    }
    Ok(cursor.into_inner())
}
