//! Receiver side: quantized MFCCs back to a waveform.
//!
//! MFCC -> (inverse DCT) -> log mel -> (pseudo-inverse filterbank) ->
//! magnitude spectrogram -> (Griffin-Lim with weighted overlap-add) -> audio.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::analysis::{Dct, FrameConfig, MelFilterbank, MelSpectrogram};
use crate::bitstream::{self, EncodedStream};
use crate::error::{Error, Result};
use crate::fft::{Complex64, FramePlan};
use crate::quantizer::{dequantize_frame, CodebookSet};
use crate::signal_io::AudioBuffer;

/// Default number of Griffin-Lim iterations.
pub const DEFAULT_GL_ITERATIONS: usize = 60;

/// Floor on the accumulated squared window during overlap-add.
pub const OLA_FLOOR: f64 = 1e-8;

/// Non-negative one-sided magnitudes, row-major `num_frames x (N/2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    pub values: Vec<f64>,
    pub num_frames: usize,
    pub config: FrameConfig,
}

impl MagnitudeSpectrogram {
    pub fn num_bins(&self) -> usize {
        self.config.num_bins()
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let b = self.num_bins();
        &self.values[m * b..(m + 1) * b]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.num_bins())
    }

    /// Keeps the first `num_frames` rows.
    pub fn truncated(&self, num_frames: usize) -> Self {
        let n = num_frames.min(self.num_frames);
        Self {
            values: self.values[..n * self.num_bins()].to_vec(),
            num_frames: n,
            config: self.config,
        }
    }
}

/// Orthonormal inverse DCT-II of one MFCC vector.
pub fn idct_mel(z_hat: &[f64]) -> Vec<f64> {
    Dct::new(z_hat.len()).inverse(z_hat)
}

/// Moore-Penrose pseudo-inverse of a mel filterbank, `num_bins x num_mel`.
#[derive(Debug, Clone)]
pub struct MelInverse {
    pinv: Vec<f64>,
    num_mel: usize,
    num_bins: usize,
}

/// Singular values below this fraction of the largest count as rank loss.
pub const RANK_TOLERANCE: f64 = 1e-10;

impl MelInverse {
    pub fn new(fb: &MelFilterbank) -> Result<Self> {
        let m = DMatrix::from_row_slice(fb.num_mel, fb.num_bins, &fb.weights);
        let svd = m.svd(true, true);
        let max = svd.singular_values.max();
        let min = svd.singular_values.min();
        if max.is_nan() || max <= 0.0 || min < RANK_TOLERANCE * max {
            return Err(Error::Numerical(format!(
                "mel filterbank is rank deficient (singular values {min:.3e}..{max:.3e})"
            )));
        }
        let pinv = svd
            .pseudo_inverse(RANK_TOLERANCE * max)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let mut flat = Vec::with_capacity(fb.num_bins * fb.num_mel);
        for r in 0..fb.num_bins {
            for c in 0..fb.num_mel {
                flat.push(pinv[(r, c)]);
            }
        }
        Ok(Self {
            pinv: flat,
            num_mel: fb.num_mel,
            num_bins: fb.num_bins,
        })
    }

    /// Linear magnitudes for one row of mel energies (not logarithms),
    /// clamped at zero.
    pub fn apply_energies(&self, energies: &[f64]) -> Vec<f64> {
        self.pinv
            .chunks(self.num_mel)
            .map(|p| p.iter().zip(energies).map(|(a, b)| a * b).sum::<f64>().max(0.0))
            .collect()
    }

    pub fn apply(&self, mel: &MelSpectrogram) -> Result<MagnitudeSpectrogram> {
        if mel.config.num_mel != self.num_mel || mel.config.num_bins() != self.num_bins {
            return Err(Error::Shape(format!(
                "mel spectrogram {}x{} does not match filterbank {}x{}",
                mel.config.num_mel,
                mel.config.num_bins(),
                self.num_mel,
                self.num_bins
            )));
        }
        let values = mel
            .rows()
            .flat_map(|row| {
                let energies: Vec<f64> = row.iter().map(|v| v.exp()).collect();
                self.apply_energies(&energies)
            })
            .collect();
        Ok(MagnitudeSpectrogram {
            values,
            num_frames: mel.num_frames,
            config: mel.config,
        })
    }
}

pub fn mel_to_linear(mel: &MelSpectrogram, fb: &MelFilterbank) -> Result<MagnitudeSpectrogram> {
    MelInverse::new(fb)?.apply(mel)
}

/// Weighted overlap-add of `frames` (row-major, rows of `window.len()`):
/// each frame is multiplied by `window`, summed at `hop`, and divided by the
/// accumulated squared window.
pub fn overlap_add(frames: &[f64], window: &[f64], hop: usize) -> Result<Vec<f64>> {
    let len = window.len();
    if len == 0 || hop == 0 || !frames.len().is_multiple_of(len) {
        return Err(Error::Shape(format!(
            "{} samples do not form frames of length {len}",
            frames.len()
        )));
    }
    let m = frames.len() / len;
    if m == 0 {
        return Ok(Vec::new());
    }
    let total = (m - 1) * hop + len;
    let mut out = vec![0.0; total];
    let mut norm = vec![0.0; total];
    for (i, frame) in frames.chunks_exact(len).enumerate() {
        let start = i * hop;
        for (n, (&f, &w)) in frame.iter().zip(window).enumerate() {
            out[start + n] += f * w;
            norm[start + n] += w * w;
        }
    }
    for (o, &w2) in out.iter_mut().zip(&norm) {
        *o /= w2.max(OLA_FLOOR);
    }
    Ok(out)
}

/// STFT / least-squares inverse STFT pair sharing one window and hop.
#[derive(Debug, Clone)]
pub struct Stft {
    plan: FramePlan,
    window: Vec<f64>,
    hop: usize,
}

impl Stft {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            plan: FramePlan::new(cfg.fft_size),
            window: crate::analysis::hamming(cfg.frame_len),
            hop: cfg.frame_shift,
        })
    }

    /// Spectra of `num_frames` frames of `signal` (which must cover them).
    pub fn forward(&self, signal: &[f64], num_frames: usize) -> Vec<Vec<Complex64>> {
        let len = self.window.len();
        (0..num_frames)
            .into_par_iter()
            .map(|m| {
                let frame: Vec<f64> = signal[m * self.hop..m * self.hop + len]
                    .iter()
                    .zip(&self.window)
                    .map(|(s, w)| s * w)
                    .collect();
                self.plan.forward(&frame)
            })
            .collect()
    }

    pub fn inverse(&self, spectra: &[Vec<Complex64>]) -> Vec<f64> {
        let frames: Vec<f64> = spectra
            .par_iter()
            .flat_map_iter(|s| self.plan.inverse(s))
            .collect();
        overlap_add(&frames, &self.window, self.hop).expect("frames come from the plan")
    }
}

/// Result of a Griffin-Lim run.
#[derive(Debug, Clone)]
pub struct GriffinLimResult {
    pub audio: AudioBuffer,
    /// `|| |STFT(x_t)| - mag ||` over the full two-sided spectrum, per iteration.
    pub consistency: Vec<f64>,
}

/// Bin weights that turn a one-sided sum into the full two-sided sum.
fn bin_weight(k: usize, bins: usize) -> f64 {
    if k == 0 || k == bins - 1 {
        1.0
    } else {
        2.0
    }
}

/// Griffin-Lim phase reconstruction from zero initial phase.
pub fn griffin_lim(mag: &MagnitudeSpectrogram, iterations: usize) -> Result<GriffinLimResult> {
    if iterations == 0 {
        return Err(Error::Config("Griffin-Lim needs at least one iteration".into()));
    }
    let cfg = mag.config;
    let stft = Stft::new(&cfg)?;
    let bins = cfg.num_bins();
    if mag.values.len() != mag.num_frames * bins {
        return Err(Error::Shape("magnitude values do not match frame count".into()));
    }
    if mag.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Numerical("magnitudes must be finite and non-negative".into()));
    }
    let target: Vec<&[f64]> = mag.rows().collect();
    let mut spectra: Vec<Vec<Complex64>> = target
        .iter()
        .map(|row| row.iter().map(|&a| Complex64::new(a, 0.0)).collect())
        .collect();

    let mut consistency = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let signal = stft.inverse(&spectra);
        let estimate = stft.forward(&signal, mag.num_frames);
        let mut err = 0.0;
        for (row, a) in estimate.iter().zip(&target) {
            for (k, (x, &amp)) in row.iter().zip(a.iter()).enumerate() {
                let d = x.norm() - amp;
                err += bin_weight(k, bins) * d * d;
            }
        }
        consistency.push(err.sqrt());
        spectra = estimate
            .into_iter()
            .zip(&target)
            .map(|(row, a)| {
                row.into_iter()
                    .zip(a.iter())
                    .map(|(x, &amp)| {
                        let n = x.norm();
                        if n > 0.0 {
                            x * (amp / n)
                        } else {
                            Complex64::new(amp, 0.0)
                        }
                    })
                    .collect()
            })
            .collect();
    }
    let samples = stft.inverse(&spectra);
    Ok(GriffinLimResult {
        audio: AudioBuffer::new(samples, cfg.sample_rate),
        consistency,
    })
}

pub const MELSPEC_MAGIC: &[u8; 4] = b"MELS";
pub const MELSPEC_VERSION: u8 = 1;
pub const MELSPEC_HEADER_LEN: usize = 25;

/// Serializes a log mel-spectrogram in the MELSPEC layout: magic `MELS`,
/// version byte, then `M`, `K`, `f_s`, `L`, `R` as u32 LE, then row-major
/// f32 LE values.
pub fn melspec_bytes(mel: &MelSpectrogram) -> Result<Vec<u8>> {
    if mel.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite mel value".into()));
    }
    let c = &mel.config;
    let mut out = Vec::with_capacity(MELSPEC_HEADER_LEN + 4 * mel.values.len());
    out.extend_from_slice(MELSPEC_MAGIC);
    out.push(MELSPEC_VERSION);
    for v in [
        mel.num_frames as u32,
        c.num_mel as u32,
        c.sample_rate,
        c.frame_len as u32,
        c.frame_shift as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in &mel.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn parse_melspec(bytes: &[u8]) -> Result<MelSpectrogram> {
    if bytes.len() < MELSPEC_HEADER_LEN || &bytes[..4] != MELSPEC_MAGIC {
        return Err(Error::StreamFormat("not a MELSPEC file".into()));
    }
    if bytes[4] != MELSPEC_VERSION {
        return Err(Error::StreamFormat(format!("unsupported MELSPEC version {}", bytes[4])));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[5 + 4 * i..9 + 4 * i].try_into().expect("4 bytes"));
    let (m, k, fs, l, r) = (field(0) as usize, field(1) as usize, field(2), field(3) as usize, field(4) as usize);
    let expected = m
        .checked_mul(k)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(MELSPEC_HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(Error::StreamFormat(format!(
            "MELSPEC body length {} does not match {m} x {k} values",
            bytes.len() - MELSPEC_HEADER_LEN
        )));
    }
    let values = bytes[MELSPEC_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(MelSpectrogram {
        values,
        num_frames: m,
        config: FrameConfig {
            frame_len: l,
            frame_shift: r,
            fft_size: l,
            num_mel: k,
            sample_rate: fs,
        },
    })
}

pub fn export_mel(mel: &MelSpectrogram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, melspec_bytes(mel)?).map_err(|e| Error::io(path, e))
}

pub fn import_mel(path: impl AsRef<Path>) -> Result<MelSpectrogram> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_melspec(&bytes)
}

/// Builds the log mel-spectrogram from per-frame MFCC vectors.
pub fn mfcc_rows_to_mel(rows: &[Vec<f64>], cfg: &FrameConfig) -> Result<MelSpectrogram> {
    let dct = Dct::new(cfg.num_mel);
    let mut values = Vec::with_capacity(rows.len() * cfg.num_mel);
    for z in rows {
        if z.len() != cfg.num_mel {
            return Err(Error::Shape(format!(
                "MFCC vector of length {} for {} mel bands",
                z.len(),
                cfg.num_mel
            )));
        }
        values.extend(dct.inverse(z));
    }
    Ok(MelSpectrogram {
        values,
        num_frames: rows.len(),
        config: *cfg,
    })
}

/// Dequantizes every frame of a stream into the reconstructed log mel-spectrogram.
pub fn decode_mel(stream: &EncodedStream, set: &CodebookSet, cfg: &FrameConfig) -> Result<MelSpectrogram> {
    if stream.header.codebook_hash != set.content_hash() {
        return Err(Error::HashMismatch {
            stream: stream.header.codebook_hash,
            codebook: set.content_hash(),
        });
    }
    set.require_mode(stream.header.mode)?;
    if stream.header.frame_count == 0 {
        return Err(Error::StreamFormat("stream contains no frames".into()));
    }
    if set.spectral_dim() + 1 != cfg.num_mel {
        return Err(Error::Shape(format!(
            "codebooks cover {} coefficients, analysis uses {}",
            set.spectral_dim() + 1,
            cfg.num_mel
        )));
    }
    let rows = bitstream::codes(stream)
        .iter()
        .map(|code| dequantize_frame(code, set))
        .collect::<Result<Vec<_>>>()?;
    mfcc_rows_to_mel(&rows, cfg)
}

/// Full reference decode with the Griffin-Lim vocoder.
pub fn decode_stream(stream: &EncodedStream, set: &CodebookSet, gl_iterations: usize) -> Result<AudioBuffer> {
    let vocoder = crate::vocoder::GriffinLimVocoder::new(gl_iterations);
    decode_stream_with(stream, set, &vocoder)
}

pub fn decode_stream_with(
    stream: &EncodedStream,
    set: &CodebookSet,
    vocoder: &dyn crate::vocoder::Vocoder,
) -> Result<AudioBuffer> {
    let cfg = FrameConfig::default();
    let mel = decode_mel(stream, set, &cfg)?;
    vocoder.synthesize(&mel)
}

/// Replaces non-finite samples with an error and clamps to `[-1, 1]`.
pub fn finalize_audio(mut audio: AudioBuffer) -> Result<AudioBuffer> {
    if audio.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("decoder produced non-finite samples".into()));
    }
    audio.samples.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    Ok(audio)
}
