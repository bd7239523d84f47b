//! Transmitter-side feature extraction: framing, log mel-spectrogram and MFCC.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::FramePlan;
use crate::signal_io::AudioBuffer;
use crate::synthesis::MagnitudeSpectrogram;

/// Floor applied to mel energies before the logarithm.
pub const MEL_FLOOR: f64 = 1e-5;

/// Framing and filterbank geometry shared by analysis and synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub frame_len: usize,
    pub frame_shift: usize,
    pub fft_size: usize,
    pub num_mel: usize,
    pub sample_rate: u32,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_len: 1024,
            frame_shift: 256,
            fft_size: 1024,
            num_mel: 80,
            sample_rate: 16_000,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 || self.frame_shift == 0 || self.num_mel == 0 {
            return Err(Error::Config("frame_len, frame_shift and num_mel must be positive".into()));
        }
        if self.frame_len != self.fft_size {
            return Err(Error::Config(format!(
                "frame_len {} must equal fft_size {}",
                self.frame_len, self.fft_size
            )));
        }
        if !self.frame_len.is_multiple_of(self.frame_shift) {
            return Err(Error::Config(format!(
                "frame_shift {} must divide frame_len {}",
                self.frame_shift, self.frame_len
            )));
        }
        if self.num_mel > self.num_bins() {
            return Err(Error::Config(format!(
                "{} mel bands exceed {} FFT bins",
                self.num_mel,
                self.num_bins()
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames per second, `f_s / R`.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.frame_shift as f64
    }

    /// Number of frames for a signal of `len` samples under tail zero-padding.
    pub fn num_frames(&self, len: usize) -> usize {
        len.div_ceil(self.frame_shift).max(1)
    }

    /// Length of the signal covered by `num_frames` frames.
    pub fn signal_len(&self, num_frames: usize) -> usize {
        if num_frames == 0 {
            return 0;
        }
        (num_frames - 1) * self.frame_shift + self.frame_len
    }
}

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi n / (L - 1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
        .collect()
}

/// Windowed frames, row-major `num_frames x frame_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub frames: Vec<f64>,
    pub num_frames: usize,
    pub frame_len: usize,
    pub window: Vec<f64>,
}

impl FrameMatrix {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.frames[m * self.frame_len..(m + 1) * self.frame_len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.frames.chunks(self.frame_len)
    }
}

pub fn frame_signal(audio: &AudioBuffer, cfg: &FrameConfig) -> Result<FrameMatrix> {
    cfg.validate()?;
    if audio.sample_rate_hz != cfg.sample_rate {
        return Err(Error::SampleRate {
            expected: cfg.sample_rate,
            found: audio.sample_rate_hz,
        });
    }
    if audio.is_empty() {
        return Err(Error::EmptySignal);
    }
    let m = cfg.num_frames(audio.len());
    let mut padded = audio.samples.clone();
    padded.resize(cfg.signal_len(m), 0.0);

    let window = hamming(cfg.frame_len);
    let mut frames = Vec::with_capacity(m * cfg.frame_len);
    for i in 0..m {
        let start = i * cfg.frame_shift;
        frames.extend(
            padded[start..start + cfg.frame_len]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w),
        );
    }
    Ok(FrameMatrix {
        frames,
        num_frames: m,
        frame_len: cfg.frame_len,
        window,
    })
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank, row-major `num_mel x num_bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<f64>,
    pub num_mel: usize,
    pub num_bins: usize,
    /// `num_mel + 2` edge/center frequencies in Hz.
    pub band_edges: Vec<f64>,
}

impl MelFilterbank {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.num_bins..(k + 1) * self.num_bins]
    }

    /// Center frequency of band `k` in Hz.
    pub fn center_hz(&self, k: usize) -> f64 {
        self.band_edges[k + 1]
    }

    /// `M x` for one magnitude row.
    pub fn apply(&self, spectrum: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.num_bins)
            .map(|w| w.iter().zip(spectrum).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Builds `K` triangles equally spaced on the mel scale over `0..f_s/2`.
///
/// Each triangle is sampled at the FFT bin frequencies and then scaled so
/// that its largest sampled weight is exactly 1; narrow low-frequency bands
/// would otherwise peak well below 1 because no bin lands on their center.
pub fn build_mel_filterbank(cfg: &FrameConfig) -> Result<MelFilterbank> {
    if cfg.num_mel == 0 {
        return Err(Error::Config("num_mel must be at least 1".into()));
    }
    let num_bins = cfg.num_bins();
    if cfg.num_mel > num_bins {
        return Err(Error::Config(format!(
            "{} mel bands exceed {} FFT bins",
            cfg.num_mel, num_bins
        )));
    }
    let nyquist = cfg.sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let points = cfg.num_mel + 2;
    let band_edges: Vec<f64> = (0..points)
        .map(|i| mel_to_hz(mel_max * i as f64 / (points - 1) as f64))
        .collect();
    let bin_hz = cfg.sample_rate as f64 / cfg.fft_size as f64;

    let mut weights = vec![0.0; cfg.num_mel * num_bins];
    for k in 0..cfg.num_mel {
        let (lo, center, hi) = (band_edges[k], band_edges[k + 1], band_edges[k + 2]);
        let row = &mut weights[k * num_bins..(k + 1) * num_bins];
        for (j, w) in row.iter_mut().enumerate() {
            let f = j as f64 * bin_hz;
            let rise = (f - lo) / (center - lo);
            let fall = (hi - f) / (hi - center);
            *w = rise.min(fall).max(0.0);
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::Config(format!(
                "mel band {k} ({lo:.1}..{hi:.1} Hz) contains no FFT bin"
            )));
        }
        row.iter_mut().for_each(|w| *w /= peak);
    }
    Ok(MelFilterbank {
        weights,
        num_mel: cfg.num_mel,
        num_bins,
        band_edges,
    })
}

/// Natural-log mel energies, row-major `num_frames x num_mel`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Vec<f64>,
    pub num_frames: usize,
    pub config: FrameConfig,
}

impl MelSpectrogram {
    pub fn row(&self, m: usize) -> &[f64] {
        let k = self.config.num_mel;
        &self.values[m * k..(m + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.config.num_mel.max(1))
    }
}

/// MFCC vectors, row-major `num_frames x num_mel`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    pub values: Vec<f64>,
    pub num_frames: usize,
    pub config: FrameConfig,
}

impl MfccMatrix {
    pub fn row(&self, m: usize) -> &[f64] {
        let k = self.config.num_mel;
        &self.values[m * k..(m + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.config.num_mel.max(1))
    }

    pub fn from_rows(rows: &[Vec<f64>], config: FrameConfig) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != config.num_mel) {
            return Err(Error::Shape(format!(
                "MFCC row has {} coefficients, expected {}",
                bad.len(),
                config.num_mel
            )));
        }
        Ok(Self {
            values: rows.concat(),
            num_frames: rows.len(),
            config,
        })
    }
}

/// One-sided magnitude of every frame's N-point FFT.
pub fn magnitude_spectrogram(frames: &FrameMatrix, cfg: &FrameConfig) -> Result<MagnitudeSpectrogram> {
    if frames.frame_len != cfg.frame_len {
        return Err(Error::Shape(format!(
            "frames of length {} do not match frame_len {}",
            frames.frame_len, cfg.frame_len
        )));
    }
    let plan = FramePlan::new(cfg.fft_size);
    let rows: Vec<Vec<f64>> = frames
        .frames
        .par_chunks(frames.frame_len)
        .map(|row| plan.magnitude(row))
        .collect();
    Ok(MagnitudeSpectrogram {
        values: rows.concat(),
        num_frames: frames.num_frames,
        config: *cfg,
    })
}

pub fn log_mel_spectrogram(
    frames: &FrameMatrix,
    fb: &MelFilterbank,
    cfg: &FrameConfig,
) -> Result<MelSpectrogram> {
    if fb.num_bins != cfg.num_bins() || fb.num_mel != cfg.num_mel {
        return Err(Error::Shape(format!(
            "filterbank {}x{} does not match config {}x{}",
            fb.num_mel,
            fb.num_bins,
            cfg.num_mel,
            cfg.num_bins()
        )));
    }
    let mag = magnitude_spectrogram(frames, cfg)?;
    Ok(log_mel_from_magnitude(&mag, fb))
}

/// Applies the filterbank and floored natural log to a magnitude spectrogram.
pub fn log_mel_from_magnitude(mag: &MagnitudeSpectrogram, fb: &MelFilterbank) -> MelSpectrogram {
    let values = mag
        .rows()
        .flat_map(|row| {
            fb.apply(row)
                .into_iter()
                .map(|v| v.max(MEL_FLOOR).ln())
                .collect::<Vec<_>>()
        })
        .collect();
    MelSpectrogram {
        values,
        num_frames: mag.num_frames,
        config: mag.config,
    }
}

/// Orthonormal DCT-II basis; the inverse is its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct Dct {
    size: usize,
    basis: Vec<f64>,
}

impl Dct {
    pub fn new(size: usize) -> Self {
        let n = size as f64;
        let mut basis = Vec::with_capacity(size * size);
        for k in 0..size {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for i in 0..size {
                let arg = std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n);
                basis.push(scale * arg.cos());
            }
        }
        Self { size, basis }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.size, "DCT length mismatch");
        self.basis
            .chunks(self.size)
            .map(|b| b.iter().zip(input).map(|(x, y)| x * y).sum())
            .collect()
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.size, "IDCT length mismatch");
        let mut out = vec![0.0; self.size];
        for (b, &c) in self.basis.chunks(self.size).zip(coeffs) {
            for (o, &v) in out.iter_mut().zip(b) {
                *o += c * v;
            }
        }
        out
    }
}

pub fn mfcc(mel: &MelSpectrogram) -> Result<MfccMatrix> {
    let k = mel.config.num_mel;
    if mel.values.len() != mel.num_frames * k {
        return Err(Error::Shape(format!(
            "mel values length {} is not {} x {}",
            mel.values.len(),
            mel.num_frames,
            k
        )));
    }
    if mel.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite log-mel value".into()));
    }
    let dct = Dct::new(k);
    let values = mel.rows().flat_map(|row| dct.forward(row)).collect();
    Ok(MfccMatrix {
        values,
        num_frames: mel.num_frames,
        config: mel.config,
    })
}

/// Reusable analysis front end holding the filterbank for one configuration.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FrameConfig,
    filterbank: MelFilterbank,
}

/// Everything the analysis front end produces for one signal.
#[derive(Debug, Clone)]
pub struct Features {
    pub magnitude: MagnitudeSpectrogram,
    pub mel: MelSpectrogram,
    pub mfcc: MfccMatrix,
}

impl FeatureExtractor {
    pub fn new(config: FrameConfig) -> Result<Self> {
        config.validate()?;
        let filterbank = build_mel_filterbank(&config)?;
        Ok(Self { config, filterbank })
    }

    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn analyze(&self, audio: &AudioBuffer) -> Result<Features> {
        let frames = frame_signal(audio, &self.config)?;
        let magnitude = magnitude_spectrogram(&frames, &self.config)?;
        let mel = log_mel_from_magnitude(&magnitude, &self.filterbank);
        let mfcc = mfcc(&mel)?;
        Ok(Features {
            magnitude,
            mel,
            mfcc,
        })
    }

    pub fn mfcc(&self, audio: &AudioBuffer) -> Result<MfccMatrix> {
        Ok(self.analyze(audio)?.mfcc)
    }
}
