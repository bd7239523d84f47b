//! Objective quality measures of decoded speech against a reference.

mod resample;
mod stoi;

pub use resample::resample;
pub use stoi::{stoi, SEGMENT_FRAMES, STOI_RATE};

use serde::{Deserialize, Serialize};

use crate::analysis::{FeatureExtractor, MfccMatrix};
use crate::error::{Error, Result};
use crate::signal_io::AudioBuffer;
use crate::synthesis::MagnitudeSpectrogram;

/// `(10 / ln 10) * sqrt(2)`, the cepstral-distance scale to decibels.
pub const MCD_SCALE: f64 = 10.0 / std::f64::consts::LN_10 * std::f64::consts::SQRT_2;
pub const LSD_EPSILON: f64 = 1e-8;
pub const DEFAULT_SEGMENT_LEN: usize = 256;
pub const SEG_SNR_MIN_DB: f64 = -10.0;
pub const SEG_SNR_MAX_DB: f64 = 35.0;
/// Segments this far below the loudest reference segment count as silent.
pub const SEG_SNR_SILENCE_DB: f64 = 40.0;
pub const MEAN_RECORD_ID: &str = "__mean__";

/// Mel-cepstral distortion in dB, excluding the energy coefficient.
pub fn mcd(reference: &MfccMatrix, degraded: &MfccMatrix) -> Result<f64> {
    let k = reference.config.num_mel;
    if degraded.config.num_mel != k {
        return Err(Error::Shape(format!(
            "MFCC dimensions differ: {k} vs {}",
            degraded.config.num_mel
        )));
    }
    let m = reference.num_frames.min(degraded.num_frames);
    if m == 0 {
        return Err(Error::EmptySignal);
    }
    let total: f64 = (0..m)
        .map(|t| {
            let (a, b) = (reference.row(t), degraded.row(t));
            a[1..].iter().zip(&b[1..]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        })
        .sum();
    Ok(MCD_SCALE * total / m as f64)
}

/// Log-spectral distance in dB.
pub fn lsd(reference: &MagnitudeSpectrogram, degraded: &MagnitudeSpectrogram) -> Result<f64> {
    let bins = reference.num_bins();
    if degraded.num_bins() != bins {
        return Err(Error::Shape(format!("spectra have {bins} and {} bins", degraded.num_bins())));
    }
    let m = reference.num_frames.min(degraded.num_frames);
    if m == 0 {
        return Err(Error::EmptySignal);
    }
    let total: f64 = (0..m)
        .map(|t| {
            let mean_sq = reference
                .row(t)
                .iter()
                .zip(degraded.row(t))
                .map(|(r, d)| {
                    let v = 20.0 * ((r + LSD_EPSILON) / (d + LSD_EPSILON)).log10();
                    v * v
                })
                .sum::<f64>()
                / bins as f64;
            mean_sq.sqrt()
        })
        .sum();
    Ok(total / m as f64)
}

/// Mean segmental SNR over non-silent reference segments of `seg_len`
/// samples. A trailing partial segment is ignored unless the signal is
/// shorter than one segment.
pub fn seg_snr(reference: &AudioBuffer, degraded: &AudioBuffer, seg_len: usize) -> Result<f64> {
    if seg_len == 0 {
        return Err(Error::Config("segment length must be positive".into()));
    }
    let n = reference.len().min(degraded.len());
    if n == 0 {
        return Err(Error::EmptySignal);
    }
    let (r, d) = (&reference.samples[..n], &degraded.samples[..n]);
    let seg = seg_len.min(n);
    let stats: Vec<(f64, f64)> = r
        .chunks_exact(seg)
        .zip(d.chunks_exact(seg))
        .map(|(a, b)| {
            let s = a.iter().map(|v| v * v).sum::<f64>();
            let e = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            (s, e)
        })
        .collect();
    let loudest = stats.iter().map(|s| s.0).fold(0.0, f64::max);
    if loudest == 0.0 {
        return Err(Error::EmptySignal);
    }
    let floor = loudest * 10f64.powf(-SEG_SNR_SILENCE_DB / 10.0);
    let values: Vec<f64> = stats
        .iter()
        .filter(|(s, _)| *s > 0.0 && *s >= floor)
        .map(|&(s, e)| {
            if e == 0.0 {
                SEG_SNR_MAX_DB
            } else {
                (10.0 * (s / e).log10()).clamp(SEG_SNR_MIN_DB, SEG_SNR_MAX_DB)
            }
        })
        .collect();
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// One line of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub id: String,
    /// Absent when the pair is too short for STOI.
    pub stoi: Option<f64>,
    pub mcd_db: f64,
    pub lsd_db: f64,
    pub seg_snr_db: f64,
    /// Number of utterances averaged; only set on the corpus-mean record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl QualityReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report fields are serializable")
    }
}

/// Computes every metric for one reference/degraded pair after truncating
/// both to the shorter length.
pub fn evaluate(
    id: &str,
    reference: &AudioBuffer,
    degraded: &AudioBuffer,
    extractor: &FeatureExtractor,
) -> Result<QualityReport> {
    reference.require_codec_rate()?;
    degraded.require_codec_rate()?;
    let n = reference.len().min(degraded.len());
    if n == 0 {
        return Err(Error::EmptySignal);
    }
    let r = AudioBuffer::new(reference.samples[..n].to_vec(), reference.sample_rate_hz);
    let d = AudioBuffer::new(degraded.samples[..n].to_vec(), degraded.sample_rate_hz);
    let fr = extractor.analyze(&r)?;
    let fd = extractor.analyze(&d)?;
    let stoi = match stoi(&r, &d) {
        Ok(v) => Some(v),
        Err(Error::Shape(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(QualityReport {
        id: id.to_string(),
        stoi,
        mcd_db: mcd(&fr.mfcc, &fd.mfcc)?,
        lsd_db: lsd(&fr.magnitude, &fd.magnitude)?,
        seg_snr_db: seg_snr(&r, &d, DEFAULT_SEGMENT_LEN)?,
        count: None,
    })
}

/// Corpus-mean record. STOI is averaged over the utterances that have it.
pub fn mean_report(reports: &[QualityReport]) -> Option<QualityReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let stoi: Vec<f64> = reports.iter().filter_map(|r| r.stoi).collect();
    Some(QualityReport {
        id: MEAN_RECORD_ID.to_string(),
        stoi: (!stoi.is_empty()).then(|| stoi.iter().sum::<f64>() / stoi.len() as f64),
        mcd_db: reports.iter().map(|r| r.mcd_db).sum::<f64>() / n,
        lsd_db: reports.iter().map(|r| r.lsd_db).sum::<f64>() / n,
        seg_snr_db: reports.iter().map(|r| r.seg_snr_db).sum::<f64>() / n,
        count: Some(reports.len()),
    })
}

/// Renders per-utterance lines followed by the mean footer.
pub fn report_lines(reports: &[QualityReport]) -> String {
    let mut out = String::new();
    for r in reports.iter().chain(mean_report(reports).as_ref()) {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}
