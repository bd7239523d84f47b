//! Short-time objective intelligibility.

use realfft::RealFftPlanner;

use super::resample::resample;
use crate::error::{Error, Result};

pub const STOI_RATE: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = 128;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per intermediate-intelligibility segment.
pub const SEGMENT_FRAMES: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Hann window of `len + 2` points without its zero end points.
fn hann_inner(len: usize) -> Vec<f64> {
    let m = (len + 1) as f64;
    (1..=len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / m).cos())
        .collect()
}

/// Third-octave band matrix over the `NFFT / 2 + 1` bins, as half-open bin ranges.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let bins = NFFT / 2 + 1;
    let f: Vec<f64> = (0..bins).map(|k| k as f64 * STOI_RATE as f64 / NFFT as f64).collect();
    let nearest = |target: f64| {
        let mut best = 0;
        for (i, &v) in f.iter().enumerate() {
            if (v - target).powi(2) < (f[best] - target).powi(2) {
                best = i;
            }
        }
        best
    };
    (0..BANDS)
        .map(|k| {
            let k = k as f64;
            let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Drops frames more than the dynamic range below the loudest reference
/// frame, then overlap-adds what remains.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = hann_inner(FRAME);
    if x.len() < FRAME {
        return (Vec::new(), Vec::new());
    }
    let starts: Vec<usize> = (0..=x.len() - FRAME).step_by(HOP).collect();
    let frame = |s: &[f64], i: usize| -> Vec<f64> { s[i..i + FRAME].iter().zip(&w).map(|(a, b)| a * b).collect() };
    let xf: Vec<Vec<f64>> = starts.iter().map(|&i| frame(x, i)).collect();
    let yf: Vec<Vec<f64>> = starts.iter().map(|&i| frame(y, i)).collect();
    let energies: Vec<f64> = xf.iter().map(|f| 20.0 * (norm(f) + EPS).log10()).collect();
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..xf.len()).filter(|&i| max - DYN_RANGE_DB - energies[i] < 0.0).collect();
    let ola = |frames: &[Vec<f64>]| {
        if keep.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0.0; (keep.len() - 1) * HOP + FRAME];
        for (j, &i) in keep.iter().enumerate() {
            for (o, v) in out[j * HOP..j * HOP + FRAME].iter_mut().zip(&frames[i]) {
                *o += v;
            }
        }
        out
    };
    (ola(&xf), ola(&yf))
}

/// Band envelopes, `BANDS` rows of one value per frame.
fn band_envelopes(x: &[f64], bands: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let w = hann_inner(FRAME);
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(NFFT);
    let mut input = fft.make_input_vec();
    let mut spec = fft.make_output_vec();
    let mut out = vec![Vec::new(); BANDS];
    let mut i = 0;
    while i + FRAME < x.len() {
        input.iter_mut().for_each(|v| *v = 0.0);
        for (d, (s, ww)) in input.iter_mut().zip(x[i..i + FRAME].iter().zip(&w)) {
            *d = s * ww;
        }
        fft.process(&mut input, &mut spec).expect("buffer sizes come from the plan");
        for (b, &(lo, hi)) in bands.iter().enumerate() {
            out[b].push(spec[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        }
        i += HOP;
    }
    out
}

/// STOI of `degraded` against `reference`, clamped to `[0, 1]`.
///
/// Both signals are truncated to the shorter one. Fails when fewer than
/// `SEGMENT_FRAMES` frames survive silence removal.
pub fn stoi(reference: &crate::signal_io::AudioBuffer, degraded: &crate::signal_io::AudioBuffer) -> Result<f64> {
    if reference.sample_rate_hz != degraded.sample_rate_hz {
        return Err(Error::SampleRate {
            expected: reference.sample_rate_hz,
            found: degraded.sample_rate_hz,
        });
    }
    let n = reference.len().min(degraded.len());
    let fs = reference.sample_rate_hz;
    let x = resample(&reference.samples[..n], fs, STOI_RATE);
    let y = resample(&degraded.samples[..n], fs, STOI_RATE);
    let (x, y) = remove_silent_frames(&x, &y);

    let bands = third_octave_bands();
    let xe = band_envelopes(&x, &bands);
    let ye = band_envelopes(&y, &bands);
    let frames = xe[0].len();
    if frames < SEGMENT_FRAMES {
        return Err(Error::Shape(format!(
            "STOI needs at least {SEGMENT_FRAMES} non-silent frames, found {frames}"
        )));
    }

    let clip = 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let segments = frames - SEGMENT_FRAMES + 1;
    for m in SEGMENT_FRAMES..=frames {
        for b in 0..BANDS {
            let xs = &xe[b][m - SEGMENT_FRAMES..m];
            let ys = &ye[b][m - SEGMENT_FRAMES..m];
            let alpha = norm(xs) / (norm(ys) + EPS);
            let mut yp: Vec<f64> = ys.iter().zip(xs).map(|(yv, xv)| (yv * alpha).min(xv * (1.0 + clip))).collect();
            let mut xc = xs.to_vec();
            for v in [&mut yp, &mut xc] {
                let mean = v.iter().sum::<f64>() / SEGMENT_FRAMES as f64;
                v.iter_mut().for_each(|a| *a -= mean);
                let nv = norm(v) + EPS;
                v.iter_mut().for_each(|a| *a /= nv);
            }
            total += yp.iter().zip(&xc).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok((total / (segments * BANDS) as f64).clamp(0.0, 1.0))
}
