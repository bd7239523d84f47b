//! Seeded speech-like test material: a glottal pulse train through formant
//! resonators, interleaved with fricative noise and pauses.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::signal_io::AudioBuffer;

const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [660.0, 1720.0, 2410.0],
];
const BANDWIDTHS: [f64; 3] = [80.0, 100.0, 140.0];
const FORMANT_GAINS: [f64; 3] = [1.0, 0.6, 0.3];

/// Two-pole resonator.
#[derive(Clone, Copy)]
struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new() -> Self {
        Self { y1: 0.0, y2: 0.0 }
    }

    fn step(&mut self, x: f64, freq: f64, bw: f64, fs: f64) -> f64 {
        let r = (-PI * bw / fs).exp();
        let theta = 2.0 * PI * freq / fs;
        let y = x + 2.0 * r * theta.cos() * self.y1 - r * r * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn envelope(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    if i < ramp {
        0.5 - 0.5 * (PI * i as f64 / ramp as f64).cos()
    } else if i >= len - ramp {
        0.5 - 0.5 * (PI * (len - i) as f64 / ramp as f64).cos()
    } else {
        1.0
    }
}

/// Scales `seg` to the given RMS level and applies a fade envelope.
fn shape(mut seg: Vec<f64>, rms: f64, ramp_div: usize) -> Vec<f64> {
    let len = seg.len();
    let cur = (seg.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if cur > 0.0 {
        for (i, v) in seg.iter_mut().enumerate() {
            *v *= rms / cur * envelope(i, len, len / ramp_div);
        }
    }
    seg
}

/// Generates `duration_secs` of speech-like audio at `sample_rate`, peak 0.5.
/// Identical seeds give identical samples.
pub fn synthetic_speech(seed: u64, duration_secs: f64, sample_rate: u32) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let total = (duration_secs * fs).round() as usize;
    let base_f0: f64 = rng.random_range(95.0..220.0);
    let formant_scale: f64 = rng.random_range(0.9..1.15);

    let mut out = Vec::with_capacity(total);
    let mut phase = 0.0;
    let mut prev = VOWELS[rng.random_range(0..VOWELS.len())];

    while out.len() < total {
        let kind: f64 = rng.random();
        let len = (rng.random_range(0.12..0.32) * fs) as usize;
        if kind < 0.12 {
            // Pause with a faint noise floor.
            for _ in 0..len / 2 {
                let n: f64 = rng.sample(StandardNormal);
                out.push(1e-4 * n);
            }
        } else if kind < 0.3 {
            let centre = rng.random_range(3000.0..6000.0f64).min(0.45 * fs);
            let mut fric = Resonator::new();
            let seg: Vec<f64> = (0..len / 2)
                .map(|_| fric.step(rng.sample(StandardNormal), centre, 1500.0, fs))
                .collect();
            let level = rng.random_range(0.01..0.04);
            out.extend(shape(seg, level, 8));
        } else {
            let target = VOWELS[rng.random_range(0..VOWELS.len())];
            let f0_start = base_f0 * rng.random_range(0.85..1.15);
            let f0_end = base_f0 * rng.random_range(0.8..1.1);
            let mut res = [Resonator::new(); 3];
            let mut seg = Vec::with_capacity(len);
            for i in 0..len {
                let t = i as f64 / len as f64;
                let glide = (t * 4.0).min(1.0);
                phase += (f0_start + (f0_end - f0_start) * t) / fs;
                let mut x = 0.0;
                if phase >= 1.0 {
                    phase -= 1.0;
                    x = 1.0;
                }
                let aspiration: f64 = rng.sample(StandardNormal);
                x += 0.01 * aspiration;
                let mut y = 0.0;
                for (k, r) in res.iter_mut().enumerate() {
                    let f = (formant_scale * (prev[k] + (target[k] - prev[k]) * glide)).min(0.45 * fs);
                    y += FORMANT_GAINS[k] * r.step(x, f, BANDWIDTHS[k], fs);
                }
                seg.push(y);
            }
            let level = rng.random_range(0.05..0.15);
            out.extend(shape(seg, level, 6));
            prev = target;
        }
    }
    out.truncate(total);

    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    AudioBuffer::new(out, sample_rate)
}

/// Gaussian white noise with the given standard deviation.
pub fn white_noise(seed: u64, len: usize, std_dev: f64, sample_rate: u32) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..len)
        .map(|_| std_dev * rng.sample::<f64, _>(StandardNormal))
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

/// Linear chirp `amp * sin(2 pi (f0 t + (f1 - f0) t^2 / (2 T)))`.
pub fn chirp(f0: f64, f1: f64, duration_secs: f64, amp: f64, sample_rate: u32) -> AudioBuffer {
    let fs = sample_rate as f64;
    let n = (duration_secs * fs).round() as usize;
    let k = (f1 - f0) / duration_secs;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            amp * (2.0 * PI * (f0 * t + 0.5 * k * t * t)).sin()
        })
        .collect();
    AudioBuffer::new(samples, sample_rate)
}
