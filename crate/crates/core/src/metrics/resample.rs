//! Rational-ratio polyphase resampler with a Blackman-windowed sinc kernel.

/// Input samples on each side of the interpolation point.
pub const HALF_TAPS: usize = 32;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let p = std::f64::consts::PI * x;
        p.sin() / p
    }
}

fn blackman(tau: f64) -> f64 {
    let h = HALF_TAPS as f64;
    if tau.abs() >= h {
        return 0.0;
    }
    let a = std::f64::consts::PI * tau / h;
    0.42 + 0.5 * a.cos() + 0.08 * (2.0 * a).cos()
}

/// Resamples `x` from `from_hz` to `to_hz`. Output length is
/// `ceil(len * to / from)`; samples outside the input are taken as zero.
pub fn resample(x: &[f64], from_hz: u32, to_hz: u32) -> Vec<f64> {
    assert!(from_hz > 0 && to_hz > 0, "sample rates must be positive");
    if from_hz == to_hz {
        return x.to_vec();
    }
    let g = gcd(from_hz, to_hz);
    let (up, down) = ((to_hz / g) as usize, (from_hz / g) as usize);
    let cutoff = (to_hz as f64 / from_hz as f64).min(1.0);

    // One normalized kernel per output phase.
    let taps = 2 * HALF_TAPS;
    let phases: Vec<Vec<f64>> = (0..up)
        .map(|p| {
            let frac = ((p * down) % up) as f64 / up as f64;
            let mut h: Vec<f64> = (0..taps)
                .map(|j| {
                    let tau = frac + HALF_TAPS as f64 - 1.0 - j as f64;
                    cutoff * sinc(cutoff * tau) * blackman(tau)
                })
                .collect();
            let s: f64 = h.iter().sum();
            h.iter_mut().for_each(|v| *v /= s);
            h
        })
        .collect();

    let out_len = (x.len() * up).div_ceil(down);
    (0..out_len)
        .map(|n| {
            let base = (n * down / up) as isize;
            let h = &phases[n % up];
            let first = base - (HALF_TAPS as isize - 1);
            let mut acc = 0.0;
            for (j, &c) in h.iter().enumerate() {
                let k = first + j as isize;
                if k >= 0 && (k as usize) < x.len() {
                    acc += c * x[k as usize];
                }
            }
            acc
        })
        .collect()
}
