//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary. The process exits non-zero on a failed criterion
//! only when `ACCEPTANCE_STRICT=1`, so the regular test run reports every
//! line without stopping at the first failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use melvq_core::analysis::{frame_signal, hamming, Dct, FrameConfig};
use melvq_core::bitstream::{self, payload_bitrate_exact};
use melvq_core::codebook_file;
use melvq_core::codec::{encode_with, resynthesize};
use melvq_core::metrics::{evaluate, mean_report, report_lines, seg_snr, stoi, QualityReport};
use melvq_core::quantizer::*;
use melvq_core::scheme::{BitAllocation, SchemeRegistry};
use melvq_core::signal_io::{read_wav, wav_bytes, write_wav};
use melvq_core::synthesis::{decode_stream, griffin_lim, overlap_add, MagnitudeSpectrogram};
use melvq_core::testsignal::{chirp, synthetic_speech, white_noise};
use melvq_core::trainer::{train_lbg, train_msvq, train_scalar, TrainReport};
use melvq_core::vocoder::GriffinLimVocoder;
use melvq_core::{AudioBuffer, FeatureExtractor, TrainingCorpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GL_ITERATIONS: usize = 60;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

// ---------------------------------------------------------------- 1

/// Full-size codebooks built from jittered analysis frames. Encoding
/// cost depends only on their size, not on how they were designed.
fn full_size_sets(ex: &FeatureExtractor) -> [CodebookSet; 2] {
    let rows: Vec<Vec<f64>> = (0..4)
        .flat_map(|s| ex.mfcc(&synthetic_speech(500 + s, 10.0, 16_000)).unwrap().values)
        .collect::<Vec<f64>>()
        .chunks_exact(80)
        .map(|r| r[1..].to_vec())
        .collect();
    let mut r = rng(1);
    let mut book = |bits: u8, residual: bool| {
        let flat: Vec<f64> = (0..1usize << bits)
            .flat_map(|_| {
                let row = &rows[r.random_range(0..rows.len())];
                row.iter()
                    .map(|&v| {
                        let j: f64 = r.random_range(-0.3..0.3);
                        if residual { j * v.abs().max(0.1) } else { v + j }
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        VectorCodebook::new(79, bits, flat).unwrap()
    };
    let direct = book(12, false);
    let stage1 = book(13, false);
    let stage2 = book(13, true);
    let levels = |n: usize| ScalarCodebook::new((0..n).map(|i| -40.0 + 45.0 * i as f64 / n as f64).collect()).unwrap();
    [
        CodebookSet::new(RateMode::R1000, levels(16), SpectralCodebook::Direct(direct)).unwrap(),
        CodebookSet::new(RateMode::R2000, levels(64), SpectralCodebook::Multistage(MsvqCodebook::new(stage1, stage2).unwrap()))
            .unwrap(),
    ]
}

fn rate_exactness() -> Outcome {
    let ex = common::extractor();
    let cfg = *ex.config();
    let sets = full_size_sets(&ex);
    let dir = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut timings = Vec::new();

    let ten = synthetic_speech(42, 10.0, 16_000);
    let path = dir.path().join("ten.wav");
    write_wav(&path, &ten).unwrap();
    for set in &sets {
        let mode = set.mode();
        let rate = payload_bitrate_exact(mode.bits_per_frame(), &cfg);
        if rate != Some(u64::from(mode.bits_per_second())) {
            problems.push(format!("{mode}: nominal rate {rate:?}"));
        }
        let elapsed = pool(1).install(|| {
            let t = Instant::now();
            let audio = read_wav(&path).unwrap();
            let stream = encode_with(&ex, &audio, set, DEFAULT_BEAM_WIDTH).unwrap().stream;
            let bytes = stream.to_bytes();
            let elapsed = t.elapsed();
            let frames = u64::from(stream.header.frame_count);
            // bits * f_s == rate * samples covered, in integers
            if frames != 625 || stream.payload_bits() * 16_000 != u64::from(mode.bits_per_second()) * frames * 256 {
                problems.push(format!("{mode}: {frames} frames, {} bits", stream.payload_bits()));
            }
            if bytes.len() != bitstream::HEADER_LEN + (stream.payload_bits() as usize).div_ceil(8) {
                problems.push(format!("{mode}: {} stream bytes", bytes.len()));
            }
            elapsed
        });
        if elapsed >= Duration::from_secs(1) {
            problems.push(format!("{mode}: 10 s encode took {elapsed:?}"));
        }
        timings.push(format!("{mode} {:.0} ms", elapsed.as_secs_f64() * 1e3));
    }

    let mut r = rng(2);
    for trial in 0..40 {
        let len = r.random_range(1..40_000usize);
        let audio = white_noise(trial, len, 0.1, 16_000);
        for set in &sets {
            let stream = encode_with(&ex, &audio, set, 2).unwrap().stream;
            let frames = u64::from(stream.header.frame_count);
            let bps = u64::from(set.mode().bits_per_second());
            if frames != len.div_ceil(256) as u64 || stream.payload_bits() * 16_000 != bps * frames * 256 {
                problems.push(format!("{}: len {len} gave {frames} frames", set.mode()));
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("1000 and 2000 bit/s exact on 10 s file and 40 random lengths; 10 s encode {}", timings.join(", "))
        } else {
            problems.join("; ")
        },
    )
}

// ---------------------------------------------------------------- 2

fn random_codes(r: &mut ChaCha8Rng, mode: RateMode) -> Vec<FrameCode> {
    let n = r.random_range(0..48);
    (0..n)
        .map(|_| {
            let sq = r.random_range(0..1u32 << mode.scalar_field_bits());
            let vq = mode.spectral_field_bits().iter().map(|&b| r.random_range(0..1u32 << b)).collect();
            FrameCode::new(sq, vq)
        })
        .collect()
}

fn bitstream_roundtrip() -> Outcome {
    let mut r = rng(3);
    let mut mismatches = 0;
    let per_mode = 10_000;
    for mode in [RateMode::R1000, RateMode::R2000] {
        for _ in 0..per_mode {
            let codes = random_codes(&mut r, mode);
            let hash: u64 = r.random();
            let bytes = bitstream::pack(&codes, mode, hash).unwrap().to_bytes();
            match bitstream::unpack(&bytes) {
                Ok((m, h, back)) if m == mode && h == hash && back == codes => {}
                _ => mismatches += 1,
            }
        }
    }
    outcome(mismatches == 0, format!("{} sequences per mode, {mismatches} mismatches", per_mode))
}

// ---------------------------------------------------------------- 3

fn exhaustive(x: &[f64], cb: &VectorCodebook) -> u32 {
    let mut best = (0, f64::INFINITY);
    for (j, c) in cb.codewords().enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (j as u32, d);
        }
    }
    best.0
}

fn exhaustive_joint(x: &[f64], cb: &MsvqCodebook) -> [u32; 2] {
    let [a, b] = cb.stages();
    let mut best = ([0, 0], f64::INFINITY);
    for i in 0..a.len() {
        let res: Vec<f64> = x.iter().zip(a.codeword(i)).map(|(p, q)| p - q).collect();
        for j in 0..b.len() {
            let d = squared_distance(&res, b.codeword(j));
            if d < best.1 {
                best = ([i as u32, j as u32], d);
            }
        }
    }
    best.0
}

fn random_book(r: &mut ChaCha8Rng, dim: usize, bits: u8) -> VectorCodebook {
    let flat = (0..(1usize << bits) * dim).map(|_| r.random_range(-2.0..2.0)).collect();
    VectorCodebook::new(dim, bits, flat).unwrap()
}

fn quantizer_oracle() -> Outcome {
    let mut r = rng(4);
    let (mut vq_bad, mut ms_bad) = (0, 0);
    let books = 24;
    for b in 0..books {
        let dim = [1, 3, 8, 13, 79][b % 5];
        let bits = r.random_range(1..=9);
        let cb = random_book(&mut r, dim, bits);
        let xs: Vec<f64> = (0..1000 * dim).map(|_| r.random_range(-3.0..3.0)).collect();
        let batch = vq_search_batch(&xs, &cb).unwrap();
        for (x, (bi, _)) in xs.chunks_exact(dim).zip(batch) {
            let want = exhaustive(x, &cb);
            if vq_encode(x, &cb).unwrap() != want || bi != want {
                vq_bad += 1;
            }
        }
    }
    let toys = 200;
    for t in 0..toys {
        let dim = 1 + t % 6;
        let cb = MsvqCodebook::new(random_book(&mut r, dim, 2), random_book(&mut r, dim, 2)).unwrap();
        let xs: Vec<f64> = (0..100 * dim).map(|_| r.random_range(-3.0..3.0)).collect();
        let batch = msvq_search_batch(&xs, &cb, 4).unwrap();
        for (x, (bp, _)) in xs.chunks_exact(dim).zip(batch) {
            let want = exhaustive_joint(x, &cb);
            if msvq_encode(x, &cb, 4).unwrap() != want || bp != want {
                ms_bad += 1;
            }
        }
    }
    outcome(
        vq_bad == 0 && ms_bad == 0,
        format!("VQ: {books} codebooks x 1000 inputs, {vq_bad} mismatches; MSVQ 4x4 full beam: {toys} toys x 100 inputs, {ms_bad} mismatches"),
    )
}

// ---------------------------------------------------------------- 4

fn lloyd_monotonicity() -> Outcome {
    let mut r = rng(5);
    let mut reports: Vec<TrainReport> = Vec::new();
    for _ in 0..40 {
        let n = r.random_range(64..600);
        let xs: Vec<f64> = (0..n).map(|_| r.random_range(-30.0..5.0f64).powi(3) / 100.0).collect();
        reports.push(train_scalar(&xs, r.random_range(1..=6)).unwrap().1);
    }
    for _ in 0..40 {
        let dim = r.random_range(1..12);
        let bits = r.random_range(1..=6);
        let n = r.random_range(1usize << bits..800);
        let xs: Vec<f64> = (0..n * dim).map(|_| r.random_range(-1.0..1.0)).collect();
        reports.push(train_lbg(&xs, dim, bits).unwrap().1);
    }
    for _ in 0..10 {
        let xs: Vec<f64> = (0..400 * 5).map(|_| r.random_range(-1.0..1.0)).collect();
        reports.extend(train_msvq(&xs, 5, [4, 4]).unwrap().1);
    }
    let corpus = common::corpus(300, 8, 3.0);
    for mode in [RateMode::R1000, RateMode::R2000] {
        let trained = common::train(&corpus, mode, &common::desk_allocation(mode));
        reports.extend(trained.reports.into_iter().map(|(_, rep)| rep));
    }
    let bad = reports.iter().filter(|rep| !rep.is_non_increasing()).count();

    let corners = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    let (cb, rep) = train_lbg(&corners, 2, 2).unwrap();
    let mut words: Vec<Vec<f64>> = cb.codewords().map(<[f64]>::to_vec).collect();
    words.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let toy_ok = rep.final_distortion == 0.0
        && rep.is_non_increasing()
        && words == [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    outcome(
        bad == 0 && toy_ok,
        format!(
            "{} training runs, {bad} with a rising step; 4-corner toy final distortion {}",
            reports.len(),
            rep.final_distortion
        ),
    )
}

// ---------------------------------------------------------------- 5

fn analysis_synthesis_roundtrips() -> Outcome {
    let mut r = rng(6);
    let dct = Dct::new(80);
    let mut dct_err: f64 = 0.0;
    for _ in 0..1000 {
        let y: Vec<f64> = (0..80).map(|_| r.random_range(-11.6..3.0)).collect();
        let back = dct.inverse(&dct.forward(&y));
        dct_err = back.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(dct_err, f64::max);
    }

    let cfg = FrameConfig::default();
    let window = hamming(cfg.frame_len);
    let mut ola_err: f64 = 0.0;
    for seed in 0..10 {
        let len = r.random_range(3 * cfg.frame_len..40_000);
        let audio = if seed % 2 == 0 { white_noise(seed, len, 0.3, 16_000) } else { synthetic_speech(seed, len as f64 / 16_000.0, 16_000) };
        let frames = frame_signal(&audio, &cfg).unwrap();
        let out = overlap_add(&frames.frames, &window, cfg.frame_shift).unwrap();
        let (lo, hi) = (cfg.frame_len, audio.len() - cfg.frame_len);
        let num: f64 = (lo..hi).map(|i| (out[i] - audio.samples[i]).powi(2)).sum();
        let den: f64 = (lo..hi).map(|i| audio.samples[i].powi(2)).sum();
        ola_err = ola_err.max((num / den).sqrt());
    }

    let ex = common::extractor();
    let tone = AudioBuffer::new(
        (0..16_000).map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16_000.0).sin()).collect(),
        16_000,
    );
    let fb = ex.filterbank();
    let nearest = (0..cfg.num_mel)
        .min_by(|&a, &b| (fb.center_hz(a) - 1000.0).abs().total_cmp(&(fb.center_hz(b) - 1000.0).abs()))
        .unwrap();
    let mel = ex.analyze(&tone).unwrap().mel;
    let tone_ok = mel.rows().all(|row| {
        let arg = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        arg == nearest
    });
    outcome(
        dct_err <= 1e-9 && ola_err <= 1e-6 && tone_ok,
        format!(
            "DCT/IDCT max error {dct_err:.2e}, OLA max relative error {ola_err:.2e}, 1 kHz tone peak in band {nearest} ({:.1} Hz): {}",
            fb.center_hz(nearest),
            if tone_ok { "every frame" } else { "not every frame" }
        ),
    )
}

// ---------------------------------------------------------------- 6

fn griffin_lim_criterion() -> Outcome {
    let ex = common::extractor();
    let cfg = *ex.config();
    let mut inputs: Vec<MagnitudeSpectrogram> = [
        chirp(150.0, 1500.0, 2.0, 0.5, 16_000),
        synthetic_speech(21, 2.0, 16_000),
        synthetic_speech(22, 2.0, 16_000),
        white_noise(23, 20_000, 0.1, 16_000),
    ]
    .iter()
    .map(|a| ex.analyze(a).unwrap().magnitude)
    .collect();
    let mut r = rng(7);
    for _ in 0..4 {
        let frames = r.random_range(2..20);
        inputs.push(MagnitudeSpectrogram {
            values: (0..frames * cfg.num_bins()).map(|_| r.random_range(0.0..5.0)).collect(),
            num_frames: frames,
            config: cfg,
        });
    }
    let rising = inputs
        .iter()
        .filter(|mag| {
            let c = griffin_lim(mag, GL_ITERATIONS).unwrap().consistency;
            !c.windows(2).all(|w| w[1] <= w[0])
        })
        .count();

    let original = chirp(150.0, 1500.0, 2.0, 0.5, 16_000);
    let mag = ex.analyze(&original).unwrap().magnitude;
    let out = griffin_lim(&mag, GL_ITERATIONS).unwrap().audio;
    let out = AudioBuffer::new(out.samples[..original.len()].to_vec(), 16_000);
    let snr = seg_snr(&original, &out, 256).unwrap();
    let flipped = AudioBuffer::new(out.samples.iter().map(|v| -v).collect(), 16_000);
    let snr_flipped = seg_snr(&original, &flipped, 256).unwrap();
    outcome(
        rising == 0 && snr > 5.0,
        format!(
            "consistency non-increasing on {}/{} inputs over {GL_ITERATIONS} iterations; \
             chirp reconstruction segSNR {snr:.2} dB (sign-flipped {snr_flipped:.2} dB), required > 5 dB",
            inputs.len() - rising,
            inputs.len()
        ),
    )
}

// ---------------------------------------------------------------- 7

fn end_to_end_ordering() -> Outcome {
    let start = Instant::now();
    let ex = common::extractor();
    let corpus = common::corpus(1000, 40, 4.0);
    let allocs = [
        (RateMode::R1000, BitAllocation { sq_bits: 4, spectral_bits: vec![8] }),
        (RateMode::R2000, BitAllocation { sq_bits: 6, spectral_bits: vec![8, 8] }),
    ];
    let sets: Vec<CodebookSet> = allocs.iter().map(|(mode, alloc)| common::train(&corpus, *mode, alloc).set).collect();
    let held_out = common::utterances(0, 20, 3.0);
    let vocoder = GriffinLimVocoder::new(GL_ITERATIONS);
    let mut mcd = [0.0; 3];
    for (id, audio) in &held_out {
        let plain = resynthesize(&ex, audio, &vocoder).unwrap();
        mcd[0] += evaluate(id, audio, &plain, &ex).unwrap().mcd_db;
        for (k, set) in sets.iter().enumerate() {
            let stream = encode_with(&ex, audio, set, DEFAULT_BEAM_WIDTH).unwrap().stream;
            let decoded = decode_stream(&stream, set, GL_ITERATIONS).unwrap();
            mcd[k + 1] += evaluate(id, audio, &decoded, &ex).unwrap().mcd_db;
        }
    }
    let n = held_out.len() as f64;
    let [gla, r1000, r2000] = mcd.map(|m| m / n);
    let elapsed = start.elapsed();
    outcome(
        gla <= r2000 && r2000 <= r1000 && elapsed < Duration::from_secs(300),
        format!(
            "{} held-out utterances, codebooks 4+8 / 6+8+8 bits: mean MCD unquantized {gla:.3} dB, \
             2000 bit/s {r2000:.3} dB, 1000 bit/s {r1000:.3} dB; {:.1} s",
            held_out.len(),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 8

fn stoi_self_test() -> Outcome {
    let mut worst_self: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    let mut noise = Vec::new();
    for seed in 0..4 {
        let x = synthetic_speech(seed, 3.0, 16_000);
        let s = stoi(&x, &x).unwrap();
        worst_self = worst_self.max((s - 1.0).abs());
        for g in [0.1, 0.5, 2.0] {
            let y = AudioBuffer::new(x.samples.iter().map(|v| v * g).collect(), 16_000);
            worst_scale = worst_scale.max((stoi(&x, &y).unwrap() - s).abs());
        }
        let n = white_noise(seed + 100, x.len(), 0.1, 16_000);
        noise.push(stoi(&x, &n).unwrap());
    }
    let listed: Vec<String> = noise.iter().map(|v| format!("{v:.3}")).collect();
    outcome(
        worst_self <= 1e-6 && worst_scale <= 1e-6 && noise.iter().all(|&v| v < 0.3),
        format!(
            "|stoi(x,x)-1| <= {worst_self:.1e}, scale deviation <= {worst_scale:.1e}, speech/noise pairs [{}], required < 0.3",
            listed.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 9

#[derive(PartialEq)]
struct RunArtifacts {
    codebooks: Vec<Vec<u8>>,
    streams: Vec<Vec<u8>>,
    audio: Vec<Vec<u8>>,
    report: String,
}

fn full_run() -> RunArtifacts {
    let ex = common::extractor();
    let train_set = common::utterances(2000, 8, 3.0);
    let corpus = TrainingCorpus::from_audio(&ex, &train_set).unwrap();
    let registry = SchemeRegistry::with_defaults();
    let held_out = common::utterances(2100, 3, 2.0);
    let mut art = RunArtifacts {
        codebooks: Vec::new(),
        streams: Vec::new(),
        audio: Vec::new(),
        report: String::new(),
    };
    let mut reports: Vec<QualityReport> = Vec::new();
    for mode in [RateMode::R1000, RateMode::R2000] {
        let set = registry.for_mode(mode).unwrap().train(&corpus, &common::desk_allocation(mode)).unwrap().set;
        art.codebooks.push(codebook_file::to_bytes(&set));
        for (id, audio) in &held_out {
            let stream = encode_with(&ex, audio, &set, DEFAULT_BEAM_WIDTH).unwrap().stream;
            art.streams.push(stream.to_bytes());
            let decoded = decode_stream(&stream, &set, 20).unwrap();
            art.audio.push(wav_bytes(&decoded).unwrap());
            reports.push(evaluate(&format!("{mode}/{id}"), audio, &decoded, &ex).unwrap());
        }
    }
    art.report = report_lines(&reports);
    assert!(mean_report(&reports).is_some());
    art
}

fn determinism() -> Outcome {
    let runs: Vec<(usize, RunArtifacts)> = [1, 4, 1, 4].into_iter().map(|t| (t, pool(t).install(full_run))).collect();
    let reference = &runs[0].1;
    let differing: Vec<String> = runs[1..]
        .iter()
        .filter(|(_, a)| a != reference)
        .map(|(t, _)| format!("{t}-thread run"))
        .collect();
    let total_bytes: usize = reference.codebooks.iter().chain(&reference.streams).chain(&reference.audio).map(Vec::len).sum();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("4 runs with 1 and 4 threads: codebooks, streams, audio and reports bit-identical ({total_bytes} bytes compared)")
        } else {
            format!("differs from the first 1-thread run: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("rate exactness", rate_exactness),
        ("bitstream roundtrip", bitstream_roundtrip),
        ("quantizer oracle equivalence", quantizer_oracle),
        ("Lloyd/LBG monotonicity", lloyd_monotonicity),
        ("analysis/synthesis roundtrips", analysis_synthesis_roundtrips),
        ("Griffin-Lim", griffin_lim_criterion),
        ("end-to-end ordering", end_to_end_ordering),
        ("STOI self-test", stoi_self_test),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.1} s)",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
