use std::path::{Path, PathBuf};

use rayon::prelude::*;

use melvq_core::analysis::{FeatureExtractor, FrameConfig};
use melvq_core::bitstream::{self, payload_bitrate_exact};
use melvq_core::codebook_file::{self, load_codebooks, load_codebooks_for};
use melvq_core::codec::encode_with;
use melvq_core::manifest::{read_manifest, read_pair_manifest};
use melvq_core::metrics::{evaluate, report_lines, QualityReport};
use melvq_core::quantizer::{RateMode, SpectralCodebook};
use melvq_core::signal_io::{read_wav, wav_bytes};
use melvq_core::synthesis::{self, decode_mel, melspec_bytes};
use melvq_core::{AudioBuffer, BitAllocation, Error, SchemeRegistry, TrainingCorpus, VocoderOptions, VocoderRegistry};

use crate::failure::Failure;
use crate::output::{write_one, Staged};
use crate::{DecodeArgs, EncodeArgs, EvalArgs, InspectArgs, TrainArgs};

fn parse_rate(rate: &str) -> RateMode {
    let bps = rate.parse().expect("validated by the argument parser");
    RateMode::from_bits_per_second(bps).expect("validated by the argument parser")
}

fn extractor() -> Result<FeatureExtractor, Failure> {
    Ok(FeatureExtractor::new(FrameConfig::default())?)
}

fn allocation(args: &TrainArgs, mode: RateMode) -> Result<BitAllocation, Failure> {
    let mut alloc = BitAllocation::table(mode);
    if let Some(b) = args.sq_bits {
        alloc.sq_bits = b;
    }
    match (mode, args.vq_bits, &args.stage_bits) {
        (RateMode::R1000, Some(b), _) => alloc.spectral_bits = vec![b],
        (RateMode::R2000, _, Some(bits)) => alloc.spectral_bits = bits.clone(),
        (RateMode::R1000, _, Some(_)) => return Err(Failure::Usage("--stage-bits applies to --rate 2000".into())),
        (RateMode::R2000, Some(_), _) => return Err(Failure::Usage("--vq-bits applies to --rate 1000".into())),
        _ => {}
    }
    alloc.validate(mode)?;
    Ok(alloc)
}

pub fn train(args: &TrainArgs) -> Result<(), Failure> {
    let mode = parse_rate(&args.rate);
    let alloc = allocation(args, mode)?;
    let files = read_manifest(&args.manifest)?;
    if files.is_empty() {
        return Err(Error::InsufficientData(format!("manifest {} lists no files", args.manifest.display())).into());
    }
    let utterances: Vec<(String, AudioBuffer)> = files
        .par_iter()
        .map(|p| Ok((p.display().to_string(), read_wav(p)?)))
        .collect::<Result<_, Error>>()?;
    let corpus = TrainingCorpus::from_audio(&extractor()?, &utterances)?;
    let scheme = SchemeRegistry::with_defaults().for_mode(mode)?;
    let trained = scheme.train(&corpus, &alloc)?;
    write_one(&args.out, &codebook_file::to_bytes(&trained.set))?;

    println!("files: {}", files.len());
    println!("training frames: {}", corpus.len());
    for (name, report) in &trained.reports {
        println!(
            "{name}: {} distortion passes, initial {:.6}, final {:.6}",
            report.iterations,
            report.distortions.first().copied().unwrap_or(0.0),
            report.final_distortion
        );
    }
    println!("codebook hash: {:016x}", trained.set.content_hash());
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn encode(args: &EncodeArgs) -> Result<(), Failure> {
    let set = match &args.rate {
        Some(r) => load_codebooks_for(&args.codebook, parse_rate(r))?,
        None => load_codebooks(&args.codebook)?,
    };
    let ex = extractor()?;
    let audio = read_wav(&args.input)?;
    let out = encode_with(&ex, &audio, &set, args.beam as usize)?;
    write_one(&args.output, &out.stream.to_bytes())?;

    let mode = set.mode();
    let rate = payload_bitrate_exact(mode.bits_per_frame(), ex.config())
        .map(|r| r.to_string())
        .unwrap_or_else(|| format!("{:.3}", bitstream::stream_bitrate(&out.stream, ex.config())));
    println!("frames: {}", out.stream.header.frame_count);
    println!("bits per frame: {}", mode.bits_per_frame());
    println!("payload bitrate: {rate} bit/s");
    println!("wrote {}", args.output.display());
    Ok(())
}

pub fn decode(args: &DecodeArgs) -> Result<(), Failure> {
    let bytes = std::fs::read(&args.input).map_err(Failure::read(&args.input))?;
    let stream = bitstream::parse(&bytes)?;
    let set = load_codebooks(&args.codebook)?;
    let options = VocoderOptions {
        gl_iterations: args.gl_iters as usize,
    };
    let vocoder = VocoderRegistry::with_defaults().create(&args.vocoder, &options)?;
    let mel = decode_mel(&stream, &set, &FrameConfig::default())?;
    let audio = vocoder.synthesize(&mel)?;

    let mut staged = Staged::new();
    staged.add(&args.output, &wav_bytes(&audio)?)?;
    if let Some(path) = &args.emit_mel {
        staged.add(path, &melspec_bytes(&mel)?)?;
    }
    staged.commit()?;

    println!("frames: {}", mel.num_frames);
    println!("samples: {}", audio.len());
    println!("vocoder: {}", vocoder.name());
    println!("wrote {}", args.output.display());
    if let Some(path) = &args.emit_mel {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn evaluate_pair(ex: &FeatureExtractor, reference: &Path, degraded: &Path) -> Result<QualityReport, Error> {
    let r = read_wav(reference)?;
    let d = read_wav(degraded)?;
    evaluate(&degraded.display().to_string(), &r, &d, ex)
}

pub fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let ex = extractor()?;
    let text = match &args.manifest {
        Some(manifest) => {
            let pairs: Vec<(PathBuf, PathBuf)> = read_pair_manifest(manifest)?;
            if pairs.is_empty() {
                return Err(Failure::Usage(format!("manifest {} lists no pairs", manifest.display())));
            }
            let reports = pairs
                .par_iter()
                .map(|(r, d)| evaluate_pair(&ex, r, d))
                .collect::<Result<Vec<_>, Error>>()?;
            report_lines(&reports)
        }
        None => {
            let (Some(r), Some(d)) = (&args.reference, &args.degraded) else {
                return Err(Failure::Usage("eval needs REFERENCE and DEGRADED, or --manifest".into()));
            };
            let mut line = evaluate_pair(&ex, r, d)?.to_json_line();
            line.push('\n');
            line
        }
    };
    match &args.report {
        Some(path) => write_one(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn inspect(args: &InspectArgs) -> Result<(), Failure> {
    let bytes = std::fs::read(&args.file).map_err(Failure::read(&args.file))?;
    let magic = bytes.get(..4).unwrap_or_default();
    if magic == codebook_file::MAGIC {
        let set = codebook_file::from_bytes(&bytes)?;
        println!("codebook set, mode {} bit/s", set.mode().bits_per_second());
        println!("scalar levels: {} ({} bits)", set.scalar().len(), set.scalar().bits());
        let kind = match set.spectral() {
            SpectralCodebook::Direct(_) => "direct VQ",
            SpectralCodebook::Multistage(_) => "two-stage MSVQ",
        };
        let stages: Vec<String> = set.spectral().stages().iter().map(|s| format!("{} x {}", s.len(), s.dim())).collect();
        println!("spectral: {kind}, {}", stages.join(" + "));
        println!("content hash: {:016x}", set.content_hash());
    } else if magic == bitstream::MAGIC {
        let stream = bitstream::parse(&bytes)?;
        let cfg = FrameConfig::default();
        let frames = stream.header.frame_count as usize;
        println!("bitstream, mode {} bit/s", stream.header.mode.bits_per_second());
        println!("frames: {frames}");
        println!("duration: {:.3} s", frames as f64 / cfg.frame_rate());
        println!("payload bits: {}", stream.payload_bits());
        println!("codebook hash: {:016x}", stream.header.codebook_hash);
    } else if magic == synthesis::MELSPEC_MAGIC {
        let mel = synthesis::parse_melspec(&bytes)?;
        let c = mel.config;
        println!("mel-spectrogram");
        println!("frames: {}", mel.num_frames);
        println!("mel channels: {}", c.num_mel);
        println!("sample rate: {} Hz, frame length {}, hop {}", c.sample_rate, c.frame_len, c.frame_shift);
    } else {
        return Err(Failure::Usage(format!(
            "{} is not a codebook, bitstream or MELSPEC file",
            args.file.display()
        )));
    }
    Ok(())
}
