mod commands;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::{exit, Failure};

const THREADS_VAR: &str = "MELVQ_THREADS";

/// MFCC vector-quantization speech codec at 1000 and 2000 bit/s.
#[derive(Debug, Parser)]
#[command(name = "melvq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a codebook set from the WAV files listed in a manifest.
    Train(TrainArgs),
    /// Encode a 16 kHz WAV file into a bitstream.
    Encode(EncodeArgs),
    /// Decode a bitstream back to a WAV file.
    Decode(DecodeArgs),
    /// Compute quality metrics for a reference/degraded pair or a manifest of pairs.
    Eval(EvalArgs),
    /// Print a summary of a codebook, bitstream or MELSPEC file.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Text file listing one training WAV per line.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Target bit rate.
    #[arg(long, value_parser = ["1000", "2000"])]
    pub rate: String,
    /// Output codebook file.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Scalar energy quantizer width (defaults to the full stream field).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=24))]
    pub sq_bits: Option<u8>,
    /// Direct VQ width for the 1000 bit/s mode.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=24), conflicts_with = "stage_bits")]
    pub vq_bits: Option<u8>,
    /// MSVQ stage widths for the 2000 bit/s mode, e.g. `6,6`.
    #[arg(long, value_delimiter = ',')]
    pub stage_bits: Option<Vec<u8>>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    /// Require the codebook to be for this rate.
    #[arg(long, value_parser = ["1000", "2000"])]
    pub rate: Option<String>,
    /// Stage-one candidates kept by the MSVQ search.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    pub beam: u32,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    /// Griffin-Lim iterations.
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u32).range(1..))]
    pub gl_iters: u32,
    /// Also write the decoded log mel-spectrogram in MELSPEC format.
    #[arg(long)]
    pub emit_mel: Option<PathBuf>,
    /// Vocoder used to synthesize audio.
    #[arg(long, default_value = "griffin-lim")]
    pub vocoder: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference WAV (omit with --manifest).
    #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
    pub reference: Option<PathBuf>,
    /// Degraded WAV (omit with --manifest).
    #[arg(required_unless_present = "manifest")]
    pub degraded: Option<PathBuf>,
    /// Text file with one `reference degraded` pair per line.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub file: PathBuf,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot configure worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Encode(a) => commands::encode(&a),
        Command::Decode(a) => commands::decode(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Inspect(a) => commands::inspect(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("melvq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
