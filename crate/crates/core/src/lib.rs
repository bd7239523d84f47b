//! Low-bit-rate speech coding by vector quantization of mel-frequency
//! cepstra.
//!
//! The transmitter frames 16 kHz audio, computes 80 MFCCs per 16 ms hop and
//! quantizes each frame into 16 bits (1000 bit/s: scalar energy + VQ) or
//! 32 bits (2000 bit/s: scalar energy + two-stage MSVQ). The receiver
//! inverts the quantized cepstra to a log mel-spectrogram and reconstructs
//! audio with Griffin-Lim, or exports the mel-spectrogram for an external
//! vocoder.

pub mod analysis;
pub mod bitstream;
pub mod codebook_file;
pub mod codec;
pub mod error;
pub mod fft;
pub mod manifest;
pub mod metrics;
pub mod quantizer;
pub mod scheme;
pub mod signal_io;
pub mod synthesis;
pub mod testsignal;
pub mod trainer;
pub mod vocoder;

pub use analysis::{FeatureExtractor, Features, FrameConfig, MelSpectrogram, MfccMatrix};
pub use bitstream::EncodedStream;
pub use codebook_file::{load_codebooks, load_codebooks_for, save_codebooks};
pub use error::{Error, Result};
pub use quantizer::{CodebookSet, FrameCode, RateMode};
pub use scheme::{BitAllocation, RateScheme, SchemeRegistry};
pub use signal_io::{read_wav, write_wav, AudioBuffer};
pub use synthesis::MagnitudeSpectrogram;
pub use trainer::{TrainReport, TrainingCorpus};
pub use vocoder::{Vocoder, VocoderOptions, VocoderRegistry};
