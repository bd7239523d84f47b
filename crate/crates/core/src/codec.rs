//! Transmitter pipeline and convenience wrappers around the full chain.

use crate::analysis::{FeatureExtractor, Features, FrameConfig};
use crate::bitstream::{self, EncodedStream};
use crate::error::{Error, Result};
use crate::quantizer::{quantize_frames, CodebookSet, FrameCode};
use crate::signal_io::AudioBuffer;
use crate::vocoder::Vocoder;

/// Stream plus the analysis it was computed from.
#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub stream: EncodedStream,
    pub codes: Vec<FrameCode>,
    pub features: Features,
}

pub fn encode_with(
    extractor: &FeatureExtractor,
    audio: &AudioBuffer,
    set: &CodebookSet,
    beam_width: usize,
) -> Result<EncodeOutput> {
    audio.require_codec_rate()?;
    if audio.is_empty() {
        return Err(Error::EmptySignal);
    }
    if set.spectral_dim() + 1 != extractor.config().num_mel {
        return Err(Error::Shape(format!(
            "codebooks cover {} coefficients, analysis produces {}",
            set.spectral_dim() + 1,
            extractor.config().num_mel
        )));
    }
    let features = extractor.analyze(audio)?;
    let codes = quantize_frames(&features.mfcc.values, set, beam_width)?;
    let stream = bitstream::pack(&codes, set.mode(), set.content_hash())?;
    Ok(EncodeOutput {
        stream,
        codes,
        features,
    })
}

/// Encodes a 16 kHz signal with the default analysis configuration.
pub fn encode(audio: &AudioBuffer, set: &CodebookSet, beam_width: usize) -> Result<EncodedStream> {
    let extractor = FeatureExtractor::new(FrameConfig::default())?;
    Ok(encode_with(&extractor, audio, set, beam_width)?.stream)
}

/// Analysis followed directly by the vocoder, with no quantization.
pub fn resynthesize(extractor: &FeatureExtractor, audio: &AudioBuffer, vocoder: &dyn Vocoder) -> Result<AudioBuffer> {
    audio.require_codec_rate()?;
    let features = extractor.analyze(audio)?;
    vocoder.synthesize(&features.mel)
}
