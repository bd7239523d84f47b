//! Waveform generators that turn a log mel-spectrogram into audio,
//! selectable by name.

use std::collections::BTreeMap;

use crate::analysis::{build_mel_filterbank, MelSpectrogram};
use crate::error::{Error, Result};
use crate::signal_io::AudioBuffer;
use crate::synthesis::{finalize_audio, griffin_lim, MelInverse, DEFAULT_GL_ITERATIONS};

pub trait Vocoder: Send + Sync {
    fn name(&self) -> &str;

    /// Produces audio of `(M - 1) * R + L` samples, clamped to `[-1, 1]`.
    fn synthesize(&self, mel: &MelSpectrogram) -> Result<AudioBuffer>;
}

/// Pseudo-inverse mel inversion followed by Griffin-Lim.
#[derive(Debug, Clone)]
pub struct GriffinLimVocoder {
    iterations: usize,
}

impl GriffinLimVocoder {
    pub const NAME: &'static str = "griffin-lim";

    pub fn new(iterations: usize) -> Self {
        Self { iterations }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

impl Default for GriffinLimVocoder {
    fn default() -> Self {
        Self::new(DEFAULT_GL_ITERATIONS)
    }
}

impl Vocoder for GriffinLimVocoder {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn synthesize(&self, mel: &MelSpectrogram) -> Result<AudioBuffer> {
        if mel.num_frames == 0 {
            return Err(Error::EmptySignal);
        }
        let fb = build_mel_filterbank(&mel.config)?;
        let mag = MelInverse::new(&fb)?.apply(mel)?;
        finalize_audio(griffin_lim(&mag, self.iterations)?.audio)
    }
}

/// Construction parameters shared by all vocoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocoderOptions {
    pub gl_iterations: usize,
}

impl Default for VocoderOptions {
    fn default() -> Self {
        Self {
            gl_iterations: DEFAULT_GL_ITERATIONS,
        }
    }
}

pub type VocoderFactory = fn(&VocoderOptions) -> Box<dyn Vocoder>;

#[derive(Clone)]
pub struct VocoderRegistry {
    factories: BTreeMap<String, VocoderFactory>,
}

impl std::fmt::Debug for VocoderRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl VocoderRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(GriffinLimVocoder::NAME, |o| Box::new(GriffinLimVocoder::new(o.gl_iterations)));
        r
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: &str, factory: VocoderFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, name: &str, options: &VocoderOptions) -> Result<Box<dyn Vocoder>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: "vocoder",
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        Ok(factory(options))
    }
}

impl Default for VocoderRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
