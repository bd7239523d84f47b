//! Rate modes as pluggable training schemes.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quantizer::{CodebookSet, RateMode, SpectralCodebook};
use crate::trainer::{train_lbg, train_msvq, train_scalar, TrainReport, TrainingCorpus};

/// Codebook widths actually trained. Each must fit the mode's stream field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitAllocation {
    pub sq_bits: u8,
    pub spectral_bits: Vec<u8>,
}

impl BitAllocation {
    /// Full-size widths for a mode.
    pub fn table(mode: RateMode) -> Self {
        Self {
            sq_bits: mode.scalar_field_bits(),
            spectral_bits: mode.spectral_field_bits().to_vec(),
        }
    }

    pub fn validate(&self, mode: RateMode) -> Result<()> {
        let fields = mode.spectral_field_bits();
        if self.spectral_bits.len() != fields.len() {
            return Err(Error::Config(format!(
                "mode {mode} needs {} spectral stage width(s), got {}",
                fields.len(),
                self.spectral_bits.len()
            )));
        }
        let check = |what: &str, bits: u8, max: u8| {
            if bits == 0 || bits > max {
                Err(Error::Config(format!("{what} width {bits} must be in 1..={max} for mode {mode}")))
            } else {
                Ok(())
            }
        };
        check("scalar", self.sq_bits, mode.scalar_field_bits())?;
        for (&b, &f) in self.spectral_bits.iter().zip(fields) {
            check("spectral", b, f)?;
        }
        Ok(())
    }

    /// Training vectors needed for the largest codebook.
    pub fn min_vectors(&self) -> usize {
        self.spectral_bits
            .iter()
            .chain(std::iter::once(&self.sq_bits))
            .map(|&b| 1usize << b)
            .max()
            .unwrap_or(1)
    }
}

/// A trained set together with one report per trained codebook.
#[derive(Debug, Clone)]
pub struct TrainedCodebooks {
    pub set: CodebookSet,
    pub reports: Vec<(String, TrainReport)>,
}

pub trait RateScheme: Send + Sync {
    fn name(&self) -> &str;

    fn mode(&self) -> RateMode;

    fn table_allocation(&self) -> BitAllocation {
        BitAllocation::table(self.mode())
    }

    fn train(&self, corpus: &TrainingCorpus, alloc: &BitAllocation) -> Result<TrainedCodebooks>;
}

fn preflight(corpus: &TrainingCorpus, alloc: &BitAllocation, mode: RateMode) -> Result<()> {
    alloc.validate(mode)?;
    let need = alloc.min_vectors();
    if corpus.len() < need {
        return Err(Error::InsufficientData(format!(
            "{} training vectors, at least {need} required for mode {mode} with widths {}+{:?}",
            corpus.len(),
            alloc.sq_bits,
            alloc.spectral_bits
        )));
    }
    Ok(())
}

/// Scalar energy quantizer plus one direct VQ (1000 bit/s).
#[derive(Debug, Clone, Copy, Default)]
pub struct DirectVqScheme;

impl RateScheme for DirectVqScheme {
    fn name(&self) -> &str {
        "1000"
    }

    fn mode(&self) -> RateMode {
        RateMode::R1000
    }

    fn train(&self, corpus: &TrainingCorpus, alloc: &BitAllocation) -> Result<TrainedCodebooks> {
        preflight(corpus, alloc, self.mode())?;
        let (sq, sq_report) = train_scalar(&corpus.energy(), alloc.sq_bits)?;
        let (vq, vq_report) = train_lbg(&corpus.spectral(), corpus.dim - 1, alloc.spectral_bits[0])?;
        Ok(TrainedCodebooks {
            set: CodebookSet::new(self.mode(), sq, SpectralCodebook::Direct(vq))?,
            reports: vec![("scalar".into(), sq_report), ("vq".into(), vq_report)],
        })
    }
}

/// Scalar energy quantizer plus a two-stage MSVQ (2000 bit/s).
#[derive(Debug, Clone, Copy, Default)]
pub struct MsvqScheme;

impl RateScheme for MsvqScheme {
    fn name(&self) -> &str {
        "2000"
    }

    fn mode(&self) -> RateMode {
        RateMode::R2000
    }

    fn train(&self, corpus: &TrainingCorpus, alloc: &BitAllocation) -> Result<TrainedCodebooks> {
        preflight(corpus, alloc, self.mode())?;
        let (sq, sq_report) = train_scalar(&corpus.energy(), alloc.sq_bits)?;
        let bits = [alloc.spectral_bits[0], alloc.spectral_bits[1]];
        let (ms, [r1, r2]) = train_msvq(&corpus.spectral(), corpus.dim - 1, bits)?;
        Ok(TrainedCodebooks {
            set: CodebookSet::new(self.mode(), sq, SpectralCodebook::Multistage(ms))?,
            reports: vec![
                ("scalar".into(), sq_report),
                ("msvq stage 1".into(), r1),
                ("msvq stage 2".into(), r2),
            ],
        })
    }
}

#[derive(Clone)]
pub struct SchemeRegistry {
    schemes: BTreeMap<String, Arc<dyn RateScheme>>,
}

impl std::fmt::Debug for SchemeRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.schemes.keys()).finish()
    }
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(DirectVqScheme));
        r.register(Arc::new(MsvqScheme));
        r
    }

    pub fn register(&mut self, scheme: Arc<dyn RateScheme>) {
        self.schemes.insert(scheme.name().to_string(), scheme);
    }

    pub fn names(&self) -> Vec<&str> {
        self.schemes.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn RateScheme>> {
        self.schemes.get(name).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: "rate scheme",
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    pub fn for_mode(&self, mode: RateMode) -> Result<Arc<dyn RateScheme>> {
        self.schemes
            .values()
            .find(|s| s.mode() == mode)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "rate scheme",
                name: mode.to_string(),
                available: self.names().join(", "),
            })
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
