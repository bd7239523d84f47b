use std::fmt;
use std::str::FromStr;

use crate::codebook_file;
use crate::error::{Error, Result};

/// The two bit-rate modes and their fixed per-frame field layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RateMode {
    R1000,
    R2000,
}

impl RateMode {
    pub const ALL: [RateMode; 2] = [RateMode::R1000, RateMode::R2000];

    /// Wire code used in both the stream and codebook headers.
    pub fn code(self) -> u8 {
        match self {
            RateMode::R1000 => 0,
            RateMode::R2000 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(RateMode::R1000),
            1 => Some(RateMode::R2000),
            _ => None,
        }
    }

    pub fn bits_per_second(self) -> u32 {
        match self {
            RateMode::R1000 => 1000,
            RateMode::R2000 => 2000,
        }
    }

    pub fn from_bits_per_second(bps: u32) -> Option<Self> {
        match bps {
            1000 => Some(RateMode::R1000),
            2000 => Some(RateMode::R2000),
            _ => None,
        }
    }

    /// Width of the energy (scalar) index field.
    pub fn scalar_field_bits(self) -> u8 {
        match self {
            RateMode::R1000 => 4,
            RateMode::R2000 => 6,
        }
    }

    /// Widths of the spectral index fields, in transmission order.
    pub fn spectral_field_bits(self) -> &'static [u8] {
        match self {
            RateMode::R1000 => &[12],
            RateMode::R2000 => &[13, 13],
        }
    }

    pub fn bits_per_frame(self) -> u32 {
        self.scalar_field_bits() as u32
            + self
                .spectral_field_bits()
                .iter()
                .map(|&b| b as u32)
                .sum::<u32>()
    }
}

impl fmt::Display for RateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits_per_second())
    }
}

impl FromStr for RateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<u32>()
            .ok()
            .and_then(RateMode::from_bits_per_second)
            .ok_or_else(|| Error::Config(format!("rate must be 1000 or 2000, got '{s}'")))
    }
}

/// Codebook values are stored at single precision, which is also what the
/// codebook file holds, so a trained set and its reloaded copy are identical.
fn to_stored(v: f64) -> f64 {
    v as f32 as f64
}

fn check_bits(bits: u8) -> Result<usize> {
    if bits == 0 || bits > 24 {
        return Err(Error::Config(format!("codebook bit width {bits} out of range 1..=24")));
    }
    Ok(1usize << bits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCodebook {
    levels: Vec<f64>,
    bits: u8,
}

impl ScalarCodebook {
    /// `levels` must hold exactly `2^bits` strictly increasing finite values.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        let n = levels.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "scalar codebook needs a power-of-two level count >= 2, got {n}"
            )));
        }
        let levels: Vec<f64> = levels.into_iter().map(to_stored).collect();
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite scalar level".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("scalar levels must be strictly increasing".into()));
        }
        Ok(Self {
            bits: n.trailing_zeros() as u8,
            levels,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// `2^bits` codewords of dimension `dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorCodebook {
    codewords: Vec<f64>,
    bits: u8,
    dim: usize,
}

impl VectorCodebook {
    pub fn new(dim: usize, bits: u8, codewords: Vec<f64>) -> Result<Self> {
        let size = check_bits(bits)?;
        if dim == 0 {
            return Err(Error::Config("codeword dimension must be positive".into()));
        }
        if codewords.len() != size * dim {
            return Err(Error::Shape(format!(
                "{} values do not form {size} codewords of dimension {dim}",
                codewords.len()
            )));
        }
        let codewords: Vec<f64> = codewords.into_iter().map(to_stored).collect();
        if codewords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite codeword entry".into()));
        }
        Ok(Self {
            codewords,
            bits,
            dim,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        let n = rows.len();
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::Config(format!("{n} codewords is not a power of two >= 2")));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("codewords of unequal dimension".into()));
        }
        Self::new(dim, n.trailing_zeros() as u8, rows.concat())
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        1 << self.bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn codeword(&self, index: usize) -> &[f64] {
        &self.codewords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn codewords(&self) -> impl Iterator<Item = &[f64]> {
        self.codewords.chunks(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.codewords
    }
}

/// Two cascaded codebooks; stage two quantizes the stage-one residual.
#[derive(Debug, Clone, PartialEq)]
pub struct MsvqCodebook {
    stages: [VectorCodebook; 2],
}

impl MsvqCodebook {
    pub fn new(first: VectorCodebook, second: VectorCodebook) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::Shape(format!(
                "stage dimensions differ: {} vs {}",
                first.dim(),
                second.dim()
            )));
        }
        Ok(Self {
            stages: [first, second],
        })
    }

    pub fn dim(&self) -> usize {
        self.stages[0].dim()
    }

    pub fn stages(&self) -> &[VectorCodebook; 2] {
        &self.stages
    }

    pub fn stage_bits(&self) -> [u8; 2] {
        [self.stages[0].bits(), self.stages[1].bits()]
    }
}

/// The spectral part of a codebook set: direct VQ or two-stage MSVQ.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralCodebook {
    Direct(VectorCodebook),
    Multistage(MsvqCodebook),
}

impl SpectralCodebook {
    pub fn dim(&self) -> usize {
        match self {
            SpectralCodebook::Direct(cb) => cb.dim(),
            SpectralCodebook::Multistage(cb) => cb.dim(),
        }
    }

    pub fn stage_bits(&self) -> Vec<u8> {
        match self {
            SpectralCodebook::Direct(cb) => vec![cb.bits()],
            SpectralCodebook::Multistage(cb) => cb.stage_bits().to_vec(),
        }
    }

    pub fn stages(&self) -> Vec<&VectorCodebook> {
        match self {
            SpectralCodebook::Direct(cb) => vec![cb],
            SpectralCodebook::Multistage(cb) => cb.stages().iter().collect(),
        }
    }
}

/// Everything needed to quantize frames in one rate mode.
///
/// Bit widths may be smaller than the mode's field widths (desk-scale
/// codebooks), but never larger. The content hash is the FNV-1a digest of the
/// serialized codebook file body.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    mode: RateMode,
    scalar: ScalarCodebook,
    spectral: SpectralCodebook,
    content_hash: u64,
}

impl CodebookSet {
    pub fn new(mode: RateMode, scalar: ScalarCodebook, spectral: SpectralCodebook) -> Result<Self> {
        match (&spectral, mode) {
            (SpectralCodebook::Direct(_), RateMode::R1000)
            | (SpectralCodebook::Multistage(_), RateMode::R2000) => {}
            _ => {
                return Err(Error::ModeMismatch {
                    expected: format!("spectral codebook for mode {mode}"),
                    found: "codebook of the other mode".into(),
                })
            }
        }
        if scalar.bits() > mode.scalar_field_bits() {
            return Err(Error::Config(format!(
                "{}-bit scalar codebook exceeds the {}-bit field of mode {mode}",
                scalar.bits(),
                mode.scalar_field_bits()
            )));
        }
        for (bits, field) in spectral.stage_bits().iter().zip(mode.spectral_field_bits()) {
            if bits > field {
                return Err(Error::Config(format!(
                    "{bits}-bit spectral stage exceeds the {field}-bit field of mode {mode}"
                )));
            }
        }
        if spectral.dim() > u16::MAX as usize {
            return Err(Error::Config("spectral dimension exceeds 65535".into()));
        }
        let mut set = Self {
            mode,
            scalar,
            spectral,
            content_hash: 0,
        };
        set.content_hash = codebook_file::content_hash(&set);
        Ok(set)
    }

    pub fn mode(&self) -> RateMode {
        self.mode
    }

    pub fn scalar(&self) -> &ScalarCodebook {
        &self.scalar
    }

    pub fn spectral(&self) -> &SpectralCodebook {
        &self.spectral
    }

    /// Dimension of the spectral part; frames have one more coefficient.
    pub fn spectral_dim(&self) -> usize {
        self.spectral.dim()
    }

    pub fn content_hash(&self) -> u64 {
        self.content_hash
    }

    /// Fails unless this set belongs to `mode`.
    pub fn require_mode(&self, mode: RateMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::ModeMismatch {
                expected: mode.to_string(),
                found: self.mode.to_string(),
            });
        }
        Ok(())
    }
}

/// Quantizer indices for one frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameCode {
    pub sq_index: u32,
    pub vq_indices: Vec<u32>,
}

impl FrameCode {
    pub fn new(sq_index: u32, vq_indices: Vec<u32>) -> Self {
        Self {
            sq_index,
            vq_indices,
        }
    }

    /// Checks every index against the field widths of `mode`.
    pub fn check_fields(&self, mode: RateMode) -> Result<()> {
        let widths = mode.spectral_field_bits();
        if self.vq_indices.len() != widths.len() {
            return Err(Error::ModeMismatch {
                expected: format!("{} spectral indices (mode {mode})", widths.len()),
                found: format!("{}", self.vq_indices.len()),
            });
        }
        let sq_size = 1usize << mode.scalar_field_bits();
        if self.sq_index as usize >= sq_size {
            return Err(Error::IndexOutOfRange {
                index: self.sq_index,
                size: sq_size,
            });
        }
        for (&i, &w) in self.vq_indices.iter().zip(widths) {
            if i as usize >= 1usize << w {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    size: 1 << w,
                });
            }
        }
        Ok(())
    }
}
