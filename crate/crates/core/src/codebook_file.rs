//! The `MVQB` codebook file.
//!
//! Layout (little-endian throughout):
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `MVQB` |
//! | 1 | version, `0x01` |
//! | 1 | rate mode (0 = 1000 bit/s, 1 = 2000 bit/s) |
//! | 1 | scalar bits |
//! | 2 | spectral dimension, u16 |
//! | 1 per stage | stage bit widths (1 stage for mode 0, 2 for mode 1) |
//! | 4 each | scalar levels, then every stage's codewords row-major, f32 |
//! | 8 | FNV-1a 64 of all preceding bytes, u64 |

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;

use crate::error::{Error, Result};
use crate::quantizer::{
    CodebookSet, MsvqCodebook, RateMode, ScalarCodebook, SpectralCodebook, VectorCodebook,
};

pub const MAGIC: &[u8; 4] = b"MVQB";
pub const VERSION: u8 = 1;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

fn body(set: &CodebookSet) -> Vec<u8> {
    let spectral = set.spectral();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(set.mode().code());
    out.push(set.scalar().bits());
    out.extend_from_slice(&(spectral.dim() as u16).to_le_bytes());
    out.extend(spectral.stage_bits());
    for &v in set.scalar().levels() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for stage in spectral.stages() {
        for &v in stage.as_flat() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Digest identifying a codebook set; also stored in every stream header.
pub fn content_hash(set: &CodebookSet) -> u64 {
    fnv1a64(&body(set))
}

pub fn to_bytes(set: &CodebookSet) -> Vec<u8> {
    let mut out = body(set);
    let hash = fnv1a64(&out);
    out.extend_from_slice(&hash.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::CodebookFormat(format!(
                "truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::CodebookFormat("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<CodebookSet> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::CodebookFormat("bad magic, not an MVQB file".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::CodebookFormat(format!("unsupported version {version}")));
    }
    let mode_code = r.u8()?;
    let mode = RateMode::from_code(mode_code)
        .ok_or_else(|| Error::CodebookFormat(format!("unknown rate mode byte {mode_code}")))?;
    let sq_bits = r.u8()?;
    let dim_bytes = r.take(2)?;
    let dim = u16::from_le_bytes([dim_bytes[0], dim_bytes[1]]) as usize;
    let stage_bits = r.take(mode.spectral_field_bits().len())?.to_vec();
    if sq_bits == 0 || sq_bits > mode.scalar_field_bits() {
        return Err(Error::CodebookFormat(format!("scalar bit width {sq_bits} invalid for mode {mode}")));
    }
    for (&b, &field) in stage_bits.iter().zip(mode.spectral_field_bits()) {
        if b == 0 || b > field {
            return Err(Error::CodebookFormat(format!("stage bit width {b} invalid for mode {mode}")));
        }
    }
    if dim == 0 {
        return Err(Error::CodebookFormat("zero spectral dimension".into()));
    }

    let levels = r.f32s(1 << sq_bits)?;
    let mut stages = Vec::with_capacity(stage_bits.len());
    for &b in &stage_bits {
        stages.push((b, r.f32s((1usize << b) * dim)?));
    }
    let payload_end = r.pos;
    let stored = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
    if r.pos != bytes.len() {
        return Err(Error::CodebookFormat(format!(
            "{} trailing bytes after hash",
            bytes.len() - r.pos
        )));
    }
    let computed = fnv1a64(&bytes[..payload_end]);
    if stored != computed {
        return Err(Error::CodebookCorrupt { stored, computed });
    }

    let scalar = ScalarCodebook::new(levels).map_err(|e| Error::CodebookFormat(e.to_string()))?;
    let mut books = stages
        .into_iter()
        .map(|(b, values)| VectorCodebook::new(dim, b, values))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::CodebookFormat(e.to_string()))?;
    let spectral = match mode {
        RateMode::R1000 => SpectralCodebook::Direct(books.remove(0)),
        RateMode::R2000 => {
            let second = books.remove(1);
            let first = books.remove(0);
            SpectralCodebook::Multistage(MsvqCodebook::new(first, second)?)
        }
    };
    let set = CodebookSet::new(mode, scalar, spectral)?;
    debug_assert_eq!(set.content_hash(), computed);
    Ok(set)
}

pub fn save_codebooks(set: &CodebookSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(set)).map_err(|e| Error::io(path, e))
}

pub fn load_codebooks(path: impl AsRef<Path>) -> Result<CodebookSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Loads a set and checks that it belongs to `mode`.
pub fn load_codebooks_for(path: impl AsRef<Path>, mode: RateMode) -> Result<CodebookSet> {
    let set = load_codebooks(path)?;
    set.require_mode(mode)?;
    Ok(set)
}
