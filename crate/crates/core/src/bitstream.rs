//! The `.mvqc` stream: an 18-byte header followed by MSB-first packed frame
//! codes.
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `MVQC` |
//! | 1 | version, `0x01` |
//! | 1 | rate mode (0 = 1000 bit/s, 1 = 2000 bit/s) |
//! | 4 | frame count, u32 LE |
//! | 8 | codebook content hash, u64 LE |
//!
//! Each frame contributes the energy index then the spectral index(es), each
//! at its fixed field width (4+12 or 6+13+13 bits). The payload is
//! zero-padded to a whole byte at the end of the stream.

use crate::analysis::FrameConfig;
use crate::error::{Error, Result};
use crate::quantizer::{FrameCode, RateMode};

pub const MAGIC: &[u8; 4] = b"MVQC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    pub mode: RateMode,
    pub frame_count: u32,
    pub codebook_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedStream {
    pub header: StreamHeader,
    pub payload: Vec<u8>,
}

impl EncodedStream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.header.mode.code());
        out.extend_from_slice(&self.header.frame_count.to_le_bytes());
        out.extend_from_slice(&self.header.codebook_hash.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn payload_bits(&self) -> u64 {
        self.header.frame_count as u64 * self.header.mode.bits_per_frame() as u64
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    used: u32,
}

impl BitWriter {
    fn new() -> Self {
        Self {
            bytes: Vec::new(),
            used: 0,
        }
    }

    fn put(&mut self, value: u32, width: u8) {
        for shift in (0..width).rev() {
            if self.used.is_multiple_of(8) {
                self.bytes.push(0);
            }
            let bit = ((value >> shift) & 1) as u8;
            let last = self.bytes.len() - 1;
            self.bytes[last] |= bit << (7 - self.used % 8);
            self.used += 1;
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn get(&mut self, width: u8) -> u32 {
        let mut v = 0u32;
        for _ in 0..width {
            let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u32;
            self.pos += 1;
        }
        v
    }
}

pub fn pack(codes: &[FrameCode], mode: RateMode, codebook_hash: u64) -> Result<EncodedStream> {
    let frame_count = u32::try_from(codes.len())
        .map_err(|_| Error::StreamFormat(format!("{} frames exceed the u32 frame count", codes.len())))?;
    let mut w = BitWriter::new();
    for code in codes {
        code.check_fields(mode)?;
        w.put(code.sq_index, mode.scalar_field_bits());
        for (&index, &width) in code.vq_indices.iter().zip(mode.spectral_field_bits()) {
            w.put(index, width);
        }
    }
    Ok(EncodedStream {
        header: StreamHeader {
            mode,
            frame_count,
            codebook_hash,
        },
        payload: w.bytes,
    })
}

pub fn parse_header(bytes: &[u8]) -> Result<StreamHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::StreamFormat(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::StreamFormat("bad magic, not an MVQC stream".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::StreamFormat(format!("unsupported version {}", bytes[4])));
    }
    let mode = RateMode::from_code(bytes[5])
        .ok_or_else(|| Error::StreamFormat(format!("unknown rate mode byte {}", bytes[5])))?;
    Ok(StreamHeader {
        mode,
        frame_count: u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")),
        codebook_hash: u64::from_le_bytes(bytes[10..18].try_into().expect("8 bytes")),
    })
}

/// Validates a complete stream image and splits it into header and payload.
pub fn parse(bytes: &[u8]) -> Result<EncodedStream> {
    let header = parse_header(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let bits = header.frame_count as u64 * header.mode.bits_per_frame() as u64;
    let needed = bits.div_ceil(8);
    if (payload.len() as u64) < needed {
        return Err(Error::StreamFormat(format!(
            "truncated payload: {} frames need {needed} bytes, found {}",
            header.frame_count,
            payload.len()
        )));
    }
    if payload.len() as u64 > needed {
        return Err(Error::StreamFormat(format!(
            "{} bytes of trailing garbage after {} frames",
            payload.len() as u64 - needed,
            header.frame_count
        )));
    }
    let pad = (needed * 8 - bits) as u32;
    if pad > 0 && payload[payload.len() - 1] & ((1u8 << pad) - 1) != 0 {
        return Err(Error::StreamFormat("non-zero padding bits".into()));
    }
    Ok(EncodedStream {
        header,
        payload: payload.to_vec(),
    })
}

pub fn codes(stream: &EncodedStream) -> Vec<FrameCode> {
    let mode = stream.header.mode;
    let mut r = BitReader {
        bytes: &stream.payload,
        pos: 0,
    };
    (0..stream.header.frame_count)
        .map(|_| {
            let sq_index = r.get(mode.scalar_field_bits());
            let vq_indices = mode.spectral_field_bits().iter().map(|&w| r.get(w)).collect();
            FrameCode {
                sq_index,
                vq_indices,
            }
        })
        .collect()
}

pub fn unpack(bytes: &[u8]) -> Result<(RateMode, u64, Vec<FrameCode>)> {
    let stream = parse(bytes)?;
    let frames = codes(&stream);
    Ok((stream.header.mode, stream.header.codebook_hash, frames))
}

/// Payload bit rate, `bits_per_frame * f_s / R`.
pub fn stream_bitrate(stream: &EncodedStream, cfg: &FrameConfig) -> f64 {
    payload_bitrate(stream.header.mode.bits_per_frame(), cfg)
}

pub fn payload_bitrate(bits_per_frame: u32, cfg: &FrameConfig) -> f64 {
    bits_per_frame as f64 * cfg.frame_rate()
}

/// Exact integer bit rate when `f_s * bits` is divisible by `R`.
pub fn payload_bitrate_exact(bits_per_frame: u32, cfg: &FrameConfig) -> Option<u64> {
    let num = bits_per_frame as u64 * cfg.sample_rate as u64;
    let den = cfg.frame_shift as u64;
    num.is_multiple_of(den).then_some(num / den)
}
