//! Frame quantization: the energy coefficient goes through a scalar
//! quantizer, the remaining coefficients through direct VQ (1000 bit/s) or
//! two-stage MSVQ (2000 bit/s).

mod batch;
mod codebook;
mod search;

pub use codebook::{
    CodebookSet, FrameCode, MsvqCodebook, RateMode, ScalarCodebook, SpectralCodebook,
    VectorCodebook,
};
pub use search::{
    msvq_decode, msvq_encode, msvq_search, sq_decode, sq_encode, squared_distance, vq_decode,
    vq_encode, vq_search, DEFAULT_BEAM_WIDTH,
};
pub(crate) use batch::nearest_batch;
pub(crate) use search::nearest_in;
pub use batch::{msvq_search_batch, vq_search_batch};

use crate::error::{Error, Result};

fn check_frame_dim(z: &[f64], set: &CodebookSet) -> Result<()> {
    if z.len() != set.spectral_dim() + 1 {
        return Err(Error::Shape(format!(
            "frame has {} coefficients, codebooks expect {}",
            z.len(),
            set.spectral_dim() + 1
        )));
    }
    Ok(())
}

pub fn quantize_frame(z: &[f64], set: &CodebookSet, beam_width: usize) -> Result<FrameCode> {
    check_frame_dim(z, set)?;
    let sq_index = sq_encode(z[0], set.scalar());
    let vq_indices = match set.spectral() {
        SpectralCodebook::Direct(cb) => vec![vq_encode(&z[1..], cb)?],
        SpectralCodebook::Multistage(cb) => msvq_encode(&z[1..], cb, beam_width)?.to_vec(),
    };
    Ok(FrameCode {
        sq_index,
        vq_indices,
    })
}

pub fn dequantize_frame(code: &FrameCode, set: &CodebookSet) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(set.spectral_dim() + 1);
    out.push(sq_decode(code.sq_index, set.scalar())?);
    match (set.spectral(), code.vq_indices.as_slice()) {
        (SpectralCodebook::Direct(cb), &[i]) => out.extend(vq_decode(i, cb)?),
        (SpectralCodebook::Multistage(cb), &[i, j]) => out.extend(msvq_decode([i, j], cb)?),
        (_, indices) => {
            return Err(Error::ModeMismatch {
                expected: format!(
                    "{} spectral indices (mode {})",
                    set.mode().spectral_field_bits().len(),
                    set.mode()
                ),
                found: format!("{}", indices.len()),
            })
        }
    }
    Ok(out)
}

/// Quantizes many frames at once (row-major, rows of `spectral_dim + 1`).
/// Gives exactly the codes of [`quantize_frame`] on each row.
pub fn quantize_frames(frames: &[f64], set: &CodebookSet, beam_width: usize) -> Result<Vec<FrameCode>> {
    let k = set.spectral_dim() + 1;
    if !frames.len().is_multiple_of(k) {
        return Err(Error::Shape(format!(
            "{} values do not form frames of {k} coefficients",
            frames.len()
        )));
    }
    let spectral: Vec<f64> = frames.chunks_exact(k).flat_map(|z| z[1..].iter().copied()).collect();
    let vq: Vec<Vec<u32>> = match set.spectral() {
        SpectralCodebook::Direct(cb) => vq_search_batch(&spectral, cb)?.into_iter().map(|(i, _)| vec![i]).collect(),
        SpectralCodebook::Multistage(cb) => msvq_search_batch(&spectral, cb, beam_width)?
            .into_iter()
            .map(|(p, _)| p.to_vec())
            .collect(),
    };
    Ok(frames
        .chunks_exact(k)
        .zip(vq)
        .map(|(z, vq_indices)| FrameCode {
            sq_index: sq_encode(z[0], set.scalar()),
            vq_indices,
        })
        .collect())
}
