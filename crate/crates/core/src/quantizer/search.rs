//! Nearest-neighbour searches over scalar, vector and multistage codebooks.
//!
//! Distances are unweighted squared Euclidean. Vector searches abandon a
//! codeword once its partial sum exceeds the current bound; since partial
//! sums never decrease this returns exactly the same index as a full scan. Ties always go to the lower index (the
//! lexicographically smaller pair for MSVQ).

use super::codebook::{MsvqCodebook, ScalarCodebook, VectorCodebook};
use crate::error::{Error, Result};

/// Default number of stage-one survivors kept by the MSVQ tree search.
pub const DEFAULT_BEAM_WIDTH: usize = 8;

const LANES: usize = 8;

#[inline(always)]
fn lane_sum(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Squared distance, returning early (with some value above `bound`) once
/// a partial sum exceeds `bound`.
#[inline]
fn bounded_distance(a: &[f64], b: &[f64], bound: f64) -> f64 {
    let mut acc = [0.0; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..LANES {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
        let partial = lane_sum(&acc);
        if partial > bound {
            return partial;
        }
    }
    for (l, (x, y)) in ca.remainder().iter().zip(cb.remainder()).enumerate() {
        let d = x - y;
        acc[l] += d * d;
    }
    lane_sum(&acc)
}

/// Squared Euclidean distance. Coordinate `i` accumulates into lane
/// `i % 8` and the lanes are combined in a fixed tree, so every search in
/// this module computes bit-identical distances.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    bounded_distance(a, b, f64::INFINITY)
}

/// Index of the nearest level; out-of-range values saturate to the end levels.
pub fn sq_encode(value: f64, cb: &ScalarCodebook) -> u32 {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &level) in cb.levels().iter().enumerate() {
        let d = (value - level) * (value - level);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best as u32
}

pub fn sq_decode(index: u32, cb: &ScalarCodebook) -> Result<f64> {
    cb.levels()
        .get(index as usize)
        .copied()
        .ok_or(Error::IndexOutOfRange {
            index,
            size: cb.len(),
        })
}

fn check_dim(vec: &[f64], dim: usize) -> Result<()> {
    if vec.len() != dim {
        return Err(Error::Shape(format!(
            "vector of dimension {} given to a {dim}-dimensional codebook",
            vec.len()
        )));
    }
    Ok(())
}

/// Nearest codeword and its squared distance.
pub fn vq_search(vec: &[f64], cb: &VectorCodebook) -> Result<(u32, f64)> {
    check_dim(vec, cb.dim())?;
    let (i, d) = nearest_in(vec, cb.as_flat());
    Ok((i as u32, d))
}

/// Nearest row of a flat row-major codeword table (row length `vec.len()`).
pub(crate) fn nearest_in(vec: &[f64], codewords: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, cw) in codewords.chunks_exact(vec.len()).enumerate() {
        let d = bounded_distance(vec, cw, best_d);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

pub fn vq_encode(vec: &[f64], cb: &VectorCodebook) -> Result<u32> {
    vq_search(vec, cb).map(|(i, _)| i)
}

pub fn vq_decode(index: u32, cb: &VectorCodebook) -> Result<Vec<f64>> {
    if index as usize >= cb.len() {
        return Err(Error::IndexOutOfRange {
            index,
            size: cb.len(),
        });
    }
    Ok(cb.codeword(index as usize).to_vec())
}

/// The `width` nearest codewords as `(distance, index)`, best first.
fn best_candidates(vec: &[f64], cb: &VectorCodebook, width: usize) -> Vec<(f64, u32)> {
    let width = width.min(cb.len());
    let mut kept: Vec<(f64, u32)> = Vec::with_capacity(width + 1);
    let mut bound = f64::INFINITY;
    for (i, cw) in cb.codewords().enumerate() {
        let d = bounded_distance(vec, cw, bound);
        if kept.len() == width && d >= bound {
            continue;
        }
        // scanning in index order, so an equal distance already kept wins
        let pos = kept.partition_point(|&(kd, _)| kd <= d);
        kept.insert(pos, (d, i as u32));
        kept.truncate(width);
        if kept.len() == width {
            bound = kept[width - 1].0;
        }
    }
    kept
}

/// M-best tree search: keep the `beam_width` best stage-one codewords, search
/// stage two on each residual, and return the jointly best pair with its
/// total squared distortion.
pub fn msvq_search(vec: &[f64], cb: &MsvqCodebook, beam_width: usize) -> Result<([u32; 2], f64)> {
    if beam_width == 0 {
        return Err(Error::Config("beam width must be at least 1".into()));
    }
    check_dim(vec, cb.dim())?;
    let [first, second] = cb.stages();
    let candidates = best_candidates(vec, first, beam_width);

    let mut residual = vec![0.0; vec.len()];
    let mut best = [u32::MAX, u32::MAX];
    let mut best_d = f64::INFINITY;
    for &(_, i1) in &candidates {
        for ((r, x), c) in residual.iter_mut().zip(vec).zip(first.codeword(i1 as usize)) {
            *r = x - c;
        }
        for (i2, cw) in second.codewords().enumerate() {
            let d = bounded_distance(&residual, cw, best_d);
            let pair = [i1, i2 as u32];
            if d < best_d || (d == best_d && pair < best) {
                best_d = d;
                best = pair;
            }
        }
    }
    Ok((best, best_d))
}

pub fn msvq_encode(vec: &[f64], cb: &MsvqCodebook, beam_width: usize) -> Result<[u32; 2]> {
    msvq_search(vec, cb, beam_width).map(|(p, _)| p)
}

pub fn msvq_decode(indices: [u32; 2], cb: &MsvqCodebook) -> Result<Vec<f64>> {
    let [first, second] = cb.stages();
    let a = vq_decode(indices[0], first)?;
    let b = vq_decode(indices[1], second)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect())
}
