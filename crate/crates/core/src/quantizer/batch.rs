//! Batched nearest-neighbour search for whole utterances.
//!
//! Distances to every codeword are first estimated for a block of vectors
//! with one matrix product, `|x|^2 + |c|^2 - 2 x.c`. The estimate is only used
//! to discard codewords: anything within a rounding margin of the best
//! estimate is re-scored with [`squared_distance`], so the returned indices
//! and distances are identical to the per-vector searches in `search`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::codebook::{MsvqCodebook, VectorCodebook};
use super::search::squared_distance;
use crate::error::{Error, Result};

/// Vectors per matrix product.
const BLOCK: usize = 32;

/// Relative slack on the estimate. Rounding error of either formula is
/// below `(n + 3) * eps * (|x|^2 + |c|^2)`, far smaller than this for any
/// dimension used here.
const MARGIN: f64 = 1e-9;

struct Prepared {
    codewords: DMatrix<f64>,
    norms: Vec<f64>,
    max_norm: f64,
}

fn prepare(flat: &[f64], dim: usize) -> Prepared {
    let norms: Vec<f64> = flat.chunks_exact(dim).map(|c| c.iter().map(|v| v * v).sum()).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    Prepared {
        codewords: DMatrix::from_row_slice(norms.len(), dim, flat),
        norms,
        max_norm,
    }
}

/// Estimated distances, `cb.len()` values per input vector, stored
/// contiguously per vector. Also returns each vector's squared norm and the
/// smallest estimate for that vector.
fn estimates(vectors: &[f64], dim: usize, p: &Prepared) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let n = vectors.len() / dim;
    let xt = DMatrix::from_column_slice(dim, n, vectors);
    let mut g = &p.codewords * xt;
    let xn: Vec<f64> = vectors.chunks_exact(dim).map(|v| v.iter().map(|a| a * a).sum()).collect();
    let k = p.norms.len();
    let mins = g
        .as_mut_slice()
        .chunks_exact_mut(k)
        .zip(&xn)
        .map(|(col, &x)| {
            let mut min = f64::INFINITY;
            for (v, cn) in col.iter_mut().zip(&p.norms) {
                *v = x + cn - 2.0 * *v;
                min = min.min(*v);
            }
            min
        })
        .collect();
    (g, xn, mins)
}

/// Exact `width` best codewords `(distance, index)` for one vector, best first,
/// ties to the lower index.
fn exact_top(vec: &[f64], cb: &VectorCodebook, approx: &[f64], slack: f64, width: usize) -> Vec<(f64, u32)> {
    let width = width.min(approx.len());
    let mut sorted = approx.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(width - 1, f64::total_cmp);
    let limit = *kth + 2.0 * slack;
    let mut exact: Vec<(f64, u32)> = approx
        .iter()
        .enumerate()
        .filter(|(_, &a)| a <= limit)
        .map(|(j, _)| (squared_distance(vec, cb.codeword(j)), j as u32))
        .collect();
    exact.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    exact.truncate(width);
    exact
}

fn check(vectors: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || !vectors.len().is_multiple_of(dim) {
        return Err(Error::Shape(format!(
            "{} values do not form vectors of dimension {dim}",
            vectors.len()
        )));
    }
    Ok(vectors.len() / dim)
}

/// Nearest row of `codewords` (row-major, rows of `dim`) for every row of
/// `vectors`, as `(index, squared distance)`.
pub(crate) fn nearest_batch(vectors: &[f64], codewords: &[f64], dim: usize) -> Result<Vec<(usize, f64)>> {
    check(vectors, dim)?;
    check(codewords, dim)?;
    let k = codewords.len() / dim;
    let p = prepare(codewords, dim);
    let blocks: Vec<Vec<(usize, f64)>> = vectors
        .par_chunks(BLOCK * dim)
        .map(|block| {
            let (approx, xn, mins) = estimates(block, dim, &p);
            block
                .chunks_exact(dim)
                .zip(approx.as_slice().chunks_exact(k))
                .zip(xn.iter().zip(&mins))
                .map(|((v, a), (n, &min))| {
                    let limit = min + 2.0 * MARGIN * (n + p.max_norm);
                    let mut best = (usize::MAX, f64::INFINITY);
                    for (j, _) in a.iter().enumerate().filter(|(_, &e)| e <= limit) {
                        let d = squared_distance(v, &codewords[j * dim..(j + 1) * dim]);
                        if d < best.1 {
                            best = (j, d);
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();
    Ok(blocks.concat())
}

/// Nearest codeword and squared distance for each row of `vectors`
/// (row-major, rows of `cb.dim()`).
pub fn vq_search_batch(vectors: &[f64], cb: &VectorCodebook) -> Result<Vec<(u32, f64)>> {
    Ok(nearest_batch(vectors, cb.as_flat(), cb.dim())?
        .into_iter()
        .map(|(i, d)| (i as u32, d))
        .collect())
}

/// Joint MSVQ search for each row of `vectors` with the same M-best tree
/// search as `msvq_search`.
pub fn msvq_search_batch(vectors: &[f64], cb: &MsvqCodebook, beam_width: usize) -> Result<Vec<([u32; 2], f64)>> {
    if beam_width == 0 {
        return Err(Error::Config("beam width must be at least 1".into()));
    }
    let dim = cb.dim();
    check(vectors, dim)?;
    let [first, second] = cb.stages();
    let p1 = prepare(first.as_flat(), dim);
    let p2 = prepare(second.as_flat(), dim);
    let blocks: Vec<Vec<([u32; 2], f64)>> = vectors
        .par_chunks(BLOCK * dim)
        .map(|block| {
            let (approx, xn, _) = estimates(block, dim, &p1);
            let candidates: Vec<Vec<(f64, u32)>> = block
                .chunks_exact(dim)
                .zip(approx.as_slice().chunks_exact(first.len()))
                .zip(&xn)
                .map(|((v, a), n)| exact_top(v, first, a, MARGIN * (n + p1.max_norm), beam_width))
                .collect();
            drop(approx);

            let mut residuals = Vec::new();
            for (v, cands) in block.chunks_exact(dim).zip(&candidates) {
                for &(_, i1) in cands {
                    residuals.extend(v.iter().zip(first.codeword(i1 as usize)).map(|(x, c)| x - c));
                }
            }
            let (approx2, rn, mins2) = estimates(&residuals, dim, &p2);
            let columns: Vec<&[f64]> = approx2.as_slice().chunks_exact(second.len()).collect();

            let mut out = Vec::with_capacity(candidates.len());
            let mut offset = 0;
            for cands in &candidates {
                let rows = offset..offset + cands.len();
                offset += cands.len();
                let slack = MARGIN * (rn[rows.clone()].iter().cloned().fold(0.0, f64::max) + p2.max_norm);
                let min = mins2[rows.clone()].iter().cloned().fold(f64::INFINITY, f64::min);
                let limit = min + 2.0 * slack;
                let mut best = ([u32::MAX, u32::MAX], f64::INFINITY);
                for (row, &(_, i1)) in rows.zip(cands) {
                    let r = &residuals[row * dim..(row + 1) * dim];
                    for (i2, &a) in columns[row].iter().enumerate() {
                        if a > limit {
                            continue;
                        }
                        let d = squared_distance(r, second.codeword(i2));
                        let pair = [i1, i2 as u32];
                        if d < best.1 || (d == best.1 && pair < best.0) {
                            best = (pair, d);
                        }
                    }
                }
                out.push(best);
            }
            out
        })
        .collect();
    Ok(blocks.concat())
}
