//! Codebook design: Lloyd-Max for the energy coefficient, LBG binary
//! splitting for vector codebooks, and sequential two-stage MSVQ training.
//!
//! Training is fully deterministic. Nearest-neighbour assignment runs in
//! parallel but results are collected in data order and every sum is taken
//! sequentially, so the codebooks do not depend on the thread count.

use rayon::prelude::*;

use crate::analysis::FeatureExtractor;
use crate::error::{Error, Result};
use crate::quantizer::{nearest_batch, nearest_in, squared_distance, MsvqCodebook, ScalarCodebook, VectorCodebook};
use crate::signal_io::AudioBuffer;

/// Lloyd iterations stop once the relative improvement falls below this.
pub const REL_IMPROVEMENT_STOP: f64 = 1e-4;
pub const MAX_LLOYD_ITERATIONS: usize = 50;
/// Codeword split perturbation, `c -> c (1 +/- eps)`.
pub const SPLIT_EPSILON: f64 = 0.01;

/// Pooled MFCC frames, row-major `len x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCorpus {
    pub vectors: Vec<f64>,
    pub dim: usize,
    pub source_manifest: Vec<String>,
}

impl TrainingCorpus {
    pub fn new(vectors: Vec<f64>, dim: usize, source_manifest: Vec<String>) -> Result<Self> {
        if dim == 0 || !vectors.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} values do not form rows of dimension {dim}",
                vectors.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite training value".into()));
        }
        Ok(Self {
            vectors,
            dim,
            source_manifest,
        })
    }

    /// Runs the analysis front end over every utterance and pools the frames.
    pub fn from_audio(
        extractor: &FeatureExtractor,
        utterances: &[(String, AudioBuffer)],
    ) -> Result<Self> {
        let per_file: Vec<Vec<f64>> = utterances
            .par_iter()
            .map(|(_, audio)| {
                audio.require_codec_rate()?;
                Ok(extractor.mfcc(audio)?.values)
            })
            .collect::<Result<_>>()?;
        Self::new(
            per_file.concat(),
            extractor.config().num_mel,
            utterances.iter().map(|(id, _)| id.clone()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.vectors[t * self.dim..(t + 1) * self.dim]
    }

    /// The energy coefficient of every frame.
    pub fn energy(&self) -> Vec<f64> {
        self.vectors.chunks(self.dim).map(|r| r[0]).collect()
    }

    /// Coefficients `1..dim` of every frame, row-major.
    pub fn spectral(&self) -> Vec<f64> {
        self.vectors
            .chunks(self.dim)
            .flat_map(|r| r[1..].iter().copied())
            .collect()
    }
}

/// Mean squared quantization error recorded at every nearest-neighbour pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub distortions: Vec<f64>,
    pub iterations: usize,
    pub final_distortion: f64,
}

impl TrainReport {
    fn from_distortions(distortions: Vec<f64>) -> Self {
        Self {
            iterations: distortions.len(),
            final_distortion: distortions.last().copied().unwrap_or(0.0),
            distortions,
        }
    }

    pub fn is_non_increasing(&self) -> bool {
        self.distortions.windows(2).all(|w| w[1] <= w[0])
    }
}

struct Assignment {
    cell: Vec<usize>,
    dist: Vec<f64>,
}

impl Assignment {
    fn mean(&self) -> f64 {
        self.dist.iter().sum::<f64>() / self.dist.len() as f64
    }

    fn counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &c in &self.cell {
            counts[c] += 1;
        }
        counts
    }
}

const PAR_CHUNK: usize = 256;

/// Codebooks at least this large are searched with the batched search.
const BATCH_MIN_CODEWORDS: usize = 64;

fn assign(data: &[f64], dim: usize, codebook: &[f64]) -> Assignment {
    if codebook.len() / dim >= BATCH_MIN_CODEWORDS {
        let pairs = nearest_batch(data, codebook, dim).expect("rows checked by the caller");
        let (cell, dist) = pairs.into_iter().unzip();
        return Assignment { cell, dist };
    }
    let pairs: Vec<(usize, f64)> = data
        .par_chunks(dim * PAR_CHUNK)
        .flat_map_iter(|block| {
            block
                .chunks_exact(dim)
                .map(|x| nearest_in(x, codebook))
                .collect::<Vec<_>>()
        })
        .collect();
    let (cell, dist) = pairs.into_iter().unzip();
    Assignment { cell, dist }
}

/// Moves every empty codeword onto the farthest member of the most populous
/// cell that still has a member off its codeword. The assignment is updated
/// exactly as a full nearest-neighbour pass would update it.
fn reseed_empty_cells(data: &[f64], dim: usize, codebook: &mut [f64], a: &mut Assignment) {
    let k = codebook.len() / dim;
    for _ in 0..2 * k {
        let counts = a.counts(k);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // donor: most populous cell with a positive-distance member
        let mut farthest: Vec<Option<(usize, f64)>> = vec![None; k];
        for (t, (&c, &d)) in a.cell.iter().zip(&a.dist).enumerate() {
            if d > 0.0 && farthest[c].is_none_or(|(_, fd)| d > fd) {
                farthest[c] = Some((t, d));
            }
        }
        let donor = (0..k)
            .filter(|&c| farthest[c].is_some())
            .max_by(|&x, &y| counts[x].cmp(&counts[y]).then(y.cmp(&x)));
        let Some(donor) = donor else {
            return;
        };
        let (point, _) = farthest[donor].expect("donor has a member");
        let seed = data[point * dim..(point + 1) * dim].to_vec();
        codebook[empty * dim..(empty + 1) * dim].copy_from_slice(&seed);
        for (t, x) in data.chunks_exact(dim).enumerate() {
            let d = squared_distance(x, &seed);
            if d < a.dist[t] || (d == a.dist[t] && empty < a.cell[t]) {
                a.cell[t] = empty;
                a.dist[t] = d;
            }
        }
    }
}

/// Cell means; a cell without members keeps its codeword.
fn centroids(data: &[f64], dim: usize, cells: &[usize], previous: &[f64]) -> Vec<f64> {
    let k = previous.len() / dim;
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (x, &c) in data.chunks_exact(dim).zip(cells) {
        counts[c] += 1;
        for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(x) {
            *s += v;
        }
    }
    let mut out = previous.to_vec();
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            for (o, s) in out[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                *o = s / n;
            }
        }
    }
    out
}

/// Lloyd iterations from `codebook`. Each pass records the nearest-neighbour
/// distortion of the current codebook, then moves codewords to cell means.
/// Returns the codebook whose distortion was recorded last, with its
/// assignment. A pass that comes out worse than the previous one (possible
/// only through rounding at convergence) is discarded.
fn lloyd(data: &[f64], dim: usize, mut codebook: Vec<f64>, log: &mut Vec<f64>) -> (Vec<f64>, Assignment) {
    let mut a = assign(data, dim, &codebook);
    reseed_empty_cells(data, dim, &mut codebook, &mut a);
    let mut prev = a.mean();
    log.push(prev);
    for _ in 1..MAX_LLOYD_ITERATIONS {
        if prev == 0.0 {
            break;
        }
        let mut next = centroids(data, dim, &a.cell, &codebook);
        let mut b = assign(data, dim, &next);
        reseed_empty_cells(data, dim, &mut next, &mut b);
        let d = b.mean();
        if d > prev {
            break;
        }
        log.push(d);
        codebook = next;
        a = b;
        if prev - d <= REL_IMPROVEMENT_STOP * prev {
            break;
        }
        prev = d;
    }
    (codebook, a)
}

fn check_rows(data: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::Shape(format!("{} values are not rows of dimension {dim}", data.len())));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite training value".into()));
    }
    Ok(data.len() / dim)
}

fn codebook_size(bits: u8) -> Result<usize> {
    if bits == 0 || bits > 24 {
        return Err(Error::Config(format!("bit width {bits} out of range 1..=24")));
    }
    Ok(1 << bits)
}

/// 1-D Lloyd-Max design starting from the `(i + 0.5) / 2^b` quantiles.
pub fn train_scalar(samples: &[f64], bits: u8) -> Result<(ScalarCodebook, TrainReport)> {
    let size = codebook_size(bits)?;
    check_rows(samples, 1)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < size {
        return Err(Error::InsufficientData(format!(
            "{}-bit scalar codebook needs at least {size} distinct samples, got {}",
            bits,
            distinct.len()
        )));
    }
    let n = sorted.len();
    let init: Vec<f64> = (0..size)
        .map(|i| {
            let q = (i as f64 + 0.5) / size as f64;
            sorted[((q * n as f64) as usize).min(n - 1)]
        })
        .collect();
    let mut log = Vec::new();
    let (mut levels, _) = lloyd(samples, 1, init, &mut log);
    levels.sort_by(f64::total_cmp);
    let cb = ScalarCodebook::new(levels)
        .map_err(|e| Error::Numerical(format!("scalar training produced invalid levels: {e}")))?;
    Ok((cb, TrainReport::from_distortions(log)))
}

/// LBG design by repeated binary splitting, starting from the global centroid.
pub fn train_lbg(vectors: &[f64], dim: usize, bits: u8) -> Result<(VectorCodebook, TrainReport)> {
    let (codebook, log) = lbg_raw(vectors, dim, bits)?;
    let cb = VectorCodebook::new(dim, bits, codebook)?;
    Ok((cb, TrainReport::from_distortions(log)))
}

fn lbg_raw(data: &[f64], dim: usize, bits: u8) -> Result<(Vec<f64>, Vec<f64>)> {
    let target = codebook_size(bits)?;
    let t = check_rows(data, dim)?;
    if t < target {
        return Err(Error::InsufficientData(format!(
            "{bits}-bit codebook needs at least {target} training vectors, got {t}"
        )));
    }
    let mut log = Vec::new();
    let (mut codebook, mut a) = lloyd(data, dim, centroids(data, dim, &vec![0; t], &vec![0.0; dim]), &mut log);

    while codebook.len() / dim < target {
        let k = codebook.len() / dim;
        let mut split = Vec::with_capacity(2 * k * dim);
        for c in codebook.chunks_exact(dim) {
            split.extend(c.iter().map(|v| v * (1.0 + SPLIT_EPSILON)));
            split.extend(c.iter().map(|v| v * (1.0 - SPLIT_EPSILON)));
        }
        // each point chooses between the two children of its own cell, so the
        // first partition refines the previous one and cannot raise distortion
        let cells: Vec<usize> = data
            .chunks_exact(dim)
            .zip(&a.cell)
            .map(|(x, &parent)| {
                let (lo, hi) = (2 * parent, 2 * parent + 1);
                let d_lo = squared_distance(x, &split[lo * dim..(lo + 1) * dim]);
                let d_hi = squared_distance(x, &split[hi * dim..(hi + 1) * dim]);
                if d_hi < d_lo {
                    hi
                } else {
                    lo
                }
            })
            .collect();
        let refined = centroids(data, dim, &cells, &split);
        (codebook, a) = lloyd(data, dim, refined, &mut log);
    }
    Ok((codebook, log))
}

/// Stage one by LBG on the vectors, stage two by LBG on the stage-one
/// residuals (nearest stage-one codeword, no joint optimization).
pub fn train_msvq(vectors: &[f64], dim: usize, stage_bits: [u8; 2]) -> Result<(MsvqCodebook, [TrainReport; 2])> {
    let (first, report1) = train_lbg(vectors, dim, stage_bits[0])?;
    let residuals: Vec<f64> = vectors
        .par_chunks(dim * PAR_CHUNK)
        .flat_map_iter(|block| {
            block
                .chunks_exact(dim)
                .flat_map(|x| {
                    let (i, _) = nearest_in(x, first.as_flat());
                    x.iter().zip(first.codeword(i)).map(|(a, b)| a - b).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (second, report2) = train_lbg(&residuals, dim, stage_bits[1])?;
    Ok((MsvqCodebook::new(first, second)?, [report1, report2]))
}
