//! Temporal aggregation and alignment: mean pooling, frame-distance DTW and
//! multi-head saliency pooling, each paired with a similarity.

mod dtw;
mod saliency;

pub use dtw::{dtw, dtw_bruteforce, AlignmentPath, DistanceMatrix, BRUTEFORCE_MAX_CELLS};
pub use saliency::{descriptor_similarity, multi_saliency, pool_with_attention, saliency_attention, SaliencyParams};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};

/// Arithmetic mean of the rows.
pub fn mean_pool(seq: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; seq.cols()];
    for r in seq.iter_rows() {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    let inv = 1.0 / seq.rows() as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    out
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate(format!(
            "cosine with zero-norm vector (norms {na}, {nb})"
        )));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `d(i, j) = 1 - cos(q_i, s_j)`.
pub fn frame_distance_matrix(q: &Matrix, s: &Matrix) -> Result<DistanceMatrix> {
    if q.cols() != s.cols() {
        return Err(Error::Shape(format!(
            "frame dims differ: query {:?}, support {:?}",
            q.shape(),
            s.shape()
        )));
    }
    let q_norms = frame_norms(q, "query")?;
    let s_norms = frame_norms(s, "support")?;
    let values = Matrix::from_fn(q.rows(), s.rows(), |i, j| {
        // equal frames are exactly zero apart; the rounded cosine may not be 1
        if q.row(i) == s.row(j) {
            return 0.0;
        }
        let c = (dot(q.row(i), s.row(j)) / (q_norms[i] * s_norms[j])).clamp(-1.0, 1.0);
        (1.0 - c).max(0.0)
    });
    DistanceMatrix::new(values)
}

fn frame_norms(m: &Matrix, which: &str) -> Result<Vec<f64>> {
    m.iter_rows()
        .enumerate()
        .map(|(t, r)| {
            let n = norm(r);
            if n == 0.0 {
                Err(Error::Degenerate(format!("{which} frame {t} has zero norm")))
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// Negative DTW cost between embedded sequences, optionally divided by the
/// path length. Returns the optimal path alongside.
pub fn otam_alignment(q: &Matrix, s: &Matrix, normalize: bool) -> Result<(f64, AlignmentPath)> {
    let d = frame_distance_matrix(q, s)?;
    let (cost, path) = dtw(&d);
    let cost = if normalize { cost / path.len() as f64 } else { cost };
    Ok((-cost, path))
}

pub fn otam_similarity(q: &Matrix, s: &Matrix) -> Result<f64> {
    otam_alignment(q, s, false).map(|(sim, _)| sim)
}
