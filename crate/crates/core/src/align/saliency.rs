//! Multi-head attention pooling over time. Head `s` scores each frame by
//! `scale * u_s . x_t`, softmaxes over `t`, and returns the weighted frame
//! average; the stacked head outputs form the descriptor.

use crate::align::cosine;
use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyParams {
    /// `S x C`, one query per head.
    pub queries: Matrix,
    pub scale: f64,
}

impl SaliencyParams {
    /// Zero queries: every head starts as plain average pooling.
    pub fn zeros(heads: usize, dim: usize) -> Self {
        Self::new(Matrix::zeros(heads, dim))
    }

    pub fn new(queries: Matrix) -> Self {
        let scale = 1.0 / (queries.cols() as f64).sqrt();
        Self { queries, scale }
    }

    pub fn heads(&self) -> usize {
        self.queries.rows()
    }
}

/// `S x T` attention weights; each row sums to one.
pub fn saliency_attention(seq: &Matrix, params: &SaliencyParams) -> Result<Matrix> {
    if seq.cols() != params.queries.cols() {
        return Err(Error::Shape(format!(
            "sequence {:?} vs saliency queries {:?}",
            seq.shape(),
            params.queries.shape()
        )));
    }
    let mut att = Matrix::zeros(params.heads(), seq.rows());
    for (s, u) in params.queries.iter_rows().enumerate() {
        let row = att.row_mut(s);
        for (t, x) in seq.iter_rows().enumerate() {
            row[t] = params.scale * dot(u, x);
        }
        softmax_in_place(row);
    }
    Ok(att)
}

/// `S x C` descriptor: row `s` is the attention-weighted frame average.
pub fn multi_saliency(seq: &Matrix, params: &SaliencyParams) -> Result<Matrix> {
    let att = saliency_attention(seq, params)?;
    Ok(pool_with_attention(&att, seq))
}

pub fn pool_with_attention(att: &Matrix, seq: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(att.rows(), seq.cols());
    for s in 0..att.rows() {
        for (t, x) in seq.iter_rows().enumerate() {
            axpy(att[(s, t)], x, out.row_mut(s));
        }
    }
    out
}

/// Mean over heads of the row-wise cosine.
pub fn descriptor_similarity(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("descriptors {:?} and {:?}", a.shape(), b.shape())));
    }
    let mut total = 0.0;
    for (ra, rb) in a.iter_rows().zip(b.iter_rows()) {
        total += cosine(ra, rb)?;
    }
    Ok(total / a.rows() as f64)
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}
