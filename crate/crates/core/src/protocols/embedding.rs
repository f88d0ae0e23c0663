use crate::error::{Error, Result};
use crate::matrix::{axpy, Matrix};
use crate::rng::RngStream;

/// Per-frame affine map `y_t = W x_t + b`, `W: C x C_in`.
///
/// The same type doubles as a gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingParams {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl EmbeddingParams {
    /// Gaussian weights with standard deviation `1/sqrt(C_in)`, zero bias.
    pub fn random(out_dim: usize, in_dim: usize, rng: &mut RngStream) -> Self {
        let std = 1.0 / (in_dim as f64).sqrt();
        Self {
            weights: Matrix::from_fn(out_dim, in_dim, |_, _| std * rng.normal()),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.out_dim(), self.in_dim())
    }

    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() || weights.rows() == 0 {
            return Err(Error::Shape(format!(
                "embedding weights {:?} with bias of length {}",
                weights.shape(),
                bias.len()
            )));
        }
        if !weights.all_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Validation("embedding has non-finite entries".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weights.matvec(x);
        axpy(1.0, &self.bias, &mut y);
        y
    }

    /// Embeds every frame: `T x C_in -> T x C`.
    pub fn embed(&self, frames: &Matrix) -> Result<Matrix> {
        if frames.cols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "frames {:?} for embedding {:?}",
                frames.shape(),
                self.weights.shape()
            )));
        }
        let mut out = Matrix::zeros(frames.rows(), self.out_dim());
        for (t, x) in frames.iter_rows().enumerate() {
            out.row_mut(t).copy_from_slice(&self.apply(x));
        }
        Ok(out)
    }

    /// Accumulates `dW += dYᵀ X`, `db += Σ_t dY_t` for frames `X`.
    pub fn accumulate_frames(&mut self, d_out: &Matrix, frames: &Matrix) {
        for (dy, x) in d_out.iter_rows().zip(frames.iter_rows()) {
            self.accumulate(1.0, dy, x);
        }
    }

    /// Accumulates `scale * (dy xᵀ, dy)`.
    pub fn accumulate(&mut self, scale: f64, dy: &[f64], x: &[f64]) {
        self.weights.add_outer(scale, dy, x);
        axpy(scale, dy, &mut self.bias);
    }
}
