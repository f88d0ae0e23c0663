use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

/// `logits = W x + b` with `W: out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearHead {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::Shape(format!(
                "bias of length {} for weights {:?}",
                bias.len(),
                weights.shape()
            )));
        }
        if !weights.all_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Validation("linear head has non-finite entries".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    /// Weights and bias uniform in `±1/sqrt(inputs)`.
    pub fn random(outputs: usize, inputs: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weights = Matrix::from_fn(outputs, inputs, |_, _| rng.uniform_range(-bound, bound));
        let bias = (0..outputs).map(|_| rng.uniform_range(-bound, bound)).collect();
        Self { weights, bias }
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs() {
            return Err(Error::Shape(format!(
                "input of length {} for weights {:?}",
                x.len(),
                self.weights.shape()
            )));
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.weights.matvec(x);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}
