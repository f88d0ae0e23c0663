use crate::error::{Error, Result};
use crate::heads::LinearHead;
use crate::matrix::{norm, Matrix};

/// Frozen base classifier followed by a novel head that reads its logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprintedHead {
    pub base: LinearHead,
    pub novel: LinearHead,
}

impl ImprintedHead {
    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        let z = self.base.forward(features)?;
        self.novel.forward(&z)
    }
}

/// Novel head whose row `k` is the L2-normalised mean of class `k`'s support
/// logits, with zero bias.
pub fn imprint(support_logits: &[(Vec<f64>, usize)], n_way: usize) -> Result<LinearHead> {
    let dim = support_logits
        .first()
        .map(|(z, _)| z.len())
        .ok_or_else(|| Error::Coverage("no support logits".into()))?;
    let mut sums = Matrix::zeros(n_way, dim);
    let mut counts = vec![0usize; n_way];
    for (z, k) in support_logits {
        if *k >= n_way {
            return Err(Error::Coverage(format!("label {k} outside {n_way}-way task")));
        }
        if z.len() != dim {
            return Err(Error::Shape(format!("support logits of lengths {dim} and {}", z.len())));
        }
        for (s, v) in sums.row_mut(*k).iter_mut().zip(z) {
            *s += v;
        }
        counts[*k] += 1;
    }
    for (k, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(Error::Coverage(format!("class {k} has no support sample")));
        }
        let row = sums.row_mut(k);
        // The mean's norm is the sum's norm over n, so normalising the sum
        // gives the same row.
        let len = norm(row);
        if len == 0.0 {
            return Err(Error::Degenerate(format!("class {k} mean logit has zero norm")));
        }
        row.iter_mut().for_each(|v| *v /= len);
    }
    Ok(LinearHead {
        weights: sums,
        bias: vec![0.0; n_way],
    })
}
