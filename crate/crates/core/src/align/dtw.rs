use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Frame-pair distances `1 - cos`, entries in `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Matrix,
}

const RANGE_TOL: f64 = 1e-12;

impl DistanceMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::Shape(format!("empty distance matrix {:?}", values.shape())));
        }
        if let Some(v) = values
            .as_slice()
            .iter()
            .find(|v| !(-RANGE_TOL..=2.0 + RANGE_TOL).contains(*v))
        {
            return Err(Error::Validation(format!("distance {v} outside [0, 2]")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn transpose(&self) -> Self {
        Self {
            values: self.values.transpose(),
        }
    }
}

/// Monotone correspondence between query frames `i` and support frames `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPath {
    steps: Vec<(usize, usize)>,
}

impl AlignmentPath {
    pub fn new(steps: Vec<(usize, usize)>) -> Self {
        Self { steps }
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Starts at the origin, ends at the far corner, and moves by one of
    /// `(1,0)`, `(0,1)`, `(1,1)` per step.
    pub fn is_admissible(&self, rows: usize, cols: usize) -> bool {
        let (Some(&first), Some(&last)) = (self.steps.first(), self.steps.last()) else {
            return false;
        };
        first == (0, 0)
            && last == (rows - 1, cols - 1)
            && self.steps.windows(2).all(|w| {
                let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }

    pub fn cost(&self, d: &Matrix) -> f64 {
        self.steps.iter().map(|&(i, j)| d[(i, j)]).sum()
    }
}

/// Classic full-boundary DTW. Returns the minimal path sum and a path that
/// attains it. Backtracking prefers the diagonal predecessor, then vertical
/// `(i-1, j)`, then horizontal `(i, j-1)` on ties.
pub fn dtw(d: &DistanceMatrix) -> (f64, AlignmentPath) {
    let d = &d.values;
    let (rows, cols) = d.shape();
    let mut acc = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc[(0, j - 1)],
                (_, 0) => acc[(i - 1, 0)],
                _ => acc[(i - 1, j - 1)].min(acc[(i - 1, j)]).min(acc[(i, j - 1)]),
            };
            acc[(i, j)] = d[(i, j)] + best;
        }
    }

    let mut steps = Vec::with_capacity(rows + cols);
    let (mut i, mut j) = (rows - 1, cols - 1);
    steps.push((i, j));
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = acc[(i - 1, j - 1)];
                let up = acc[(i - 1, j)];
                let left = acc[(i, j - 1)];
                if diag <= up && diag <= left {
                    (i - 1, j - 1)
                } else if up <= left {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            }
        };
        steps.push((i, j));
    }
    steps.reverse();
    (acc[(rows - 1, cols - 1)], AlignmentPath { steps })
}

/// Largest `rows * cols` accepted by [`dtw_bruteforce`].
pub const BRUTEFORCE_MAX_CELLS: usize = 36;

/// Minimum path sum by enumerating every admissible path. Test oracle for
/// [`dtw`]; refuses matrices above [`BRUTEFORCE_MAX_CELLS`] cells.
pub fn dtw_bruteforce(d: &DistanceMatrix) -> Result<f64> {
    let d = &d.values;
    let (rows, cols) = d.shape();
    if rows * cols > BRUTEFORCE_MAX_CELLS {
        return Err(Error::Capacity(format!(
            "{rows}x{cols} matrix exceeds the enumeration limit of {BRUTEFORCE_MAX_CELLS} cells"
        )));
    }
    fn walk(d: &Matrix, i: usize, j: usize, sum: f64, best: &mut f64) {
        let sum = sum + d[(i, j)];
        let (rows, cols) = d.shape();
        if (i, j) == (rows - 1, cols - 1) {
            *best = best.min(sum);
            return;
        }
        if i + 1 < rows {
            walk(d, i + 1, j, sum, best);
        }
        if j + 1 < cols {
            walk(d, i, j + 1, sum, best);
        }
        if i + 1 < rows && j + 1 < cols {
            walk(d, i + 1, j + 1, sum, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(d, 0, 0, 0.0, &mut best);
    Ok(best)
}
