use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout mask: 0 with probability `p`, else `1 / (1 - p)`.
pub fn dropout_mask(rng: &mut RngStream, p: f64, dim: usize) -> Vec<f64> {
    assert!((0.0..1.0).contains(&p), "dropout rate {p} outside [0, 1)");
    if p == 0.0 {
        return vec![1.0; dim];
    }
    let keep = 1.0 / (1.0 - p);
    (0..dim).map(|_| if rng.uniform() < p { 0.0 } else { keep }).collect()
}

/// Applies dropout in training mode and returns the mask used; evaluation
/// mode leaves `x` untouched and draws nothing.
pub fn apply_dropout(x: &mut [f64], p: f64, mode: Mode, rng: &mut RngStream) -> Option<Vec<f64>> {
    if mode == Mode::Eval || p == 0.0 {
        return None;
    }
    let mask = dropout_mask(rng, p, x.len());
    for (v, m) in x.iter_mut().zip(&mask) {
        *v *= m;
    }
    Some(mask)
}
