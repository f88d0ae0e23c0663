use crate::error::{Error, Result};
use crate::heads::{apply_dropout, softmax_xent, AdamConfig, AdamState, LinearHead, Mode};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadTrainConfig {
    pub iters: usize,
    pub lr: f64,
    pub dropout_p: f64,
}

/// Mean cross-entropy over `samples` and its gradient as a head-shaped value.
pub fn head_loss_and_grad(head: &LinearHead, samples: &[(Vec<f64>, usize)]) -> Result<(f64, LinearHead)> {
    let mut grad = LinearHead::zeros(head.outputs(), head.inputs());
    let mut loss = 0.0;
    let scale = 1.0 / samples.len() as f64;
    for (x, label) in samples {
        let logits = head.forward(x)?;
        let (l, dlogits) = softmax_xent(&logits, *label)?;
        loss += l * scale;
        grad.weights.add_outer(scale, &dlogits, x);
        for (b, d) in grad.bias.iter_mut().zip(&dlogits) {
            *b += scale * d;
        }
    }
    Ok((loss, grad))
}

/// Full-batch Adam on mean softmax cross-entropy for exactly `cfg.iters`
/// steps. Inputs are dropped out afresh at each step when `dropout_p > 0`.
pub fn train_head(
    samples: &[(Vec<f64>, usize)],
    init: LinearHead,
    cfg: &HeadTrainConfig,
    rng: &mut RngStream,
) -> Result<LinearHead> {
    if samples.is_empty() {
        return Err(Error::Coverage("no training samples".into()));
    }
    let mut seen = vec![false; init.outputs()];
    for (x, label) in samples {
        if x.len() != init.inputs() {
            return Err(Error::Shape(format!(
                "sample of length {} for head {:?}",
                x.len(),
                init.weights.shape()
            )));
        }
        match seen.get_mut(*label) {
            Some(s) => *s = true,
            None => {
                return Err(Error::Coverage(format!(
                    "label {label} outside {}-class head",
                    init.outputs()
                )))
            }
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Coverage(format!("class {k} has no training sample")));
    }

    let mut head = init;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), head.parameter_count());
    let mut batch = samples.to_vec();
    for _ in 0..cfg.iters {
        if cfg.dropout_p > 0.0 {
            for ((x, _), (orig, _)) in batch.iter_mut().zip(samples) {
                x.copy_from_slice(orig);
                apply_dropout(x, cfg.dropout_p, Mode::Train, rng);
            }
        }
        let (_, grad) = head_loss_and_grad(&head, &batch)?;
        adam.step(&mut [
            (head.weights.as_mut_slice(), grad.weights.as_slice()),
            (&mut head.bias, &grad.bias),
        ])?;
    }
    Ok(head)
}
