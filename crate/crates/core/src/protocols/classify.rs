//! Base-stage training by classification: per-frame embedding, mean pooling,
//! optional dropout, linear head over all base classes, cross-entropy.

use crate::align::mean_pool;
use crate::data::{Dataset, SplitData};
use crate::error::{Error, Result};
use crate::heads::{dropout_mask, softmax_xent, AdamConfig, AdamState, LinearHead};
use crate::protocols::{initial_embedding, EmbeddingParams, MethodConfig, Selector, TrainedModel, TrainingLog};
use crate::rng::{domain, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationGrad {
    pub embedding: EmbeddingParams,
    pub head: LinearHead,
}

/// Mean cross-entropy of a batch and its gradient. Each sample is the
/// mean-pooled *input* sequence: the embedding is affine per frame, so
/// `mean_t(W x_t + b) = W mean_t(x_t) + b`. `masks`, when given, multiply the
/// pooled embedding before the head (inverted dropout).
pub fn classification_loss_and_grad(
    embedding: &EmbeddingParams,
    head: &LinearHead,
    batch: &[(&[f64], usize)],
    masks: Option<&[Vec<f64>]>,
) -> Result<(f64, ClassificationGrad)> {
    if batch.is_empty() {
        return Err(Error::Coverage("empty batch".into()));
    }
    let mut grad = ClassificationGrad {
        embedding: embedding.zeros_like(),
        head: LinearHead::zeros(head.outputs(), head.inputs()),
    };
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (i, (pooled, label)) in batch.iter().enumerate() {
        let mut h = embedding.apply(pooled);
        let mask = masks.map(|m| &m[i]);
        if let Some(mask) = mask {
            h.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
        }
        let logits = head.forward(&h)?;
        let (l, dlogits) = softmax_xent(&logits, *label)?;
        loss += scale * l;
        grad.head.weights.add_outer(scale, &dlogits, &h);
        for (b, d) in grad.head.bias.iter_mut().zip(&dlogits) {
            *b += scale * d;
        }
        let mut dh = head.weights.matvec_t(&dlogits);
        if let Some(mask) = mask {
            dh.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
        }
        grad.embedding.accumulate(scale, &dh, pooled);
    }
    Ok((loss, grad))
}

struct Fit {
    embedding: EmbeddingParams,
    head: LinearHead,
    adam: AdamState,
    rng: RngStream,
    dropout: f64,
    batch_size: usize,
}

impl Fit {
    fn new(
        embedding: EmbeddingParams,
        head: LinearHead,
        lr: f64,
        dropout: f64,
        batch_size: usize,
        rng: RngStream,
    ) -> Self {
        let n = embedding.parameter_count() + head.parameter_count();
        Self {
            embedding,
            head,
            adam: AdamState::new(AdamConfig::with_lr(lr), n),
            rng,
            dropout,
            batch_size,
        }
    }

    /// One shuffled pass over `samples`; returns the mean batch loss.
    fn epoch(&mut self, samples: &[(Vec<f64>, usize)]) -> Result<f64> {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        self.rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(self.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|&i| (samples[i].0.as_slice(), samples[i].1)).collect();
            let masks: Option<Vec<Vec<f64>>> = (self.dropout > 0.0).then(|| {
                (0..batch.len())
                    .map(|_| dropout_mask(&mut self.rng, self.dropout, self.embedding.out_dim()))
                    .collect()
            });
            let (loss, g) = classification_loss_and_grad(&self.embedding, &self.head, &batch, masks.as_deref())?;
            self.adam.step(&mut [
                (self.embedding.weights.as_mut_slice(), g.embedding.weights.as_slice()),
                (&mut self.embedding.bias, &g.embedding.bias),
                (self.head.weights.as_mut_slice(), g.head.weights.as_slice()),
                (&mut self.head.bias, &g.head.bias),
            ])?;
            total += loss;
            batches += 1;
        }
        Ok(total / batches as f64)
    }
}

fn pooled_samples(split: &SplitData) -> Vec<(Vec<f64>, usize)> {
    split
        .labeled()
        .into_iter()
        .map(|(seq, k)| (mean_pool(seq.frames()), k))
        .collect()
}

/// Trains embedding and base head jointly on every train-split video and
/// keeps the epoch with the best validation-episode accuracy.
pub fn train_classification(
    data: &Dataset,
    cfg: &MethodConfig,
    init: Option<EmbeddingParams>,
) -> Result<(TrainedModel, TrainingLog)> {
    cfg.validate()?;
    if !cfg.method.is_classifier() {
        return Err(Error::Config(format!("{} is not a classifier method", cfg.method)));
    }
    if data.train.is_empty() {
        return Err(Error::Validation("train split is empty".into()));
    }
    let samples = pooled_samples(&data.train);
    let embedding = init.unwrap_or_else(|| initial_embedding(cfg, data.feature_dim));
    check_embedding(&embedding, cfg, data.feature_dim)?;
    let head = LinearHead::random(
        data.train.class_count(),
        cfg.embed_dim,
        &mut RngStream::new(cfg.seed, domain::INIT | 1),
    );
    let mut fit = Fit::new(
        embedding,
        head,
        cfg.lr_base,
        cfg.train_dropout(),
        cfg.batch_size,
        RngStream::new(cfg.seed, domain::TRAIN),
    );
    let mut selector = Selector::new(&data.val, cfg);
    let mut log = TrainingLog::default();
    let mut last = None;
    for epoch in 0..cfg.epochs {
        log.epoch_losses.push(fit.epoch(&samples)?);
        let model = TrainedModel::new(cfg.clone(), fit.embedding.clone(), Some(fit.head.clone()), None)?;
        last = Some(model.clone());
        if selector.observe(model, epoch, &mut log)? {
            break;
        }
    }
    let fallback = match last {
        Some(m) => m,
        None => TrainedModel::new(cfg.clone(), fit.embedding, Some(fit.head), None)?,
    };
    Ok((selector.finish(fallback), log))
}

pub(crate) fn check_embedding(e: &EmbeddingParams, cfg: &MethodConfig, in_dim: usize) -> Result<()> {
    if e.out_dim() != cfg.embed_dim || e.in_dim() != in_dim {
        return Err(Error::Shape(format!(
            "initial embedding {:?}, expected ({}, {in_dim})",
            e.weights.shape(),
            cfg.embed_dim
        )));
    }
    Ok(())
}

/// Trains an embedding by classification over the pretraining classes and
/// returns it without the head. The pretraining classes must not appear in
/// `benchmark_classes`. With no pretraining classes this is the same random
/// initialisation a scratch run uses.
pub fn pretrain_embedding(
    pretrain: &Dataset,
    benchmark_classes: &[u32],
    cfg: &MethodConfig,
) -> Result<EmbeddingParams> {
    let mut leaked: Vec<u32> = pretrain
        .all_class_ids()
        .into_iter()
        .filter(|c| benchmark_classes.contains(c))
        .collect();
    leaked.dedup();
    if !leaked.is_empty() {
        return Err(Error::Leakage(leaked));
    }
    let embedding = initial_embedding(cfg, pretrain.feature_dim);
    let split = &pretrain.train;
    if split.is_empty() {
        return Ok(embedding);
    }
    let samples = pooled_samples(split);
    let head = LinearHead::random(
        split.class_count(),
        cfg.embed_dim,
        &mut RngStream::new(cfg.seed, domain::PRETRAIN | 1),
    );
    let mut fit = Fit::new(
        embedding,
        head,
        1e-3,
        0.0,
        cfg.batch_size,
        RngStream::new(cfg.seed, domain::PRETRAIN),
    );
    for _ in 0..cfg.pretrain_epochs {
        fit.epoch(&samples)?;
    }
    Ok(fit.embedding)
}
