//! The five methods end to end: base-stage training of the shared per-frame
//! embedding (by classification or by episodes) and per-episode adaptation.

mod adapt;
mod classify;
mod config;
mod embedding;
mod meta;
mod metric;
mod model;

pub use adapt::{adapt_and_predict, episode_scores};
pub use classify::{classification_loss_and_grad, pretrain_embedding, train_classification, ClassificationGrad};
pub use config::{default_base_lr, Init, Method, MethodConfig};
pub use embedding::EmbeddingParams;
pub use meta::meta_train;
pub use metric::{
    class_similarities, cosine_with_grads, episode_loss_and_grad, EpisodeLoss, MetricGrad, MetricModel, PathMode,
};
pub use model::{TrainedModel, FSVM_MAGIC, FSVM_VERSION};

use crate::data::{Dataset, SplitData};
use crate::error::Result;
use crate::harness::{episode_outcomes, split_supports};
use crate::rng::{domain, RngStream};

/// Per-epoch record of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    /// Mean training loss of every epoch.
    pub epoch_losses: Vec<f64>,
    /// Validation accuracy after every epoch, when a validation split exists.
    pub val_accuracy: Vec<f64>,
    /// Epoch (0-based) whose weights were kept.
    pub best_epoch: usize,
}

/// Trains `cfg.method` on the train split of `data`, starting from `init`
/// when given (e.g. a pretrained embedding).
pub fn train(data: &Dataset, cfg: &MethodConfig, init: Option<EmbeddingParams>) -> Result<(TrainedModel, TrainingLog)> {
    if cfg.method.is_classifier() {
        train_classification(data, cfg, init)
    } else {
        meta_train(data, cfg, init)
    }
}

/// The embedding every run starts from when nothing is pretrained.
pub fn initial_embedding(cfg: &MethodConfig, in_dim: usize) -> EmbeddingParams {
    EmbeddingParams::random(cfg.embed_dim, in_dim, &mut RngStream::new(cfg.seed, domain::INIT))
}

/// Keeps the model with the best validation accuracy and signals when
/// patience runs out.
struct Selector<'a> {
    val: Option<&'a SplitData>,
    best: Option<(f64, TrainedModel)>,
    since_best: usize,
}

impl<'a> Selector<'a> {
    fn new(val: &'a SplitData, cfg: &MethodConfig) -> Self {
        let usable = cfg.val_episodes > 0 && split_supports(val, cfg.n_way, cfg.k_shot).is_ok();
        Self {
            val: usable.then_some(val),
            best: None,
            since_best: 0,
        }
    }

    /// Records the end of an epoch; returns `true` when training should stop.
    fn observe(&mut self, model: TrainedModel, epoch: usize, log: &mut TrainingLog) -> Result<bool> {
        let Some(val) = self.val else {
            self.best = Some((0.0, model));
            log.best_epoch = epoch;
            return Ok(false);
        };
        let cfg = model.config.clone();
        let outcomes = episode_outcomes(
            &model,
            val,
            cfg.n_way,
            cfg.k_shot,
            cfg.val_episodes,
            cfg.seed,
            domain::VALIDATION,
            crate::harness::threads_from_env(),
        )?;
        let acc = outcomes.iter().filter(|&&ok| ok).count() as f64 / outcomes.len() as f64;
        log.val_accuracy.push(acc);
        if self.best.as_ref().is_none_or(|(b, _)| acc > *b) {
            self.best = Some((acc, model));
            self.since_best = 0;
            log.best_epoch = epoch;
        } else {
            self.since_best += 1;
        }
        Ok(self.since_best >= cfg.patience.max(1))
    }

    fn finish(self, fallback: TrainedModel) -> TrainedModel {
        self.best.map_or(fallback, |(_, m)| m)
    }
}
