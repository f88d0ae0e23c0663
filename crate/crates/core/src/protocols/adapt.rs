use crate::align::mean_pool;
use crate::error::{Error, Result};
use crate::harness::Episode;
use crate::heads::{argmax, imprint, train_head, HeadTrainConfig, LinearHead};
use crate::protocols::{class_similarities, Method, MetricModel, TrainedModel};
use crate::rng::RngStream;

/// Per-class scores of the query; the prediction is their argmax.
///
/// * baseline: a fresh random head over pooled embeddings, trained on the
///   support set.
/// * baseline-plus: a head over base-classifier logits, imprinted from the
///   support logits and then fine-tuned.
/// * metric methods: the method's similarity to each class, no training.
///
/// The model is never modified.
pub fn episode_scores(model: &TrainedModel, episode: &Episode, rng: &mut RngStream) -> Result<Vec<f64>> {
    let cfg = &model.config;
    let head_cfg = HeadTrainConfig {
        iters: cfg.iters_adapt,
        lr: cfg.lr_adapt,
        dropout_p: 0.0,
    };
    let pooled = |seq: &crate::data::FeatureSequence| model.embedding.apply(&mean_pool(seq.frames()));
    match cfg.method {
        Method::Baseline => {
            let support: Vec<(Vec<f64>, usize)> = episode.support.iter().map(|(s, k)| (pooled(s), *k)).collect();
            let init = LinearHead::random(episode.n_way, model.embedding.out_dim(), rng);
            let head = train_head(&support, init, &head_cfg, rng)?;
            head.forward(&pooled(&episode.query.0))
        }
        Method::BaselinePlus => {
            let base = model
                .base_head
                .as_ref()
                .ok_or_else(|| Error::Config("baseline-plus model without base head".into()))?;
            let support = episode
                .support
                .iter()
                .map(|(s, k)| Ok((base.forward(&pooled(s))?, *k)))
                .collect::<Result<Vec<_>>>()?;
            let novel = imprint(&support, episode.n_way)?;
            let novel = if head_cfg.iters > 0 {
                train_head(&support, novel, &head_cfg, rng)?
            } else {
                novel
            };
            novel.forward(&base.forward(&pooled(&episode.query.0))?)
        }
        method => {
            let view = MetricModel {
                method,
                embedding: &model.embedding,
                saliency: model.saliency.as_ref(),
                dtw_normalize: cfg.dtw_normalize,
            };
            Ok(class_similarities(&view, episode)?.0)
        }
    }
}

pub fn adapt_and_predict(model: &TrainedModel, episode: &Episode, rng: &mut RngStream) -> Result<usize> {
    episode_scores(model, episode, rng).map(|s| argmax(&s))
}
