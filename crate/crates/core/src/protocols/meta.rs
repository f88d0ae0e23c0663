//! Episodic training of the metric methods: one Adam step per sampled
//! episode on the cross-entropy over temperature-scaled similarities.

use crate::align::SaliencyParams;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::harness::sample_episode;
use crate::heads::{AdamConfig, AdamState};
use crate::protocols::classify::check_embedding;
use crate::protocols::{
    episode_loss_and_grad, initial_embedding, EmbeddingParams, Method, MethodConfig, MetricModel, PathMode, Selector,
    TrainedModel, TrainingLog,
};
use crate::rng::{domain, RngStream};

/// Meta-trains `cfg.method`. otam-lite gradients treat each episode's DTW
/// path as fixed.
pub fn meta_train(
    data: &Dataset,
    cfg: &MethodConfig,
    init: Option<EmbeddingParams>,
) -> Result<(TrainedModel, TrainingLog)> {
    cfg.validate()?;
    if cfg.method.is_classifier() {
        return Err(Error::Config(format!("{} is not a metric method", cfg.method)));
    }
    if data.train.class_count() < cfg.n_way {
        return Err(Error::Capacity(format!(
            "train split has {} classes, {}-way episodes need {}",
            data.train.class_count(),
            cfg.n_way,
            cfg.n_way
        )));
    }
    let mut embedding = init.unwrap_or_else(|| initial_embedding(cfg, data.feature_dim));
    check_embedding(&embedding, cfg, data.feature_dim)?;
    let mut saliency =
        (cfg.method == Method::CmnLite).then(|| SaliencyParams::zeros(cfg.saliency_heads, cfg.embed_dim));
    let n_params = embedding.parameter_count() + saliency.as_ref().map_or(0, |s| s.queries.as_slice().len());
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr_base), n_params);

    let mut selector = Selector::new(&data.val, cfg);
    let mut log = TrainingLog::default();
    let mut last = None;
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for i in 0..cfg.episodes_per_epoch {
            let index = (epoch * cfg.episodes_per_epoch + i) as u64;
            let mut rng = RngStream::new(cfg.seed, domain::TRAIN | index);
            let episode = sample_episode(&data.train, cfg.n_way, cfg.k_shot, &mut rng)?;
            let view = MetricModel {
                method: cfg.method,
                embedding: &embedding,
                saliency: saliency.as_ref(),
                dtw_normalize: cfg.dtw_normalize,
            };
            let out = episode_loss_and_grad(&view, &episode, cfg.temperature, PathMode::Optimal)?;
            total += out.loss;
            let g = out.grad;
            match (&mut saliency, &g.saliency) {
                (Some(s), Some(gs)) => adam.step(&mut [
                    (embedding.weights.as_mut_slice(), g.embedding.weights.as_slice()),
                    (&mut embedding.bias, &g.embedding.bias),
                    (s.queries.as_mut_slice(), gs.as_slice()),
                ])?,
                _ => adam.step(&mut [
                    (embedding.weights.as_mut_slice(), g.embedding.weights.as_slice()),
                    (&mut embedding.bias, &g.embedding.bias),
                ])?,
            }
        }
        log.epoch_losses.push(total / cfg.episodes_per_epoch.max(1) as f64);
        let model = TrainedModel::new(cfg.clone(), embedding.clone(), None, saliency.clone())?;
        last = Some(model.clone());
        if selector.observe(model, epoch, &mut log)? {
            break;
        }
    }
    let fallback = match last {
        Some(m) => m,
        None => TrainedModel::new(cfg.clone(), embedding, None, saliency)?,
    };
    Ok((selector.finish(fallback), log))
}
