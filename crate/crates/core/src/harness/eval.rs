use std::time::Instant;

use rayon::prelude::*;

use crate::data::SplitData;
use crate::error::{Error, Result};
use crate::harness::{mean_ci95, sample_episode, split_supports, EvalReport};
use crate::protocols::{adapt_and_predict, TrainedModel};
use crate::rng::{domain, RngStream};

/// Environment variable capping evaluation workers; `0` means serial.
pub const THREADS_ENV: &str = "FSVC_THREADS";

/// Worker cap from [`THREADS_ENV`]; `None` when unset or unparsable.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub n_way: usize,
    pub k_shot: usize,
    pub episodes: usize,
    pub seed: u64,
    /// `Some(0)` serial, `Some(n)` at most `n` workers, `None` rayon's default.
    pub threads: Option<usize>,
}

impl EvalConfig {
    pub fn new(n_way: usize, k_shot: usize, episodes: usize, seed: u64) -> Self {
        Self {
            n_way,
            k_shot,
            episodes,
            seed,
            threads: threads_from_env(),
        }
    }
}

/// Per-episode correctness, in episode order. Episode `e` samples and adapts
/// with stream `stream_base | e` of `seed`, so the vector does not depend on
/// how episodes are scheduled.
#[allow(clippy::too_many_arguments)]
pub fn episode_outcomes(
    model: &TrainedModel,
    split: &SplitData,
    n_way: usize,
    k_shot: usize,
    episodes: usize,
    seed: u64,
    stream_base: u64,
    threads: Option<usize>,
) -> Result<Vec<bool>> {
    split_supports(split, n_way, k_shot)?;
    let run = |e: usize| -> Result<bool> {
        let mut rng = RngStream::new(seed, stream_base | e as u64);
        let episode = sample_episode(split, n_way, k_shot, &mut rng)?;
        Ok(adapt_and_predict(model, &episode, &mut rng)? == episode.query.1)
    };
    match threads {
        Some(0) => (0..episodes).map(run).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| (0..episodes).into_par_iter().map(run).collect()),
        None => (0..episodes).into_par_iter().map(run).collect(),
    }
}

pub fn evaluate(model: &TrainedModel, split: &SplitData, cfg: &EvalConfig) -> Result<EvalReport> {
    if cfg.episodes == 0 {
        return Err(Error::Config("episodes must be positive".into()));
    }
    let start = Instant::now();
    let outcomes = episode_outcomes(
        model,
        split,
        cfg.n_way,
        cfg.k_shot,
        cfg.episodes,
        cfg.seed,
        domain::EPISODE,
        cfg.threads,
    )?;
    let values: Vec<f64> = outcomes.iter().map(|&ok| if ok { 1.0 } else { 0.0 }).collect();
    let (mean, ci) = mean_ci95(&values);
    Ok(EvalReport {
        method: model.config.method.to_string(),
        n_way: cfg.n_way,
        k_shot: cfg.k_shot,
        episodes: cfg.episodes,
        mean_accuracy: mean,
        ci95_halfwidth: ci,
        seed: cfg.seed,
        config_fingerprint: model.config_fingerprint(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}
