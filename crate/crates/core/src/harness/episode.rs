use std::sync::Arc;

use crate::data::{FeatureSequence, SplitData};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One n-way k-shot task with a single query.
#[derive(Debug, Clone)]
pub struct Episode {
    pub n_way: usize,
    pub k_shot: usize,
    /// `n_way * k_shot` supports, class-major, labelled `0..n_way`.
    pub support: Vec<(Arc<FeatureSequence>, usize)>,
    pub query: (Arc<FeatureSequence>, usize),
    /// Local label to global class id.
    pub class_map: Vec<u32>,
}

/// Checks that every class of `split` can provide `k_shot` supports and a
/// query, and that there are at least `n_way` classes.
pub fn split_supports(split: &SplitData, n_way: usize, k_shot: usize) -> Result<()> {
    if split.class_count() < n_way {
        return Err(Error::Capacity(format!(
            "{n_way}-way episodes need {n_way} classes, split has {}",
            split.class_count()
        )));
    }
    if let Some(c) = split.classes.iter().find(|c| c.videos.len() < k_shot + 1) {
        return Err(Error::Capacity(format!(
            "class {} has {} videos, {k_shot}-shot episodes need {}",
            c.class_id,
            c.videos.len(),
            k_shot + 1
        )));
    }
    Ok(())
}

/// Classes uniformly without replacement (draw order gives the local
/// labels), then the query's class, then videos per class without
/// replacement. The query is the extra video of its class.
pub fn sample_episode(split: &SplitData, n_way: usize, k_shot: usize, rng: &mut RngStream) -> Result<Episode> {
    split_supports(split, n_way, k_shot)?;
    let classes = rng.sample_indices(split.class_count(), n_way);
    let query_label = rng.below(n_way);
    let mut support = Vec::with_capacity(n_way * k_shot);
    let mut query = None;
    let mut class_map = Vec::with_capacity(n_way);
    for (label, &ci) in classes.iter().enumerate() {
        let class = &split.classes[ci];
        class_map.push(class.class_id);
        let take = if label == query_label { k_shot + 1 } else { k_shot };
        let picks = rng.sample_indices(class.videos.len(), take);
        for &v in &picks[..k_shot] {
            support.push((Arc::clone(&class.videos[v]), label));
        }
        if label == query_label {
            query = Some((Arc::clone(&class.videos[picks[k_shot]]), label));
        }
    }
    Ok(Episode {
        n_way,
        k_shot,
        support,
        query: query.expect("query class is among the sampled classes"),
        class_map,
    })
}
