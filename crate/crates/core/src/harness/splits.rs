use std::collections::{BTreeMap, BTreeSet};

use crate::data::{Manifest, Split};
use crate::error::{Error, Result};
use crate::rng::{domain, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitRequest {
    pub train_classes: usize,
    pub val_classes: usize,
    pub test_classes: usize,
    /// Most videos kept per training class; `None` keeps all of them.
    pub train_cap: Option<usize>,
    pub seed: u64,
}

/// Reassigns the classes of `full` (its own split labels are ignored) to
/// disjoint train/val/test sets and optionally caps training videos per
/// class. Classes beyond the requested total are dropped, and so are their
/// videos. Kept videos stay in manifest order.
pub fn build_splits(full: &Manifest, req: &SplitRequest) -> Result<Manifest> {
    let mut class_ids: Vec<u32> = full.class_ids().into_iter().collect();
    let wanted = req.train_classes + req.val_classes + req.test_classes;
    if class_ids.len() < wanted {
        return Err(Error::Capacity(format!(
            "requested {wanted} classes, manifest has {}",
            class_ids.len()
        )));
    }
    let mut rng = RngStream::new(req.seed, domain::SPLITS);
    rng.shuffle(&mut class_ids);
    let mut assign: BTreeMap<u32, Split> = BTreeMap::new();
    let counts = [
        (Split::Train, req.train_classes),
        (Split::Val, req.val_classes),
        (Split::Test, req.test_classes),
    ];
    let mut it = class_ids.into_iter();
    for (split, n) in counts {
        for c in it.by_ref().take(n) {
            assign.insert(c, split);
        }
    }

    let mut keep: BTreeSet<usize> = BTreeSet::new();
    let mut per_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, v) in full.videos.iter().enumerate() {
        if assign.contains_key(&v.class_id) {
            per_class.entry(v.class_id).or_default().push(i);
        }
    }
    for (class_id, idx) in per_class {
        let cap = match (assign[&class_id], req.train_cap) {
            (Split::Train, Some(cap)) => cap.min(idx.len()),
            _ => idx.len(),
        };
        if cap == idx.len() {
            keep.extend(idx);
        } else {
            keep.extend(rng.sample_indices(idx.len(), cap).into_iter().map(|k| idx[k]));
        }
    }

    let videos = keep
        .into_iter()
        .map(|i| {
            let mut v = full.videos[i].clone();
            v.split = assign[&v.class_id];
            v
        })
        .collect();
    let classes = full
        .classes
        .iter()
        .filter(|c| assign.contains_key(&c.class_id))
        .cloned()
        .collect();
    let out = Manifest {
        classes,
        videos,
        frame_count: full.frame_count,
        feature_dim: full.feature_dim,
        base_dir: full.base_dir.clone(),
    };
    out.validate()?;
    Ok(out)
}
