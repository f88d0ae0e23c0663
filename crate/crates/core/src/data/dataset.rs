use std::collections::BTreeMap;
use std::sync::Arc;

use crate::data::{read_feature_file, FeatureSequence, Manifest, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ClassVideos {
    pub class_id: u32,
    pub videos: Vec<Arc<FeatureSequence>>,
}

/// Videos of one split grouped by class, ordered by class id, videos in
/// manifest order.
#[derive(Debug, Clone, Default)]
pub struct SplitData {
    pub classes: Vec<ClassVideos>,
}

impl SplitData {
    pub fn from_sequences(seqs: impl IntoIterator<Item = FeatureSequence>) -> Self {
        let mut by_class: BTreeMap<u32, Vec<Arc<FeatureSequence>>> = BTreeMap::new();
        for s in seqs {
            by_class.entry(s.class_id()).or_default().push(Arc::new(s));
        }
        Self {
            classes: by_class
                .into_iter()
                .map(|(class_id, videos)| ClassVideos { class_id, videos })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn video_count(&self) -> usize {
        self.classes.iter().map(|c| c.videos.len()).sum()
    }

    /// All videos with their class position (0-based index into `classes`).
    pub fn labeled(&self) -> Vec<(Arc<FeatureSequence>, usize)> {
        self.classes
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.videos.iter().map(move |v| (Arc::clone(v), k)))
            .collect()
    }

    pub fn class_ids(&self) -> Vec<u32> {
        self.classes.iter().map(|c| c.class_id).collect()
    }
}

/// A manifest with every feature file read into memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: SplitData,
    pub val: SplitData,
    pub test: SplitData,
    pub frame_count: usize,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn load(manifest: &Manifest) -> Result<Self> {
        let mut per_split: BTreeMap<Split, Vec<FeatureSequence>> = BTreeMap::new();
        for v in &manifest.videos {
            let path = manifest.resolve(v);
            let frames = read_feature_file(&path)?;
            if frames.shape() != (manifest.frame_count, manifest.feature_dim) {
                return Err(Error::Validation(format!(
                    "{}: shape {:?} differs from manifest ({}, {})",
                    path.display(),
                    frames.shape(),
                    manifest.frame_count,
                    manifest.feature_dim
                )));
            }
            let seq = FeatureSequence::new(v.video_id.clone(), v.class_id, frames)?;
            per_split.entry(v.split).or_default().push(seq);
        }
        let mut take = |s| SplitData::from_sequences(per_split.remove(&s).unwrap_or_default());
        Ok(Self {
            train: take(Split::Train),
            val: take(Split::Val),
            test: take(Split::Test),
            frame_count: manifest.frame_count,
            feature_dim: manifest.feature_dim,
        })
    }

    pub fn split(&self, split: Split) -> &SplitData {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// All class ids present in any split.
    pub fn all_class_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = Split::ALL.iter().flat_map(|&s| self.split(s).class_ids()).collect();
        ids.sort_unstable();
        ids
    }
}
