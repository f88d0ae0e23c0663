//! Manifest: the class list, video list and split assignment of a benchmark,
//! stored as pretty-printed JSON. Video paths are relative to the manifest's
//! directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class_id: u32,
    pub class_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: String,
    pub class_id: u32,
    pub file_path: String,
    pub split: Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub classes: Vec<ClassEntry>,
    pub videos: Vec<VideoEntry>,
    pub frame_count: usize,
    pub feature_dim: usize,
    /// Directory video paths are resolved against; set on load/save.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PartialEq for Manifest {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.videos == other.videos
            && self.frame_count == other.frame_count
            && self.feature_dim == other.feature_dim
    }
}

impl Manifest {
    pub fn resolve(&self, video: &VideoEntry) -> PathBuf {
        self.base_dir.join(&video.file_path)
    }

    /// Class ids per split, as observed through the video list.
    pub fn split_classes(&self) -> BTreeMap<Split, BTreeSet<u32>> {
        let mut out: BTreeMap<Split, BTreeSet<u32>> = BTreeMap::new();
        for v in &self.videos {
            out.entry(v.split).or_default().insert(v.class_id);
        }
        out
    }

    pub fn class_ids(&self) -> BTreeSet<u32> {
        self.classes.iter().map(|c| c.class_id).collect()
    }

    pub fn videos_in(&self, split: Split) -> impl Iterator<Item = &VideoEntry> + '_ {
        self.videos.iter().filter(move |v| v.split == split)
    }

    /// Checks every structural invariant except file existence.
    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 || self.feature_dim == 0 {
            return Err(Error::Validation(format!(
                "frame_count {} and feature_dim {} must be positive",
                self.frame_count, self.feature_dim
            )));
        }
        let mut known = BTreeSet::new();
        for c in &self.classes {
            if !known.insert(c.class_id) {
                return Err(Error::Validation(format!("class {} listed twice", c.class_id)));
            }
        }
        let mut ids = BTreeSet::new();
        for v in &self.videos {
            if !known.contains(&v.class_id) {
                return Err(Error::Validation(format!(
                    "video {} references unknown class {}",
                    v.video_id, v.class_id
                )));
            }
            if !ids.insert(v.video_id.as_str()) {
                return Err(Error::Validation(format!("video id {} listed twice", v.video_id)));
            }
        }
        let overlap = self.overlapping_classes();
        if !overlap.is_empty() {
            return Err(Error::Validation(format!(
                "classes appear in more than one split: {overlap:?}"
            )));
        }
        Ok(())
    }

    fn overlapping_classes(&self) -> Vec<u32> {
        let mut owner: BTreeMap<u32, Split> = BTreeMap::new();
        let mut bad = BTreeSet::new();
        for v in &self.videos {
            match owner.get(&v.class_id) {
                Some(&s) if s != v.split => {
                    bad.insert(v.class_id);
                }
                Some(_) => {}
                None => {
                    owner.insert(v.class_id, v.split);
                }
            }
        }
        bad.into_iter().collect()
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.into(),
        message: e.to_string(),
    })?;
    m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate()?;
    for v in &m.videos {
        let file = m.resolve(v);
        if !file.is_file() {
            return Err(Error::Manifest {
                path: path.into(),
                message: format!("video {} file {} does not exist", v.video_id, file.display()),
            });
        }
    }
    Ok(m)
}

pub fn save_manifest(m: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    m.validate()?;
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
