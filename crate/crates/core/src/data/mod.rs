//! Domain types shared by every stage: feature sequences, the on-disk FSVF
//! format, manifests and in-memory datasets.

mod dataset;
mod fsvf;
mod manifest;
mod sequence;

pub use dataset::{ClassVideos, Dataset, SplitData};
pub use fsvf::{read_feature_file, write_feature_file, FSVF_MAGIC, FSVF_VERSION};
pub use manifest::{load_manifest, save_manifest, ClassEntry, Manifest, Split, VideoEntry};
pub use sequence::FeatureSequence;
