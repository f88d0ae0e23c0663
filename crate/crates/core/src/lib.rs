//! Few-shot video classification over frame-level feature sequences.
//!
//! Five methods share one per-frame affine embedding: three metric learners
//! that differ in temporal alignment (mean pooling, saliency attention,
//! hard-path DTW) and two classifier baselines that train a new head on the
//! support set, the second one initialised by imprinting normalised base
//! logits. The [`harness`] samples episodes, evaluates with deterministic
//! per-episode random streams and reports accuracy with 95% intervals.

pub mod align;
pub mod data;
pub mod error;
pub mod harness;
pub mod heads;
pub mod matrix;
pub mod protocols;
pub mod rng;
pub mod selftest;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::RngStream;
