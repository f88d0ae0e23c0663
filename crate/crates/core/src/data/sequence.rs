use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One video's per-frame features: `T` rows (time) by `C_in` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    video_id: String,
    class_id: u32,
    frames: Matrix,
}

impl FeatureSequence {
    pub fn new(video_id: impl Into<String>, class_id: u32, frames: Matrix) -> Result<Self> {
        let video_id = video_id.into();
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(Error::Validation(format!(
                "sequence {video_id} has empty shape {:?}",
                frames.shape()
            )));
        }
        if let Some(pos) = frames.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "sequence {video_id} has non-finite value at frame {}, dim {}",
                pos / frames.cols(),
                pos % frames.cols()
            )));
        }
        Ok(Self {
            video_id,
            class_id,
            frames,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.frames.cols()
    }
}
