//! Synthetic benchmarks of temporally warped class trajectories.
//!
//! Every class owns a smooth prototype trajectory of `L` frames. A video of the
//! class reads `T` of those frames at monotone positions that drift away from
//! uniform spacing as `warp_strength` grows, then adds Gaussian noise. Mean
//! pooling sees a different average for every warp, while an alignment over
//! frames can recover the shared trajectory.
//!
//! Class content (trajectory plus a static per-class offset) occupies a
//! low-rank subspace shared by the whole benchmark, and noise is isotropic,
//! so an embedding learned on base classes can filter noise for novel ones.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{save_manifest, write_feature_file, ClassEntry, FeatureSequence, Manifest, Split, VideoEntry};
use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, norm, Matrix};
use crate::rng::{domain, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub train_classes: usize,
    pub val_classes: usize,
    pub test_classes: usize,
    pub videos_per_class: usize,
    pub feature_dim: usize,
    pub frame_count: usize,
    pub prototype_length: usize,
    pub noise_sigma: f64,
    pub warp_strength: f64,
    pub seed: u64,
    pub pretrain_classes: usize,
    /// Standard deviation of a per-class offset added to every prototype
    /// frame. Centred trajectories average to nearly zero, so this static
    /// component is what mean pooling can pick up; 0 disables it.
    pub appearance_scale: f64,
    /// Rank of the subspace holding class content. Trajectories and offsets
    /// are drawn in this many dimensions and mapped into the feature space by
    /// a benchmark-wide orthonormal basis, while noise stays isotropic.
    /// 0, or any value >= `feature_dim`, keeps class content full rank.
    pub signal_dim: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            train_classes: 64,
            val_classes: 12,
            test_classes: 24,
            videos_per_class: 20,
            feature_dim: 32,
            frame_count: 8,
            prototype_length: 32,
            noise_sigma: 1.0,
            warp_strength: 0.5,
            seed: 0,
            pretrain_classes: 0,
            appearance_scale: 0.3,
            signal_dim: 8,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.feature_dim == 0 || self.frame_count == 0 {
            return bad("feature_dim and frame_count must be positive".into());
        }
        if self.prototype_length < self.frame_count.max(2) {
            return bad(format!(
                "prototype_length {} must be at least max(frame_count, 2) = {}",
                self.prototype_length,
                self.frame_count.max(2)
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma));
        }
        if !(self.appearance_scale >= 0.0 && self.appearance_scale.is_finite()) {
            return bad(format!(
                "appearance_scale {} must be finite and >= 0",
                self.appearance_scale
            ));
        }
        if !(0.0..=1.0).contains(&self.warp_strength) {
            return bad(format!("warp_strength {} outside [0, 1]", self.warp_strength));
        }
        if self.videos_per_class == 0 {
            return bad("videos_per_class must be positive".into());
        }
        Ok(())
    }

    pub fn benchmark_classes(&self) -> usize {
        self.train_classes + self.val_classes + self.test_classes
    }

    fn projected(&self) -> bool {
        self.signal_dim > 0 && self.signal_dim < self.feature_dim
    }

    /// `feature_dim x signal_dim` matrix with orthonormal columns shared by
    /// every class, or `None` when class content is full rank.
    pub fn mixing_basis(&self) -> Option<Matrix> {
        if !self.projected() {
            return None;
        }
        let mut rng = RngStream::new(self.seed, domain::MIXING);
        let (n, k) = (self.feature_dim, self.signal_dim);
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        while cols.len() < k {
            let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            for q in &cols {
                let d = dot(q, &v);
                axpy(-d, q, &mut v);
            }
            let len = norm(&v);
            if len > 1e-8 {
                v.iter_mut().for_each(|x| *x /= len);
                cols.push(v);
            }
        }
        Some(Matrix::from_fn(n, k, |i, j| cols[j][i]))
    }

    /// Rng stream of class `class_id`'s prototype.
    pub fn prototype_rng(&self, class_id: u32) -> RngStream {
        RngStream::new(self.seed, domain::PROTOTYPE | class_id as u64)
    }

    /// Rng stream of the `index`-th video of class `class_id`.
    pub fn video_rng(&self, class_id: u32, index: usize) -> RngStream {
        RngStream::new(self.seed, domain::VIDEO | ((class_id as u64) << 24) | index as u64)
    }
}

/// Random-walk trajectory of `length` frames with each column centred and
/// scaled to unit standard deviation.
pub fn gen_class_prototype(rng: &mut RngStream, feature_dim: usize, length: usize) -> Result<Matrix> {
    if feature_dim == 0 || length == 0 {
        return Err(Error::Config(format!(
            "prototype needs positive dims, got {length}x{feature_dim}"
        )));
    }
    let mut m = Matrix::zeros(length, feature_dim);
    for t in 0..length {
        for c in 0..feature_dim {
            let prev = if t == 0 { 0.0 } else { m[(t - 1, c)] };
            m[(t, c)] = prev + rng.normal();
        }
    }
    for c in 0..feature_dim {
        let mean = (0..length).map(|t| m[(t, c)]).sum::<f64>() / length as f64;
        let var = (0..length).map(|t| (m[(t, c)] - mean).powi(2)).sum::<f64>() / length as f64;
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for t in 0..length {
            m[(t, c)] = (m[(t, c)] - mean) * scale;
        }
    }
    Ok(m)
}

/// The trajectory videos of `class_id` are read from: the centred prototype
/// plus the class's appearance offset on every frame, mapped through
/// `basis` when one is given. The map is rescaled so a frame keeps the
/// energy of a full-rank one.
pub fn class_trajectory(spec: &GeneratorSpec, class_id: u32, basis: Option<&Matrix>) -> Result<Matrix> {
    let dim = basis.map_or(spec.feature_dim, Matrix::cols);
    let mut rng = spec.prototype_rng(class_id);
    let mut m = gen_class_prototype(&mut rng, dim, spec.prototype_length)?;
    if spec.appearance_scale > 0.0 {
        let offset: Vec<f64> = (0..dim).map(|_| spec.appearance_scale * rng.normal()).collect();
        for t in 0..m.rows() {
            axpy(1.0, &offset, m.row_mut(t));
        }
    }
    let Some(b) = basis else { return Ok(m) };
    let gain = (b.rows() as f64 / b.cols() as f64).sqrt();
    Ok(Matrix::from_fn(m.rows(), b.rows(), |t, i| {
        gain * dot(b.row(i), m.row(t))
    }))
}

/// Evenly spaced read positions over a prototype of `length` frames.
pub fn uniform_positions(frame_count: usize, length: usize) -> Vec<usize> {
    if frame_count == 1 {
        return vec![(length - 1) / 2];
    }
    let step = (length - 1) as f64 / (frame_count - 1) as f64;
    (0..frame_count)
        .map(|t| (t as f64 * step + 0.5).floor() as usize)
        .collect()
}

/// Monotone read positions: a blend of uniform spacing and a sorted random
/// subset of `0..length`. Both endpoints of the blend increase by at least one
/// per frame, so the rounded result is strictly increasing.
pub fn warped_positions(rng: &mut RngStream, frame_count: usize, length: usize, warp_strength: f64) -> Vec<usize> {
    let uniform = uniform_positions(frame_count, length);
    let mut random = rng.sample_indices(length, frame_count);
    random.sort_unstable();
    uniform
        .iter()
        .zip(&random)
        .map(|(&u, &r)| {
            let p = (1.0 - warp_strength) * u as f64 + warp_strength * r as f64;
            ((p + 0.5).floor() as usize).min(length - 1)
        })
        .collect()
}

/// Samples one video from `proto`. Warp positions are drawn before the noise,
/// so two calls on equal streams that differ only in `noise_sigma` read the
/// same prototype rows.
pub fn gen_video(
    proto: &Matrix,
    spec: &GeneratorSpec,
    rng: &mut RngStream,
    video_id: impl Into<String>,
    class_id: u32,
) -> Result<FeatureSequence> {
    let positions = warped_positions(rng, spec.frame_count, proto.rows(), spec.warp_strength);
    let mut frames = Matrix::zeros(spec.frame_count, proto.cols());
    for (t, &p) in positions.iter().enumerate() {
        let row = frames.row_mut(t);
        row.copy_from_slice(proto.row(p));
        if spec.noise_sigma > 0.0 {
            for v in row.iter_mut() {
                *v += spec.noise_sigma * rng.normal();
            }
        }
    }
    FeatureSequence::new(video_id, class_id, frames)
}

/// Output of [`gen_benchmark`].
#[derive(Debug, Clone)]
pub struct GeneratedBenchmark {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub pretrain: Option<(Manifest, PathBuf)>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PRETRAIN_MANIFEST_FILE: &str = "pretrain_manifest.json";

/// Writes every video of the benchmark (and of the disjoint pretraining
/// classes, if any) under `out_dir`, plus the manifests.
pub fn gen_benchmark(spec: &GeneratorSpec, out_dir: impl AsRef<Path>) -> Result<GeneratedBenchmark> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let video_dir = out_dir.join("videos");
    fs::create_dir_all(&video_dir).map_err(|e| Error::io(&video_dir, e))?;

    let splits = [
        (Split::Train, spec.train_classes),
        (Split::Val, spec.val_classes),
        (Split::Test, spec.test_classes),
    ];
    let mut assignments = Vec::new();
    let mut next_class = 0u32;
    for (split, n) in splits {
        for _ in 0..n {
            assignments.push((next_class, split));
            next_class += 1;
        }
    }
    let manifest = write_classes(spec, out_dir, &assignments, "class")?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    save_manifest(&manifest, &manifest_path)?;

    let pretrain = if spec.pretrain_classes > 0 {
        let assignments: Vec<_> = (0..spec.pretrain_classes)
            .map(|i| (next_class + i as u32, Split::Train))
            .collect();
        let m = write_classes(spec, out_dir, &assignments, "pretrain")?;
        let path = out_dir.join(PRETRAIN_MANIFEST_FILE);
        save_manifest(&m, &path)?;
        Some((m, path))
    } else {
        None
    };
    Ok(GeneratedBenchmark {
        manifest,
        manifest_path,
        pretrain,
    })
}

fn write_classes(
    spec: &GeneratorSpec,
    out_dir: &Path,
    assignments: &[(u32, Split)],
    name_prefix: &str,
) -> Result<Manifest> {
    let basis = spec.mixing_basis();
    let mut classes = Vec::with_capacity(assignments.len());
    let mut videos = Vec::new();
    for &(class_id, split) in assignments {
        classes.push(ClassEntry {
            class_id,
            class_name: format!("{name_prefix}_{class_id:04}"),
        });
        let proto = class_trajectory(spec, class_id, basis.as_ref())?;
        for i in 0..spec.videos_per_class {
            let video_id = format!("c{class_id:04}_v{i:04}");
            let seq = gen_video(&proto, spec, &mut spec.video_rng(class_id, i), &video_id, class_id)?;
            let rel = format!("videos/{video_id}.fsvf");
            write_feature_file(&seq, out_dir.join(&rel))?;
            videos.push(VideoEntry {
                video_id,
                class_id,
                file_path: rel,
                split,
            });
        }
    }
    Ok(Manifest {
        classes,
        videos,
        frame_count: spec.frame_count,
        feature_dim: spec.feature_dim,
        base_dir: out_dir.to_path_buf(),
    })
}
