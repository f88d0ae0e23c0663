//! Episode scoring for the three metric methods, with gradients of the
//! episodic cross-entropy with respect to the embedding (and the saliency
//! queries for cmn-lite).
//!
//! Class representatives for `k > 1`: meta-baseline averages mean-pooled
//! support embeddings, cmn-lite averages support descriptors, otam-lite
//! averages the per-support alignment similarities.

use crate::align::mean_pool;
use crate::align::{otam_alignment, pool_with_attention, saliency_attention, AlignmentPath, SaliencyParams};
use crate::error::{Error, Result};
use crate::harness::Episode;
use crate::heads::softmax_xent;
use crate::matrix::{axpy, dot, norm, Matrix};
use crate::protocols::{EmbeddingParams, Method};

/// Borrowed view of everything a metric method scores with.
#[derive(Debug, Clone, Copy)]
pub struct MetricModel<'a> {
    pub method: Method,
    pub embedding: &'a EmbeddingParams,
    pub saliency: Option<&'a SaliencyParams>,
    pub dtw_normalize: bool,
}

/// How otam-lite obtains its alignment paths.
#[derive(Debug, Clone, Copy)]
pub enum PathMode<'a> {
    /// Run DTW on the current embeddings.
    Optimal,
    /// Reuse the given paths, one per support in episode order.
    Frozen(&'a [AlignmentPath]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricGrad {
    pub embedding: EmbeddingParams,
    pub saliency: Option<Matrix>,
}

#[derive(Debug, Clone)]
pub struct EpisodeLoss {
    pub loss: f64,
    /// Unscaled class similarities, indexed by local label.
    pub similarities: Vec<f64>,
    pub grad: MetricGrad,
    /// otam-lite alignment paths, one per support; empty for other methods.
    pub paths: Vec<AlignmentPath>,
}

/// Similarity of the query to every class, plus the otam-lite paths used.
pub fn class_similarities(model: &MetricModel<'_>, episode: &Episode) -> Result<(Vec<f64>, Vec<AlignmentPath>)> {
    let fwd = Forward::run(model, episode, PathMode::Optimal)?;
    Ok((fwd.sims, fwd.paths))
}

/// Cross-entropy over `temperature`-scaled similarities and its gradient.
pub fn episode_loss_and_grad(
    model: &MetricModel<'_>,
    episode: &Episode,
    temperature: f64,
    paths: PathMode<'_>,
) -> Result<EpisodeLoss> {
    let fwd = Forward::run(model, episode, paths)?;
    let logits: Vec<f64> = fwd.sims.iter().map(|s| temperature * s).collect();
    let (loss, dlogits) = softmax_xent(&logits, episode.query.1)?;
    let dsims: Vec<f64> = dlogits.iter().map(|g| temperature * g).collect();
    let grad = fwd.backward(model, &dsims)?;
    Ok(EpisodeLoss {
        loss,
        similarities: fwd.sims,
        grad,
        paths: fwd.paths,
    })
}

/// `(cos, d cos/da, d cos/db)`.
pub fn cosine_with_grads(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate(format!(
            "cosine with zero-norm vector (norms {na}, {nb})"
        )));
    }
    let inv = 1.0 / (na * nb);
    let c = dot(a, b) * inv;
    let da = a.iter().zip(b).map(|(x, y)| y * inv - c * x / (na * na)).collect();
    let db = a.iter().zip(b).map(|(x, y)| x * inv - c * y / (nb * nb)).collect();
    Ok((c, da, db))
}

struct Forward<'e> {
    /// Query first, then supports in episode order.
    frames: Vec<&'e Matrix>,
    embedded: Vec<Matrix>,
    /// Support positions per local label.
    groups: Vec<Vec<usize>>,
    sims: Vec<f64>,
    paths: Vec<AlignmentPath>,
    pooled: Vec<Vec<f64>>,
    prototypes: Vec<Vec<f64>>,
    attention: Vec<Matrix>,
    descriptors: Vec<Matrix>,
    representatives: Vec<Matrix>,
}

impl<'e> Forward<'e> {
    fn run(model: &MetricModel<'_>, episode: &'e Episode, paths: PathMode<'_>) -> Result<Self> {
        let frames: Vec<&Matrix> = std::iter::once(episode.query.0.frames())
            .chain(episode.support.iter().map(|(s, _)| s.frames()))
            .collect();
        let embedded = frames
            .iter()
            .map(|x| model.embedding.embed(x))
            .collect::<Result<Vec<_>>>()?;
        let mut groups = vec![Vec::new(); episode.n_way];
        for (j, (_, label)) in episode.support.iter().enumerate() {
            groups
                .get_mut(*label)
                .ok_or_else(|| Error::Coverage(format!("support label {label} outside task")))?
                .push(j);
        }
        if let Some(c) = groups.iter().position(Vec::is_empty) {
            return Err(Error::Coverage(format!("class {c} has no support sample")));
        }
        let mut fwd = Forward {
            frames,
            embedded,
            groups,
            sims: Vec::new(),
            paths: Vec::new(),
            pooled: Vec::new(),
            prototypes: Vec::new(),
            attention: Vec::new(),
            descriptors: Vec::new(),
            representatives: Vec::new(),
        };
        match model.method {
            Method::MetaBaseline => fwd.mean_pool_scores()?,
            Method::CmnLite => {
                let params = model
                    .saliency
                    .ok_or_else(|| Error::Config("cmn-lite needs saliency parameters".into()))?;
                fwd.saliency_scores(params)?
            }
            Method::OtamLite => fwd.alignment_scores(model.dtw_normalize, paths)?,
            m => return Err(Error::Config(format!("{m} is not a metric method"))),
        }
        Ok(fwd)
    }

    fn mean_pool_scores(&mut self) -> Result<()> {
        self.pooled = self.embedded.iter().map(mean_pool).collect();
        let query = &self.pooled[0];
        for group in &self.groups {
            let mut proto = vec![0.0; query.len()];
            for &j in group {
                axpy(1.0 / group.len() as f64, &self.pooled[1 + j], &mut proto);
            }
            self.sims.push(crate::align::cosine(query, &proto)?);
            self.prototypes.push(proto);
        }
        Ok(())
    }

    fn saliency_scores(&mut self, params: &SaliencyParams) -> Result<()> {
        for y in &self.embedded {
            let att = saliency_attention(y, params)?;
            self.descriptors.push(pool_with_attention(&att, y));
            self.attention.push(att);
        }
        let (heads, dim) = self.descriptors[0].shape();
        for group in &self.groups {
            let mut rep = Matrix::zeros(heads, dim);
            for &j in group {
                axpy(
                    1.0 / group.len() as f64,
                    self.descriptors[1 + j].as_slice(),
                    rep.as_mut_slice(),
                );
            }
            self.sims
                .push(crate::align::descriptor_similarity(&self.descriptors[0], &rep)?);
            self.representatives.push(rep);
        }
        Ok(())
    }

    fn alignment_scores(&mut self, normalize: bool, mode: PathMode<'_>) -> Result<()> {
        let n_support = self.embedded.len() - 1;
        let query = &self.embedded[0];
        let mut per_support = Vec::with_capacity(n_support);
        match mode {
            PathMode::Optimal => {
                for s in &self.embedded[1..] {
                    let (sim, path) = otam_alignment(query, s, normalize)?;
                    per_support.push(sim);
                    self.paths.push(path);
                }
            }
            PathMode::Frozen(paths) => {
                if paths.len() != n_support {
                    return Err(Error::Shape(format!(
                        "{} frozen paths for {n_support} supports",
                        paths.len()
                    )));
                }
                for (s, path) in self.embedded[1..].iter().zip(paths) {
                    if !path.is_admissible(query.rows(), s.rows()) {
                        return Err(Error::Validation(format!(
                            "frozen path is not admissible for {}x{}",
                            query.rows(),
                            s.rows()
                        )));
                    }
                    let mut cost = 0.0;
                    for &(a, b) in path.steps() {
                        cost += 1.0 - crate::align::cosine(query.row(a), s.row(b))?;
                    }
                    let len = if normalize { path.len() as f64 } else { 1.0 };
                    per_support.push(-cost / len);
                    self.paths.push(path.clone());
                }
            }
        }
        for group in &self.groups {
            let mean = group.iter().map(|&j| per_support[j]).sum::<f64>() / group.len() as f64;
            self.sims.push(mean);
        }
        Ok(())
    }

    fn backward(&self, model: &MetricModel<'_>, dsims: &[f64]) -> Result<MetricGrad> {
        let mut grad = MetricGrad {
            embedding: model.embedding.zeros_like(),
            saliency: None,
        };
        match model.method {
            Method::MetaBaseline => {
                let mut dpooled = vec![vec![0.0; self.pooled[0].len()]; self.pooled.len()];
                for (c, group) in self.groups.iter().enumerate() {
                    let (_, dq, dp) = cosine_with_grads(&self.pooled[0], &self.prototypes[c])?;
                    axpy(dsims[c], &dq, &mut dpooled[0]);
                    for &j in group {
                        axpy(dsims[c] / group.len() as f64, &dp, &mut dpooled[1 + j]);
                    }
                }
                // y = W x + b per frame, so the pooled embedding's gradient
                // reaches W through the pooled input.
                for (dh, x) in dpooled.iter().zip(&self.frames) {
                    grad.embedding.accumulate(1.0, dh, &mean_pool(x));
                }
            }
            Method::CmnLite => {
                let params = model.saliency.expect("checked in forward");
                let heads = params.heads() as f64;
                let shape = self.descriptors[0].shape();
                let mut ddesc = vec![Matrix::zeros(shape.0, shape.1); self.descriptors.len()];
                for (c, group) in self.groups.iter().enumerate() {
                    for s in 0..shape.0 {
                        let (_, dq, dr) =
                            cosine_with_grads(self.descriptors[0].row(s), self.representatives[c].row(s))?;
                        axpy(dsims[c] / heads, &dq, ddesc[0].row_mut(s));
                        for &j in group {
                            let w = dsims[c] / (heads * group.len() as f64);
                            axpy(w, &dr, ddesc[1 + j].row_mut(s));
                        }
                    }
                }
                let mut dqueries = Matrix::zeros(params.queries.rows(), params.queries.cols());
                for (i, embedded) in self.embedded.iter().enumerate() {
                    let dy = saliency_backward(params, embedded, &self.attention[i], &ddesc[i], &mut dqueries);
                    grad.embedding.accumulate_frames(&dy, self.frames[i]);
                }
                grad.saliency = Some(dqueries);
            }
            Method::OtamLite => {
                let query = &self.embedded[0];
                let mut dy: Vec<Matrix> = self
                    .embedded
                    .iter()
                    .map(|y| Matrix::zeros(y.rows(), y.cols()))
                    .collect();
                for (c, group) in self.groups.iter().enumerate() {
                    for &j in group {
                        let path = &self.paths[j];
                        let len = if model.dtw_normalize { path.len() as f64 } else { 1.0 };
                        // sim_j = (Σ cos - |path|) / len
                        let w = dsims[c] / (group.len() as f64 * len);
                        let support = &self.embedded[1 + j];
                        for &(a, b) in path.steps() {
                            let (_, dq, ds) = cosine_with_grads(query.row(a), support.row(b))?;
                            axpy(w, &dq, dy[0].row_mut(a));
                            axpy(w, &ds, dy[1 + j].row_mut(b));
                        }
                    }
                }
                for (d, x) in dy.iter().zip(&self.frames) {
                    grad.embedding.accumulate_frames(d, x);
                }
            }
            m => return Err(Error::Config(format!("{m} is not a metric method"))),
        }
        Ok(grad)
    }
}

/// Back-propagates a descriptor gradient through attention pooling. Returns
/// the gradient with respect to the embedded frames and adds the query
/// gradient into `dqueries`.
fn saliency_backward(
    params: &SaliencyParams,
    y: &Matrix,
    att: &Matrix,
    ddesc: &Matrix,
    dqueries: &mut Matrix,
) -> Matrix {
    let mut dy = Matrix::zeros(y.rows(), y.cols());
    for s in 0..att.rows() {
        let dr = ddesc.row(s);
        let a = att.row(s);
        let dweights: Vec<f64> = y.iter_rows().map(|yt| dot(dr, yt)).collect();
        let mean: f64 = a.iter().zip(&dweights).map(|(p, d)| p * d).sum();
        let u = params.queries.row(s).to_vec();
        for t in 0..y.rows() {
            // through the weighted sum
            axpy(a[t], dr, dy.row_mut(t));
            // through the softmax and the score scale * u . y_t
            let dscore = a[t] * (dweights[t] - mean) * params.scale;
            axpy(dscore, &u, dy.row_mut(t));
            axpy(dscore, y.row(t), dqueries.row_mut(s));
        }
    }
    dy
}
