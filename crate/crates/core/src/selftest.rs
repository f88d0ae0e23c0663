//! Internal consistency checks behind `fsvc selftest`: the DTW recurrence
//! against path enumeration, analytic gradients against central finite
//! differences, and imprinting against nearest-template cosine.

use std::sync::Arc;

use crate::align::{cosine, dtw, dtw_bruteforce, mean_pool, DistanceMatrix, SaliencyParams};
use crate::data::FeatureSequence;
use crate::harness::Episode;
use crate::heads::{argmax, imprint, LinearHead};
use crate::matrix::Matrix;
use crate::protocols::{
    classification_loss_and_grad, episode_loss_and_grad, EmbeddingParams, Method, MetricModel, PathMode,
};
use crate::rng::RngStream;

pub type Check = (&'static str, std::result::Result<(), String>);

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;

pub fn run() -> Vec<Check> {
    vec![
        ("dtw matches exhaustive enumeration", dtw_oracle(200)),
        ("classification gradient", classification_gradient(10)),
        ("meta-baseline gradient", metric_gradient(Method::MetaBaseline, 10)),
        ("cmn-lite gradient", metric_gradient(Method::CmnLite, 10)),
        (
            "otam-lite gradient (frozen path)",
            metric_gradient(Method::OtamLite, 10),
        ),
        ("imprint argmax equals nearest template", imprint_equivalence(200)),
    ]
}

fn dtw_oracle(cases: u64) -> Result<(), String> {
    for case in 0..cases {
        let mut rng = RngStream::new(case, 0);
        let (r, c) = (2 + rng.below(3), 2 + rng.below(3));
        let d = DistanceMatrix::new(Matrix::from_fn(r, c, |_, _| rng.uniform_range(0.0, 2.0)))
            .map_err(|e| e.to_string())?;
        let (cost, path) = dtw(&d);
        let brute = dtw_bruteforce(&d).map_err(|e| e.to_string())?;
        if (cost - brute).abs() > 1e-9 || !path.is_admissible(r, c) {
            return Err(format!("case {case}: dtw {cost} vs enumeration {brute}"));
        }
    }
    Ok(())
}

/// Relative error `|a - n| / max(|a|, |n|)` over a whole gradient vector.
fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = crate::matrix::norm(analytic)
        .max(crate::matrix::norm(numeric))
        .max(1e-12);
    diff / scale
}

fn central_difference(params: &mut [f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + FD_STEP;
            let up = loss(params);
            params[i] = orig - FD_STEP;
            let down = loss(params);
            params[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn random_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

fn classification_gradient(points: u64) -> Result<(), String> {
    let (c_in, dim, classes, t) = (5, 4, 3, 4);
    for p in 0..points {
        let mut rng = RngStream::new(p, 1);
        let emb = EmbeddingParams {
            bias: (0..dim).map(|_| rng.normal()).collect(),
            ..EmbeddingParams::random(dim, c_in, &mut rng)
        };
        let head = LinearHead::random(classes, dim, &mut rng);
        let pooled: Vec<(Vec<f64>, usize)> = (0..6)
            .map(|i| (mean_pool(&random_matrix(t, c_in, &mut rng)), i % classes))
            .collect();
        let batch: Vec<(&[f64], usize)> = pooled.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let (_, g) = classification_loss_and_grad(&emb, &head, &batch, None).map_err(|e| e.to_string())?;
        let mut flat: Vec<f64> = emb.weights.as_slice().to_vec();
        flat.extend_from_slice(&emb.bias);
        let numeric = central_difference(&mut flat, |v| {
            let e = EmbeddingParams {
                weights: Matrix::from_vec(dim, c_in, v[..dim * c_in].to_vec()).unwrap(),
                bias: v[dim * c_in..].to_vec(),
            };
            classification_loss_and_grad(&e, &head, &batch, None).unwrap().0
        });
        let mut analytic = g.embedding.weights.as_slice().to_vec();
        analytic.extend_from_slice(&g.embedding.bias);
        let err = relative_error(&analytic, &numeric);
        if err >= FD_TOL {
            return Err(format!("point {p}: relative error {err:e}"));
        }
    }
    Ok(())
}

fn random_episode(rng: &mut RngStream, n_way: usize, k_shot: usize, t: usize, c_in: usize) -> Episode {
    let mut seq = |label: usize, id: String| {
        Arc::new(FeatureSequence::new(id, label as u32, random_matrix(t, c_in, rng)).unwrap())
    };
    let support = (0..n_way)
        .flat_map(|k| (0..k_shot).map(move |s| (k, s)))
        .map(|(k, s)| (seq(k, format!("s{k}_{s}")), k))
        .collect();
    let query_label = 1;
    Episode {
        n_way,
        k_shot,
        support,
        query: (seq(query_label, "q".into()), query_label),
        class_map: (0..n_way as u32).collect(),
    }
}

fn metric_gradient(method: Method, points: u64) -> Result<(), String> {
    let (c_in, dim, t, heads) = (5, 4, 4, 2);
    for p in 0..points {
        let mut rng = RngStream::new(p, 2);
        let emb = EmbeddingParams {
            bias: (0..dim).map(|_| 0.3 * rng.normal()).collect(),
            ..EmbeddingParams::random(dim, c_in, &mut rng)
        };
        let saliency = (method == Method::CmnLite).then(|| SaliencyParams::new(random_matrix(heads, dim, &mut rng)));
        let episode = random_episode(&mut rng, 3, 2, t, c_in);
        let view = MetricModel {
            method,
            embedding: &emb,
            saliency: saliency.as_ref(),
            dtw_normalize: false,
        };
        let out = episode_loss_and_grad(&view, &episode, 5.0, PathMode::Optimal).map_err(|e| e.to_string())?;
        let paths = out.paths.clone();
        let mut flat: Vec<f64> = emb.weights.as_slice().to_vec();
        flat.extend_from_slice(&emb.bias);
        if let Some(s) = &saliency {
            flat.extend_from_slice(s.queries.as_slice());
        }
        let numeric = central_difference(&mut flat, |v| {
            let e = EmbeddingParams {
                weights: Matrix::from_vec(dim, c_in, v[..dim * c_in].to_vec()).unwrap(),
                bias: v[dim * c_in..dim * c_in + dim].to_vec(),
            };
            let s = saliency
                .as_ref()
                .map(|_| SaliencyParams::new(Matrix::from_vec(heads, dim, v[dim * c_in + dim..].to_vec()).unwrap()));
            let view = MetricModel {
                method,
                embedding: &e,
                saliency: s.as_ref(),
                dtw_normalize: false,
            };
            episode_loss_and_grad(&view, &episode, 5.0, PathMode::Frozen(&paths))
                .unwrap()
                .loss
        });
        let mut analytic = out.grad.embedding.weights.as_slice().to_vec();
        analytic.extend_from_slice(&out.grad.embedding.bias);
        if let Some(gs) = &out.grad.saliency {
            analytic.extend_from_slice(gs.as_slice());
        }
        let err = relative_error(&analytic, &numeric);
        if err >= FD_TOL {
            return Err(format!("point {p}: relative error {err:e}"));
        }
    }
    Ok(())
}

fn imprint_equivalence(episodes: u64) -> Result<(), String> {
    for e in 0..episodes {
        let mut rng = RngStream::new(e, 3);
        let dim = 2 + rng.below(10);
        let n_way = 2 + rng.below(6);
        let support: Vec<(Vec<f64>, usize)> = (0..n_way)
            .map(|k| ((0..dim).map(|_| rng.normal()).collect(), k))
            .collect();
        let head = imprint(&support, n_way).map_err(|e| e.to_string())?;
        let query: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let by_head = argmax(&head.forward(&query).map_err(|e| e.to_string())?);
        let cosines = support
            .iter()
            .map(|(z, _)| cosine(z, &query))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        if by_head != argmax(&cosines) {
            return Err(format!("episode {e}: head {by_head} vs cosine {}", argmax(&cosines)));
        }
    }
    Ok(())
}
