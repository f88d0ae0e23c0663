use std::collections::BTreeSet;

use fsvc::align::{cosine, mean_pool, otam_similarity};
use fsvc::data::{load_manifest, Split};
use fsvc::synth::{class_trajectory, gen_benchmark, gen_video, GeneratorSpec};
use fsvc::{Matrix, RngStream};

fn spec(noise_sigma: f64, warp_strength: f64) -> GeneratorSpec {
    GeneratorSpec {
        noise_sigma,
        warp_strength,
        seed: 17,
        ..GeneratorSpec::default()
    }
}

fn trajectory(spec: &GeneratorSpec, class_id: u32) -> Matrix {
    class_trajectory(spec, class_id, spec.mixing_basis().as_ref()).unwrap()
}

#[test]
fn noise_energy_matches_sigma() {
    let noisy = spec(0.1, 0.5);
    let clean = spec(0.0, 0.5);
    let proto = trajectory(&noisy, 0);
    let mut total = 0.0;
    for i in 0..1000 {
        let a = gen_video(&proto, &noisy, &mut noisy.video_rng(0, i), "a", 0).unwrap();
        let b = gen_video(&proto, &clean, &mut clean.video_rng(0, i), "b", 0).unwrap();
        total += a.frames().frobenius_distance(b.frames()).powi(2);
    }
    let msd = total / 1000.0;
    let expected = 0.01 * 32.0 * 8.0;
    assert!((msd / expected - 1.0).abs() < 0.2, "msd {msd}, expected {expected}");
}

#[test]
fn warped_noiseless_frames_are_ordered_prototype_rows() {
    let s = spec(0.0, 0.8);
    let proto = trajectory(&s, 3);
    for i in 0..200 {
        let v = gen_video(&proto, &s, &mut s.video_rng(3, i), "v", 3).unwrap();
        let idx: Vec<usize> = v
            .frames()
            .iter_rows()
            .map(|f| {
                (0..proto.rows())
                    .find(|&p| proto.row(p) == f)
                    .expect("frame not in prototype")
            })
            .collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]), "{idx:?}");
    }
}

#[test]
fn pooled_features_separate_classes() {
    let s = spec(0.05, 0.5);
    let pooled: Vec<Vec<Vec<f64>>> = (0..6u32)
        .map(|c| {
            let proto = trajectory(&s, c);
            (0..10)
                .map(|i| mean_pool(gen_video(&proto, &s, &mut s.video_rng(c, i), "v", c).unwrap().frames()))
                .collect()
        })
        .collect();
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for (a, va) in pooled.iter().enumerate() {
        for (b, vb) in pooled.iter().enumerate() {
            for (i, x) in va.iter().enumerate() {
                for (j, y) in vb.iter().enumerate() {
                    if (a, i) < (b, j) {
                        let c = cosine(x, y).unwrap();
                        if a == b {
                            within.push(c)
                        } else {
                            between.push(c)
                        }
                    }
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&within) > mean(&between) + 0.2,
        "{} vs {}",
        mean(&within),
        mean(&between)
    );
}

#[test]
fn warping_moves_the_pooled_average() {
    let spread = |warp: f64| {
        let s = spec(0.0, warp);
        let proto = trajectory(&s, 1);
        let pooled: Vec<Vec<f64>> = (0..50)
            .map(|i| mean_pool(gen_video(&proto, &s, &mut s.video_rng(1, i), "v", 1).unwrap().frames()))
            .collect();
        let first = &pooled[0];
        pooled
            .iter()
            .map(|p| p.iter().zip(first).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>()
    };
    assert_eq!(spread(0.0), 0.0);
    assert!(spread(0.8) > spread(0.2));
    assert!(spread(0.2) > 0.0);
}

#[test]
fn alignment_prefers_the_same_class() {
    let s = spec(0.0, 0.5);
    let classes = 20u32;
    let protos: Vec<Matrix> = (0..classes).map(|c| trajectory(&s, c)).collect();
    let mut rng = RngStream::new(5, 99);
    let mut violations = 0;
    for pair in 0..1000 {
        let a = rng.below(classes as usize) as u32;
        let b = (a + 1 + rng.below(classes as usize - 1) as u32) % classes;
        let video = |c: u32, k: usize| {
            gen_video(
                &protos[c as usize],
                &s,
                &mut s.video_rng(c, 1000 + 3 * pair + k),
                "v",
                c,
            )
            .unwrap()
        };
        let (x, y, z) = (video(a, 0), video(a, 1), video(b, 2));
        let same = otam_similarity(x.frames(), y.frames()).unwrap();
        let other = otam_similarity(x.frames(), z.frames()).unwrap();
        if same <= other {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn benchmark_layout_and_determinism() {
    let s = GeneratorSpec {
        train_classes: 4,
        val_classes: 2,
        test_classes: 4,
        videos_per_class: 10,
        pretrain_classes: 8,
        seed: 3,
        ..GeneratorSpec::default()
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let g1 = gen_benchmark(&s, d1.path()).unwrap();
    let g2 = gen_benchmark(&s, d2.path()).unwrap();

    assert_eq!(g1.manifest.videos.len(), 100);
    let splits = g1.manifest.split_classes();
    assert_eq!(splits[&Split::Train].len(), 4);
    assert_eq!(splits[&Split::Val].len(), 2);
    assert_eq!(splits[&Split::Test].len(), 4);
    assert!(splits[&Split::Train].is_disjoint(&splits[&Split::Test]));

    let (pre, pre_path) = g1.pretrain.as_ref().unwrap();
    assert_eq!(load_manifest(pre_path).unwrap(), *pre);
    let bench: BTreeSet<u32> = g1.manifest.class_ids();
    assert_eq!(pre.class_ids().len(), 8);
    assert!(pre.class_ids().is_disjoint(&bench));

    let files = |root: &std::path::Path| {
        let mut v: Vec<_> = walk(root)
            .into_iter()
            .map(|p| (p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
            .collect();
        v.sort();
        v
    };
    assert_eq!(files(d1.path()), files(d2.path()));
    assert_eq!(g1.manifest, g2.manifest);
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
