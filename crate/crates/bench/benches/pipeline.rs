use std::hint::black_box;

use abspose_core::heatmap::{soft_argmax_2d_with_grad, soft_argmax_3d_with_grad, Heatmap2D, Heatmap3D};
use abspose_core::metrics::{evaluate, pa_mpjpe, GroundTruthPerson, PersonPrediction};
use abspose_core::root::{lsq_root_fit, ransac_root_fit};
use abspose_core::synth::{generate_scene, perturb, NoiseConfig, SceneConfig, SceneSample};
use abspose_core::{compute_k, AbsPose3D, EvalConfig, RansacConfig, Vector3, DEFAULT_A_REAL};
use criterion::{criterion_group, criterion_main, Criterion};

fn scene(images: usize) -> (SceneConfig, Vec<SceneSample>) {
    let cfg = SceneConfig {
        seed: 1,
        num_images: images,
        ..SceneConfig::default()
    };
    let s = generate_scene(&cfg).unwrap();
    (cfg, s)
}

fn geometry(c: &mut Criterion) {
    let (cfg, s) = scene(1);
    let p = &s[0].persons[0];
    c.bench_function("compute_k", |b| {
        b.iter(|| compute_k(black_box(&p.square_box), &cfg.camera, DEFAULT_A_REAL))
    });
    c.bench_function("project_17", |b| {
        b.iter(|| {
            p.gt.joints
                .iter()
                .map(|j| cfg.camera.project(black_box(j)).unwrap())
                .collect::<Vec<_>>()
        })
    });
}

fn root_fitting(c: &mut Criterion) {
    let (cfg, s) = scene(1);
    let noise = NoiseConfig {
        sigma_2d: 3.0,
        outlier_fraction: 0.2,
        outlier_px: 80.0,
        ..NoiseConfig::default()
    };
    let noisy = perturb(&s[0], &noise, &cfg.template.skeleton, 2).unwrap();
    let p = &noisy.persons[0];
    let mask = vec![true; p.rel_cam.len()];
    c.bench_function("lsq_root_fit", |b| {
        b.iter(|| lsq_root_fit(black_box(&p.pose2d), &p.rel_cam, &cfg.camera, &mask))
    });
    let ransac = RansacConfig::default();
    c.bench_function("ransac_root_fit_256", |b| {
        b.iter(|| ransac_root_fit(black_box(&p.pose2d), &p.rel_cam, &cfg.camera, &cfg.template.skeleton, &ransac))
    });
}

fn procrustes(c: &mut Criterion) {
    let (_, s) = scene(1);
    let gt = &s[0].persons[0].gt;
    let pred = AbsPose3D {
        joints: gt
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| j + Vector3::new(i as f64, -2.0 * i as f64, 30.0))
            .collect(),
    };
    c.bench_function("pa_mpjpe_17", |b| b.iter(|| pa_mpjpe(black_box(&pred), gt)));
}

fn soft_argmax(c: &mut Criterion) {
    let map2 = Heatmap2D::new(64, 64, (0..64 * 64).map(|i| ((i * 37) % 101) as f64 / 25.0).collect()).unwrap();
    c.bench_function("soft_argmax_2d_64x64", |b| b.iter(|| soft_argmax_2d_with_grad(black_box(&map2))));
    let map3 = Heatmap3D::new(32, 32, 32, (0..32 * 32 * 32).map(|i| ((i * 37) % 101) as f64 / 25.0).collect()).unwrap();
    c.bench_function("soft_argmax_3d_32^3", |b| b.iter(|| soft_argmax_3d_with_grad(black_box(&map3))));
}

fn evaluation(c: &mut Criterion) {
    let (_, s) = scene(100);
    let mut gts = Vec::new();
    let mut preds = Vec::new();
    for sample in &s {
        for p in &sample.persons {
            gts.push(GroundTruthPerson { image_id: sample.image_id, pose: p.gt.clone() });
            let shifted = AbsPose3D {
                joints: p.gt.joints.iter().map(|j| j + Vector3::new(20.0, -10.0, 120.0)).collect(),
            };
            preds.push(PersonPrediction { image_id: sample.image_id, score: 1.0 / (1.0 + p.root.z), pose: shifted });
        }
    }
    let cfg = EvalConfig::new(0);
    c.bench_function("evaluate_100_images", |b| b.iter(|| evaluate(black_box(&preds), &gts, &cfg)));
}

criterion_group!(benches, geometry, root_fitting, procrustes, soft_argmax, evaluation);
criterion_main!(benches);
