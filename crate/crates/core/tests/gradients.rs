use abspose_core::correction::{
    depth_l1, featurize, loss_and_gradient, predict_gamma, train, FeatureVector, RegressorParams, TrainConfig,
    TrainingSample, FEATURE_LEN,
};
use abspose_core::heatmap::{finite_difference_gradient, soft_argmax_2d_with_grad, soft_argmax_3d_with_grad, Heatmap2D, Heatmap3D};
use abspose_core::pipeline::training_samples;
use abspose_core::synth::{describe_person, SceneConfig};
use abspose_core::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest absolute deviation relative to the larger of the two gradient
/// magnitudes (max norm).
fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn soft_argmax_2d_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let data: Vec<f64> = (0..64).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (_, jac) = soft_argmax_2d_with_grad(&Heatmap2D::new(8, 8, data.clone()).unwrap());
        for axis in 0..2 {
            let numeric = finite_difference_gradient(
                |s| soft_argmax_2d_with_grad(&Heatmap2D::new(8, 8, s.to_vec()).unwrap()).0[axis],
                &data,
                1e-6,
            );
            let analytic: Vec<f64> = jac.iter().map(|g| g[axis]).collect();
            assert!(max_relative_error(&analytic, &numeric) < 1e-4);
        }
    }
}

#[test]
fn soft_argmax_3d_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let data: Vec<f64> = (0..4 * 3 * 5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (_, jac) = soft_argmax_3d_with_grad(&Heatmap3D::new(4, 3, 5, data.clone()).unwrap());
        for axis in 0..3 {
            let numeric = finite_difference_gradient(
                |s| soft_argmax_3d_with_grad(&Heatmap3D::new(4, 3, 5, s.to_vec()).unwrap()).0[axis],
                &data,
                1e-6,
            );
            let analytic: Vec<f64> = jac.iter().map(|g| g[axis]).collect();
            assert!(max_relative_error(&analytic, &numeric) < 1e-4);
        }
    }
}

fn population(seed: u64, heights: [f64; 2]) -> Vec<TrainingSample> {
    let cfg = SceneConfig {
        seed,
        num_images: 40,
        height_range: heights,
        ..SceneConfig::default()
    };
    let scene = abspose_core::synth::generate_scene(&cfg).unwrap();
    let gt = abspose_core::pipeline::scene_to_gt(&scene, &cfg);
    training_samples(&gt, cfg.a_real).unwrap()
}

#[test]
fn regressor_gradient_matches_finite_differences() {
    let data = population(3, [1000.0, 1900.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    while checked < 10 {
        let mut params = RegressorParams::zeros(FEATURE_LEN, 6);
        let flat: Vec<f64> = params.to_flat().iter().map(|_| rng.random_range(-0.3..0.3)).collect();
        params.set_flat(&flat);
        // keep every residual away from the kink of |.|
        let residual_near_zero = data.iter().any(|s| {
            let g = predict_gamma(&params, &s.features).unwrap().gamma_prime();
            (g * s.k - s.target_depth).abs() < 1e-8
        });
        if residual_near_zero {
            continue;
        }
        let (_, analytic) = loss_and_gradient(&params, &data).unwrap();
        let numeric = finite_difference_gradient(
            |x| {
                let mut p = params.clone();
                p.set_flat(x);
                loss_and_gradient(&p, &data).unwrap().0
            },
            &flat,
            1e-6,
        );
        assert!(max_relative_error(&analytic, &numeric) < 1e-4, "{}", max_relative_error(&analytic, &numeric));
        checked += 1;
    }
}

#[test]
fn training_is_deterministic() {
    let data = population(5, [1000.0, 1900.0]);
    let cfg = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let a = train(&data, &cfg).unwrap();
    let b = train(&data, &cfg).unwrap();
    assert_eq!(a.params.to_flat(), b.params.to_flat());
    assert_eq!(a.loss_trace, b.loss_trace);
}

#[test]
fn training_reduces_loss() {
    let data = population(6, [1000.0, 1900.0]);
    let cfg = TrainConfig::default();
    let trained = train(&data, &cfg).unwrap();
    let first = trained.loss_trace[0];
    let last = *trained.loss_trace.last().unwrap();
    assert!(last < first, "{first} -> {last}");
    assert!(depth_l1(&trained.params, &data).unwrap() < 0.5 * first);
}

#[test]
fn identity_targets_learn_unit_correction() {
    // depth exactly equal to k: the ideal correction is 1 everywhere
    let mut data = population(7, [1000.0, 1900.0]);
    for s in &mut data {
        s.target_depth = s.k;
    }
    let trained = train(&data, &TrainConfig::default()).unwrap();
    for s in &data {
        let g = predict_gamma(&trained.params, &s.features).unwrap().gamma_prime();
        assert!((g - 1.0).abs() < 0.02, "gamma' {g}");
    }
}

#[test]
fn children_get_smaller_correction_than_adults() {
    let mut data = population(8, [1000.0, 1300.0]);
    data.extend(population(9, [1700.0, 1900.0]));
    let trained = train(&data, &TrainConfig::default()).unwrap();
    let cfg = SceneConfig::default();
    let template = &cfg.template;
    let mean_gamma = |h: f64| {
        let mut total = 0.0;
        for depth in [4000.0, 6000.0] {
            let joints: Vec<Point3<f64>> =
                template.offsets(h).iter().map(|o| Point3::new(o.x, o.y + 100.0, o.z + depth)).collect();
            let p = describe_person(joints, template.skeleton.root_index, h, &cfg).unwrap();
            let f: FeatureVector =
                featurize(&p.tight_box, &cfg.camera, cfg.image_size, Some((&p.pose2d, &template.skeleton)), cfg.a_real)
                    .unwrap();
            total += predict_gamma(&trained.params, &f).unwrap().gamma_prime();
        }
        total / 2.0
    };
    let (child, adult) = (mean_gamma(1150.0), mean_gamma(1800.0));
    assert!(child < adult, "child {child} adult {adult}");
}
