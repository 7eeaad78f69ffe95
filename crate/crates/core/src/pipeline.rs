//! Workflows that connect the algorithms to the document formats: scene
//! export, root fitting benchmarks and correction training/prediction.

use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{compute_k, CameraIntrinsics, Pose2D, DEFAULT_A_REAL};
use crate::correction::{featurize, predict_gamma, train, RegressorParams, TrainConfig, TrainingSample};
use crate::error::{Error, Result};
use crate::io::{
    GtDocument, GtPersonEntry, ImageEntry, ModelDocument, ObservationDocument, ObservationEntry, PredDocument,
    PredPersonEntry, RootfitReport, SCHEMA_VERSION,
};
use crate::metrics::mrpe;
use crate::root::{k_localize, limb_exclusion_mask, lsq_root_fit, ransac_root_fit, CorrectionFactor, RansacConfig};
use crate::synth::{perturb, simulate_predictions, NoiseConfig, SceneConfig, SceneSample};

fn bbox_array(b: &crate::camera::BBox) -> [f64; 4] {
    [b.x, b.y, b.w, b.h]
}

/// Groundtruth document for a generated scene. Every image shares the
/// scene camera.
pub fn scene_to_gt(scene: &[SceneSample], cfg: &SceneConfig) -> GtDocument {
    let skeleton = cfg.template.skeleton.clone();
    GtDocument {
        schema: SCHEMA_VERSION.into(),
        images: scene
            .iter()
            .map(|s| ImageEntry {
                id: s.image_id,
                width: cfg.image_size[0],
                height: cfg.image_size[1],
                intrinsics: cfg.camera,
            })
            .collect(),
        persons: scene
            .iter()
            .flat_map(|s| {
                s.persons.iter().map(move |p| GtPersonEntry {
                    image_id: s.image_id,
                    bbox: bbox_array(&p.tight_box),
                    joints_cam: p.gt.joints.iter().map(|j| [j.x, j.y, j.z]).collect(),
                    root_index: skeleton.root_index,
                })
            })
            .collect(),
        skeleton: cfg.template.skeleton.clone(),
    }
}

/// Noisy predictions (one per person, score 1) in the prediction format.
pub fn scene_to_predictions(scene: &[SceneSample], cfg: &SceneConfig, noise: &NoiseConfig, seed: u64) -> Result<PredDocument> {
    let sims = simulate_predictions(scene, noise, &cfg.template.skeleton, seed)?;
    let persons = scene
        .iter()
        .zip(&sims)
        .flat_map(|(s, per_image)| {
            per_image.iter().map(move |p| PredPersonEntry {
                image_id: s.image_id,
                score: 1.0,
                root: [p.root.x, p.root.y, p.root.z],
                rel_pose: p.rel_pose.joints.clone(),
            })
        })
        .collect();
    Ok(PredDocument {
        schema: SCHEMA_VERSION.into(),
        persons,
    })
}

/// Noisy 2D observations with exact camera-axis relative joints, the input
/// of `rootfit`. `gt_index` follows the order of [`scene_to_gt`].
pub fn scene_to_observations(
    scene: &[SceneSample],
    cfg: &SceneConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<ObservationDocument> {
    let mut persons = Vec::new();
    let mut gt_index = 0;
    for s in scene {
        let noisy = perturb(s, noise, &cfg.template.skeleton, seed)?;
        for p in &noisy.persons {
            persons.push(ObservationEntry {
                image_id: s.image_id,
                gt_index,
                bbox: bbox_array(&p.tight_box),
                joints_2d: p.pose2d.points.iter().map(|q| [q.x, q.y]).collect(),
                rel_cam: p.rel_cam.iter().map(|v| [v.x, v.y, v.z]).collect(),
            });
            gt_index += 1;
        }
    }
    Ok(ObservationDocument {
        schema: SCHEMA_VERSION.into(),
        persons,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootMethod {
    /// `k` of the squared box, no correction.
    K,
    /// Linear least squares over all joints.
    Lsq,
    /// Linear least squares without limb joints.
    LsqNolimb,
    Ransac,
}

impl RootMethod {
    pub fn name(self) -> &'static str {
        match self {
            RootMethod::K => "k",
            RootMethod::Lsq => "lsq",
            RootMethod::LsqNolimb => "lsq-nolimb",
            RootMethod::Ransac => "ransac",
        }
    }
}

/// Localizes every observed root with `method` and reports MRPE against
/// groundtruth. Persons whose fit fails are counted in `failures` and left
/// out of the error.
pub fn fit_roots(
    gt: &GtDocument,
    obs: &ObservationDocument,
    method: RootMethod,
    ransac: &RansacConfig,
) -> Result<RootfitReport> {
    let skeleton = &gt.skeleton;
    let root = skeleton.root_index;
    let all = vec![true; skeleton.joint_count()];
    let nolimb = limb_exclusion_mask(skeleton)?;
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    let mut failures = 0;

    for o in &obs.persons {
        let cam = gt
            .image(o.image_id)
            .ok_or_else(|| Error::SchemaMismatch(format!("unknown image {}", o.image_id)))?
            .intrinsics;
        let p2d = Pose2D::new(o.points_2d());
        let rel: Vec<Vector3<f64>> = o.rel_cam.iter().map(|v| Vector3::new(v[0], v[1], v[2])).collect();
        let fitted = match method {
            RootMethod::K => {
                let b = crate::camera::BBox::new(o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3])?.square_extend();
                k_localize(&b, &cam, &p2d.points[root], CorrectionFactor::IDENTITY, DEFAULT_A_REAL)
                    .and_then(|r| r.to_camera(&cam))
            }
            RootMethod::Lsq => lsq_root_fit(&p2d, &rel, &cam, &all).map(|f| Point3::from(f.translation)),
            RootMethod::LsqNolimb => lsq_root_fit(&p2d, &rel, &cam, &nolimb).map(|f| Point3::from(f.translation)),
            RootMethod::Ransac => {
                ransac_root_fit(&p2d, &rel, &cam, skeleton, ransac).map(|f| Point3::from(f.translation))
            }
        };
        match fitted {
            Ok(p) => {
                let j = gt.persons[o.gt_index].joints_cam[root];
                preds.push(p);
                truths.push(Point3::new(j[0], j[1], j[2]));
            }
            Err(_) => failures += 1,
        }
    }

    let err = if preds.is_empty() {
        None
    } else {
        Some(mrpe(&preds, &truths)?)
    };
    Ok(RootfitReport {
        schema: SCHEMA_VERSION.into(),
        method: method.name().into(),
        count: preds.len(),
        failures,
        mrpe: err.map_or(f64::NAN, |e| e.total),
        mrpe_axes: err.map_or([f64::NAN; 3], |e| e.per_axis),
        ransac_iterations: ransac.iterations,
        inlier_px: ransac.inlier_threshold,
        seed: ransac.seed,
    })
}

/// Projects a camera-space pose; fails if any joint is behind the camera.
fn project_pose(joints: &[[f64; 3]], cam: &CameraIntrinsics) -> Result<Pose2D> {
    Ok(Pose2D::new(
        joints
            .iter()
            .map(|j| cam.project(&Point3::new(j[0], j[1], j[2])))
            .collect::<Result<Vec<Point2<f64>>>>()?,
    ))
}

/// One training sample per groundtruth person: features from its box and
/// projected joints, target the true root depth.
pub fn training_samples(gt: &GtDocument, a_real: f64) -> Result<Vec<TrainingSample>> {
    let root = gt.skeleton.root_index;
    (0..gt.persons.len())
        .map(|i| {
            let person = &gt.persons[i];
            let img = gt
                .image(person.image_id)
                .ok_or_else(|| Error::SchemaMismatch(format!("unknown image {}", person.image_id)))?;
            let b = gt.person_bbox(i)?;
            let pose = project_pose(&person.joints_cam, &img.intrinsics)?;
            Ok(TrainingSample {
                features: featurize(
                    &b,
                    &img.intrinsics,
                    [img.width, img.height],
                    Some((&pose, &gt.skeleton)),
                    a_real,
                )?,
                target_depth: person.joints_cam[root][2],
                k: compute_k(&b.square_extend(), &img.intrinsics, a_real)?,
            })
        })
        .collect()
}

pub fn train_correction(gt: &GtDocument, cfg: &TrainConfig) -> Result<ModelDocument> {
    let data = training_samples(gt, DEFAULT_A_REAL)?;
    let trained = train(&data, cfg)?;
    Ok(ModelDocument {
        schema: SCHEMA_VERSION.into(),
        a_real: DEFAULT_A_REAL,
        params: trained.params,
        train_config: *cfg,
        loss_trace: trained.loss_trace,
    })
}

/// Predictions whose root depth is `gamma' * k` from the model; pixel
/// coordinates and relative depths come from groundtruth, so the result
/// isolates root depth error.
pub fn predict_correction(gt: &GtDocument, params: &RegressorParams, a_real: f64) -> Result<PredDocument> {
    let data = training_samples(gt, a_real)?;
    let root = gt.skeleton.root_index;
    let persons = gt
        .persons
        .iter()
        .zip(&data)
        .map(|(person, sample)| {
            let cam = gt.image(person.image_id).expect("validated above").intrinsics;
            let gamma = predict_gamma(params, &sample.features)?;
            let pose = project_pose(&person.joints_cam, &cam)?;
            let root_z = person.joints_cam[root][2];
            Ok(PredPersonEntry {
                image_id: person.image_id,
                score: 1.0,
                root: [pose.points[root].x, pose.points[root].y, gamma.gamma_prime() * sample.k],
                rel_pose: pose
                    .points
                    .iter()
                    .zip(&person.joints_cam)
                    .map(|(q, j)| [q.x, q.y, j[2] - root_z])
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredDocument {
        schema: SCHEMA_VERSION.into(),
        persons,
    })
}
