//! Seeded synthetic multi-person scenes with exact groundtruth, and the
//! `k` versus true depth correlation experiment built on them.

use nalgebra::{Point2, Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::camera::{compute_k, AbsPose3D, BBox, CameraIntrinsics, Pose2D, RelPose3D, RootCoord, SkeletonDef, DEFAULT_A_REAL};
use crate::error::{Error, Result};

/// Joint names of the built-in 17-joint template, root first.
pub const STANDARD_JOINTS: [&str; 17] = [
    "pelvis",
    "r_hip",
    "r_knee",
    "r_ankle",
    "l_hip",
    "l_knee",
    "l_ankle",
    "spine",
    "neck",
    "head",
    "head_top",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
];

/// Skeleton plus two unit-height shapes. Offsets are relative to the root
/// in camera axes (x right, y down, z away from the camera) and scaled by
/// the person's height; a person's shape is interpolated between `child`
/// and `adult` by height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonTemplate {
    pub skeleton: SkeletonDef,
    pub child: Vec<[f64; 3]>,
    pub adult: Vec<[f64; 3]>,
    /// Heights (mm) at which the shape is fully `child` / fully `adult`.
    pub child_height: f64,
    pub adult_height: f64,
}

impl SkeletonTemplate {
    pub fn standard17() -> Self {
        // (lateral, height above floor) as fractions of standing height
        let adult = [
            (0.0, 0.53),
            (-0.06, 0.52),
            (-0.06, 0.285),
            (-0.06, 0.04),
            (0.06, 0.52),
            (0.06, 0.285),
            (0.06, 0.04),
            (0.0, 0.68),
            (0.0, 0.84),
            (0.0, 0.93),
            (0.0, 1.0),
            (0.13, 0.82),
            (0.17, 0.63),
            (0.18, 0.47),
            (-0.13, 0.82),
            (-0.17, 0.63),
            (-0.18, 0.47),
        ];
        // larger head, shorter legs
        let child = [
            (0.0, 0.44),
            (-0.06, 0.43),
            (-0.06, 0.24),
            (-0.06, 0.04),
            (0.06, 0.43),
            (0.06, 0.24),
            (0.06, 0.04),
            (0.0, 0.62),
            (0.0, 0.79),
            (0.0, 0.90),
            (0.0, 1.0),
            (0.14, 0.77),
            (0.18, 0.60),
            (0.19, 0.45),
            (-0.14, 0.77),
            (-0.18, 0.60),
            (-0.19, 0.45),
        ];
        let to_offsets = |shape: &[(f64, f64); 17]| -> Vec<[f64; 3]> {
            let root_h = shape[0].1;
            shape.iter().map(|&(x, h)| [x, root_h - h, 0.0]).collect()
        };
        let limb_flags = STANDARD_JOINTS
            .iter()
            .map(|n| n.ends_with("knee") || n.ends_with("ankle") || n.ends_with("elbow") || n.ends_with("wrist"))
            .collect();
        Self {
            skeleton: SkeletonDef {
                joint_names: STANDARD_JOINTS.iter().map(|s| s.to_string()).collect(),
                root_index: 0,
                limb_flags,
                edges: vec![
                    (0, 1),
                    (1, 2),
                    (2, 3),
                    (0, 4),
                    (4, 5),
                    (5, 6),
                    (0, 7),
                    (7, 8),
                    (8, 9),
                    (9, 10),
                    (8, 11),
                    (11, 12),
                    (12, 13),
                    (8, 14),
                    (14, 15),
                    (15, 16),
                ],
            },
            child: to_offsets(&child),
            adult: to_offsets(&adult),
            child_height: 1100.0,
            adult_height: 1750.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.skeleton.validate()?;
        let j = self.skeleton.joint_count();
        for shape in [&self.child, &self.adult] {
            if shape.len() != j {
                return Err(Error::JointCountMismatch {
                    expected: j,
                    found: shape.len(),
                });
            }
            if shape[self.skeleton.root_index] != [0.0; 3] {
                return Err(Error::InvalidParameter("template root offset must be zero".into()));
            }
        }
        if !(self.adult_height > self.child_height) {
            return Err(Error::InvalidParameter("adult_height must exceed child_height".into()));
        }
        Ok(())
    }

    /// Root-relative joint offsets (mm) for a person of the given height.
    pub fn offsets(&self, height: f64) -> Vec<Vector3<f64>> {
        let t = ((height - self.child_height) / (self.adult_height - self.child_height)).clamp(0.0, 1.0);
        self.child
            .iter()
            .zip(&self.adult)
            .map(|(c, a)| Vector3::from_fn(|i, _| height * ((1.0 - t) * c[i] + t * a[i])))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Gaussian 2D joint noise, px.
    pub sigma_2d: f64,
    /// Multiplier on `sigma_2d` for limb joints.
    pub limb_noise_scale: f64,
    /// Probability that a joint is displaced by `outlier_px`.
    pub outlier_fraction: f64,
    pub outlier_px: f64,
    /// Relative Gaussian jitter of box width and height.
    pub box_jitter: f64,
    /// Gaussian noise on predicted root depth, mm.
    pub depth_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_2d: 0.0,
            limb_noise_scale: 1.0,
            outlier_fraction: 0.0,
            outlier_px: 0.0,
            box_jitter: 0.0,
            depth_sigma: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("sigma_2d", self.sigma_2d),
            ("limb_noise_scale", self.limb_noise_scale),
            ("outlier_px", self.outlier_px),
            ("box_jitter", self.box_jitter),
            ("depth_sigma", self.depth_sigma),
        ];
        if let Some((name, v)) = nonneg.iter().find(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidParameter("outlier_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_2d == 0.0
            && (self.outlier_fraction == 0.0 || self.outlier_px == 0.0)
            && self.box_jitter == 0.0
            && self.depth_sigma == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub num_images: usize,
    pub persons_per_image: [usize; 2],
    pub height_range: [f64; 2],
    pub depth_range: [f64; 2],
    pub lateral_x_range: [f64; 2],
    pub lateral_y_range: [f64; 2],
    /// Rotation about the vertical axis, radians.
    pub yaw_range: [f64; 2],
    pub camera: CameraIntrinsics,
    /// `[width, height]` in px.
    pub image_size: [f64; 2],
    pub template: SkeletonTemplate,
    /// Fraction of the tight joint box added on every side.
    pub box_padding: f64,
    pub a_real: f64,
    pub noise: NoiseConfig,
    pub seed: u64,
    pub max_attempts: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            num_images: 10,
            persons_per_image: [1, 3],
            height_range: [1500.0, 1900.0],
            depth_range: [3000.0, 8000.0],
            lateral_x_range: [-1500.0, 1500.0],
            lateral_y_range: [-100.0, 300.0],
            yaw_range: [-1.0, 1.0],
            camera: CameraIntrinsics {
                alpha_x: 1000.0,
                alpha_y: 1000.0,
                cx: 960.0,
                cy: 540.0,
            },
            image_size: [1920.0, 1080.0],
            template: SkeletonTemplate::standard17(),
            box_padding: 0.1,
            a_real: DEFAULT_A_REAL,
            noise: NoiseConfig::default(),
            seed: 0,
            max_attempts: 1000,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], positive: bool) -> Result<()> {
    if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() || (positive && !(r[0] > 0.0)) {
        return Err(Error::InvalidParameter(format!("{name} range {r:?} is invalid")));
    }
    Ok(())
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("height", self.height_range, true)?;
        check_range("depth", self.depth_range, true)?;
        check_range("lateral x", self.lateral_x_range, false)?;
        check_range("lateral y", self.lateral_y_range, false)?;
        check_range("yaw", self.yaw_range, false)?;
        if self.persons_per_image[0] == 0 || self.persons_per_image[0] > self.persons_per_image[1] {
            return Err(Error::InvalidParameter(format!(
                "persons per image {:?} is invalid",
                self.persons_per_image
            )));
        }
        if !(self.image_size[0] > 0.0 && self.image_size[1] > 0.0) {
            return Err(Error::InvalidParameter("image size must be positive".into()));
        }
        if !(self.box_padding >= 0.0) || !(self.a_real > 0.0) || self.max_attempts == 0 {
            return Err(Error::InvalidParameter(
                "box_padding must be non-negative, a_real positive, max_attempts at least 1".into(),
            ));
        }
        self.camera.validate()?;
        self.template.validate()?;
        self.noise.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonSample {
    pub height: f64,
    pub gt: AbsPose3D,
    /// Root-relative joints in camera axes, mm.
    pub rel_cam: Vec<Vector3<f64>>,
    /// Padded box around the projected joints.
    pub tight_box: BBox,
    pub square_box: BBox,
    pub pose2d: Pose2D,
    pub rel_pose: RelPose3D,
    pub root: RootCoord,
    /// `k` of the squared box.
    pub k: f64,
    /// True depth over `k`.
    pub gamma_prime: f64,
}

/// One synthetic image.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub image_id: u64,
    pub persons: Vec<PersonSample>,
}

/// Independent generator stream for `(image, slot)`; slot 0 is the image
/// itself, slot `p + 1` person `p`.
fn substream(seed: u64, image: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((image as u64) << 24) | slot as u64);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn padded_box(points: &[Point2<f64>], padding: f64) -> Result<BBox> {
    let tight = BBox::enclosing(points)?;
    let b = tight.scaled_about_center(1.0 + 2.0 * padding, 1.0 + 2.0 * padding);
    b.validate()?;
    Ok(b)
}

/// Derives every image-space quantity of a person from its camera-space
/// joints.
pub fn describe_person(
    joints: Vec<Point3<f64>>,
    root_index: usize,
    height: f64,
    cfg: &SceneConfig,
) -> Result<PersonSample> {
    let cam = &cfg.camera;
    let points = joints.iter().map(|p| cam.project(p)).collect::<Result<Vec<_>>>()?;
    let root3 = joints[root_index];
    let rel_cam = joints.iter().map(|p| p - root3).collect();
    let rel_pose = RelPose3D {
        joints: points.iter().zip(&joints).map(|(q, p)| [q.x, q.y, p.z - root3.z]).collect(),
    };
    let tight_box = padded_box(&points, cfg.box_padding)?;
    let square_box = tight_box.square_extend();
    let k = compute_k(&square_box, cam, cfg.a_real)?;
    Ok(PersonSample {
        height,
        root: RootCoord {
            x: points[root_index].x,
            y: points[root_index].y,
            z: root3.z,
        },
        gt: AbsPose3D { joints },
        rel_cam,
        tight_box,
        square_box,
        pose2d: Pose2D::new(points),
        rel_pose,
        k,
        gamma_prime: root3.z / k,
    })
}

fn sample_person(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Result<PersonSample> {
    let bounds = BBox {
        x: 0.0,
        y: 0.0,
        w: cfg.image_size[0],
        h: cfg.image_size[1],
    };
    let root_index = cfg.template.skeleton.root_index;
    for _ in 0..cfg.max_attempts {
        let height = uniform(rng, cfg.height_range);
        let yaw = uniform(rng, cfg.yaw_range);
        let root = Vector3::new(
            uniform(rng, cfg.lateral_x_range),
            uniform(rng, cfg.lateral_y_range),
            uniform(rng, cfg.depth_range),
        );
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw);
        let joints: Vec<Point3<f64>> = cfg
            .template
            .offsets(height)
            .iter()
            .map(|o| Point3::from(rot * o + root))
            .collect();
        if joints.iter().any(|p| !(p.z > 0.0)) {
            continue;
        }
        let inside = joints
            .iter()
            .all(|p| cfg.camera.project(p).map(|q| bounds.contains(&q)).unwrap_or(false));
        if inside {
            return describe_person(joints, root_index, height, cfg);
        }
    }
    Err(Error::PlacementFailure(cfg.max_attempts))
}

/// Generates `cfg.num_images` images. Output depends only on `cfg`
/// (including its seed); every person draws from its own substream.
pub fn generate_scene(cfg: &SceneConfig) -> Result<Vec<SceneSample>> {
    cfg.validate()?;
    (0..cfg.num_images)
        .map(|i| {
            let mut image_rng = substream(cfg.seed, i, 0);
            let [lo, hi] = cfg.persons_per_image;
            let count = image_rng.random_range(lo..=hi);
            let persons = (0..count)
                .map(|p| sample_person(cfg, &mut substream(cfg.seed, i, p + 1)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SceneSample {
                image_id: i as u64,
                persons,
            })
        })
        .collect()
}

fn jitter_box(b: &BBox, jitter: f64, rng: &mut ChaCha8Rng) -> BBox {
    if jitter == 0.0 {
        return *b;
    }
    let sx: f64 = 1.0 + jitter * rng.sample::<f64, _>(StandardNormal);
    let sy: f64 = 1.0 + jitter * rng.sample::<f64, _>(StandardNormal);
    b.scaled_about_center(sx.max(0.05), sy.max(0.05))
}

/// Noisy observation of a scene: 2D joints get Gaussian noise (scaled up on
/// limb joints) and occasional gross outliers, box extents get
/// multiplicative jitter. Groundtruth fields are left untouched.
pub fn perturb(s: &SceneSample, noise: &NoiseConfig, skeleton: &SkeletonDef, seed: u64) -> Result<SceneSample> {
    noise.validate()?;
    let mut out = s.clone();
    for (p, person) in out.persons.iter_mut().enumerate() {
        if person.pose2d.len() != skeleton.joint_count() {
            return Err(Error::JointCountMismatch {
                expected: skeleton.joint_count(),
                found: person.pose2d.len(),
            });
        }
        let mut rng = substream(seed, s.image_id as usize, p + 1);
        for (q, &limb) in person.pose2d.points.iter_mut().zip(&skeleton.limb_flags) {
            let sigma = if limb {
                noise.sigma_2d * noise.limb_noise_scale
            } else {
                noise.sigma_2d
            };
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            q.x += sigma * nx;
            q.y += sigma * ny;
            let outlier = rng.random_bool(noise.outlier_fraction);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            if outlier {
                q.x += noise.outlier_px * angle.cos();
                q.y += noise.outlier_px * angle.sin();
            }
        }
        person.tight_box = jitter_box(&person.tight_box, noise.box_jitter, &mut rng);
        person.square_box = person.tight_box.square_extend();
    }
    Ok(out)
}

/// Root estimate and relative pose a noisy upstream estimator would hand to
/// the composition step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPrediction {
    pub root: RootCoord,
    pub rel_pose: RelPose3D,
}

/// Perturbs each image and adds Gaussian depth noise to the true root
/// depth. Relative depths stay exact.
pub fn simulate_predictions(
    scene: &[SceneSample],
    noise: &NoiseConfig,
    skeleton: &SkeletonDef,
    seed: u64,
) -> Result<Vec<Vec<SimulatedPrediction>>> {
    let root = skeleton.root_index;
    scene
        .iter()
        .map(|s| {
            let noisy = perturb(s, noise, skeleton, seed)?;
            let mut rng = substream(seed ^ 0x5eed_0f_de97, s.image_id as usize, 0);
            Ok(noisy
                .persons
                .iter()
                .map(|p| {
                    let dz: f64 = rng.sample(StandardNormal);
                    SimulatedPrediction {
                        root: RootCoord {
                            x: p.pose2d.points[root].x,
                            y: p.pose2d.points[root].y,
                            z: (p.root.z + noise.depth_sigma * dz).max(1.0),
                        },
                        rel_pose: RelPose3D {
                            joints: p
                                .pose2d
                                .points
                                .iter()
                                .zip(&p.rel_pose.joints)
                                .map(|(q, r)| [q.x, q.y, r[2]])
                                .collect(),
                        },
                    }
                })
                .collect())
        })
        .collect()
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!("{} x values for {} y values", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KCorrelation {
    pub r: f64,
    /// `(k, true root depth)` per person, mm.
    pub rows: Vec<(f64, f64)>,
}

/// Generates a scene, applies `cfg.noise` to the boxes, and correlates `k`
/// of each squared box with the true root depth.
pub fn run_k_correlation(cfg: &SceneConfig) -> Result<KCorrelation> {
    let scene = generate_scene(cfg)?;
    let mut rows = Vec::new();
    for s in &scene {
        let observed = if cfg.noise.is_zero() {
            s.clone()
        } else {
            perturb(s, &cfg.noise, &cfg.template.skeleton, cfg.seed.wrapping_add(1))?
        };
        for p in &observed.persons {
            rows.push((compute_k(&p.square_box, &cfg.camera, cfg.a_real)?, p.root.z));
        }
    }
    let (ks, zs): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
    Ok(KCorrelation {
        r: pearson(&ks, &zs)?,
        rows,
    })
}
