//! Absolute root localization: the corrected `k` measure and the
//! distance-minimization baseline (linear least squares, limb exclusion and
//! RANSAC over joint subsets).

use nalgebra::{DMatrix, DVector, Point2, Point3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{compute_k, BBox, CameraIntrinsics, Pose2D, RootCoord, SkeletonDef};
use crate::error::{Error, Result};

/// Ratio below which the smallest singular value of the design matrix is
/// treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Multiplier applied to `k` to obtain absolute depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFactor(f64);

impl CorrectionFactor {
    pub const IDENTITY: Self = Self(1.0);

    pub fn new(gamma_prime: f64) -> Result<Self> {
        if !(gamma_prime > 0.0) || !gamma_prime.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "correction factor must be positive and finite, got {gamma_prime}"
            )));
        }
        Ok(Self(gamma_prime))
    }

    /// Builds the applied factor from an area correction `gamma`,
    /// i.e. `1 / sqrt(gamma)`.
    pub fn from_area_correction(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("area correction must be positive, got {gamma}")));
        }
        Self::new(1.0 / gamma.sqrt())
    }

    pub fn gamma_prime(self) -> f64 {
        self.0
    }

    /// The area correction this factor corresponds to.
    pub fn area_correction(self) -> f64 {
        1.0 / (self.0 * self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootFitResult {
    /// Root position in camera coordinates, mm.
    pub translation: Vector3<f64>,
    /// Mean squared reprojection error over the fitted joints, px².
    pub residual: f64,
    /// Joints used for the final fit (RANSAC only).
    pub inlier_mask: Option<Vec<bool>>,
}

/// Depth from `k` scaled by the correction factor; the pixel position is
/// passed through unchanged.
pub fn k_localize(
    b: &BBox,
    cam: &CameraIntrinsics,
    root2d: &Point2<f64>,
    corr: CorrectionFactor,
    a_real: f64,
) -> Result<RootCoord> {
    let k = compute_k(b, cam, a_real)?;
    Ok(RootCoord {
        x: root2d.x,
        y: root2d.y,
        z: corr.gamma_prime() * k,
    })
}

/// Selects every joint that is not flagged as a limb joint.
pub fn limb_exclusion_mask(s: &SkeletonDef) -> Result<Vec<bool>> {
    let mask: Vec<bool> = s.limb_flags.iter().map(|limb| !limb).collect();
    if mask.iter().any(|&m| m) {
        Ok(mask)
    } else {
        Err(Error::EmptyMask)
    }
}

fn check_lengths(p2d: &Pose2D, rel: &[Vector3<f64>], mask: &[bool]) -> Result<()> {
    if rel.len() != p2d.len() {
        return Err(Error::JointCountMismatch {
            expected: p2d.len(),
            found: rel.len(),
        });
    }
    if mask.len() != p2d.len() {
        return Err(Error::JointCountMismatch {
            expected: p2d.len(),
            found: mask.len(),
        });
    }
    Ok(())
}

/// Per-joint reprojection distance in pixels for a root translation.
/// Joints that land behind the camera get an infinite error.
pub fn reprojection_errors(p2d: &Pose2D, rel: &[Vector3<f64>], cam: &CameraIntrinsics, t: &Vector3<f64>) -> Vec<f64> {
    p2d.points
        .iter()
        .zip(rel)
        .map(|(q, r)| match cam.project(&Point3::from(r + t)) {
            Ok(proj) => (proj - q).norm(),
            Err(_) => f64::INFINITY,
        })
        .collect()
}

fn mean_squared(errors: &[f64], mask: &[bool]) -> f64 {
    let (sum, n) = errors
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), (e, _)| (s + e * e, n + 1));
    sum / n as f64
}

/// Root translation minimizing the algebraic projection residual over the
/// masked joints.
///
/// Each joint contributes two rows, obtained by multiplying the pinhole
/// equations through by depth:
///
/// ```text
/// alpha_x*Tx - (u-cx)*Tz = (u-cx)*Z - alpha_x*X
/// alpha_y*Ty - (v-cy)*Tz = (v-cy)*Z - alpha_y*Y
/// ```
///
/// `rel` holds root-relative joints in camera axes (mm).
pub fn lsq_root_fit(p2d: &Pose2D, rel: &[Vector3<f64>], cam: &CameraIntrinsics, mask: &[bool]) -> Result<RootFitResult> {
    check_lengths(p2d, rel, mask)?;
    let selected: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if selected.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "least-squares root fit needs at least 2 joints, mask selects {}",
            selected.len()
        )));
    }

    // Solve for (Tx', Ty', Tz) with Tx = Tx' + (mean_u - cx) Tz / alpha_x,
    // which centers the depth column and keeps the system well conditioned.
    let n_sel = selected.len() as f64;
    let mean_u = selected.iter().map(|&j| p2d.points[j].x).sum::<f64>() / n_sel;
    let mean_v = selected.iter().map(|&j| p2d.points[j].y).sum::<f64>() / n_sel;
    let rows = 2 * selected.len();
    let mut a = DMatrix::<f64>::zeros(rows, 3);
    let mut b = DVector::<f64>::zeros(rows);
    for (n, &j) in selected.iter().enumerate() {
        let du = p2d.points[j].x - cam.cx;
        let dv = p2d.points[j].y - cam.cy;
        let r = &rel[j];
        a[(2 * n, 0)] = cam.alpha_x;
        a[(2 * n, 2)] = mean_u - p2d.points[j].x;
        b[2 * n] = du * r.z - cam.alpha_x * r.x;
        a[(2 * n + 1, 1)] = cam.alpha_y;
        a[(2 * n + 1, 2)] = mean_v - p2d.points[j].y;
        b[2 * n + 1] = dv * r.z - cam.alpha_y * r.y;
    }

    // Householder QR first; the rank test and solve use the SVD of the 3x3
    // factor, whose singular values equal those of the design matrix.
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    let svd = qr.r().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min >= RANK_TOLERANCE * s_max) {
        return Err(Error::DegenerateConfiguration(format!(
            "design matrix is rank deficient (singular values {s_min:e} / {s_max:e})"
        )));
    }
    let solution = svd
        .solve(&qtb, 0.0)
        .map_err(|e| Error::DegenerateConfiguration(e.to_string()))?;
    let tz = solution[2];
    let translation = Vector3::new(
        solution[0] + (mean_u - cam.cx) * tz / cam.alpha_x,
        solution[1] + (mean_v - cam.cy) * tz / cam.alpha_y,
        tz,
    );
    let errors = reprojection_errors(p2d, rel, cam, &translation);
    Ok(RootFitResult {
        translation,
        residual: mean_squared(&errors, mask),
        inlier_mask: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub iterations: usize,
    pub sample_size: usize,
    /// Reprojection error (px) at or below which a joint is an inlier.
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 256,
            sample_size: 3,
            inlier_threshold: 10.0,
            seed: 0,
        }
    }
}

/// RANSAC over joint subsets. Each trial fits [`lsq_root_fit`] to a random
/// minimal sample; the model with the most inliers wins (ties go to the
/// lower inlier residual, then to the earlier trial) and is refit on its
/// inlier set.
pub fn ransac_root_fit(
    p2d: &Pose2D,
    rel: &[Vector3<f64>],
    cam: &CameraIntrinsics,
    skeleton: &SkeletonDef,
    cfg: &RansacConfig,
) -> Result<RootFitResult> {
    let j = skeleton.joint_count();
    if p2d.len() != j {
        return Err(Error::JointCountMismatch {
            expected: j,
            found: p2d.len(),
        });
    }
    let full = vec![true; j];
    check_lengths(p2d, rel, &full)?;
    if cfg.sample_size < 2 || cfg.sample_size > j {
        return Err(Error::InvalidParameter(format!(
            "sample size must be in [2, {j}], got {}",
            cfg.sample_size
        )));
    }
    if cfg.inlier_threshold.is_nan() || cfg.inlier_threshold < 0.0 {
        return Err(Error::InvalidParameter("inlier threshold must be non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, f64, Vec<bool>)> = None;
    for _ in 0..cfg.iterations {
        let mut mask = vec![false; j];
        for i in sample(&mut rng, j, cfg.sample_size) {
            mask[i] = true;
        }
        let Ok(model) = lsq_root_fit(p2d, rel, cam, &mask) else {
            continue;
        };
        let errors = reprojection_errors(p2d, rel, cam, &model.translation);
        let inliers: Vec<bool> = errors.iter().map(|&e| e <= cfg.inlier_threshold).collect();
        let count = inliers.iter().filter(|&&m| m).count();
        if count < cfg.sample_size {
            continue;
        }
        let score = mean_squared(&errors, &inliers);
        let better = match &best {
            None => true,
            Some((c, s, _)) => count > *c || (count == *c && score < *s),
        };
        if better {
            best = Some((count, score, inliers));
        }
    }

    let (_, _, inliers) = best.ok_or(Error::NoConsensus(cfg.sample_size))?;
    let refit = lsq_root_fit(p2d, rel, cam, &inliers)?;
    Ok(RootFitResult {
        inlier_mask: Some(inliers),
        ..refit
    })
}
